#pragma once

#include <vector>

#include "risjcas/array_geometry.hpp"
#include "risjcas/channels.hpp"
#include "risjcas/coupling.hpp"
#include "risjcas/types.hpp"

namespace risjcas {

// Nt x Nt Hermitian PSD transmit covariance with Tr(R) <= P.
struct TransmitCovariance {
  CMatrix r;

  // Largest violation of Hermitian symmetry, PSD-ness and the trace bound.
  double constraint_violation(double power) const;
  bool feasible(double power, double tol = 1e-9) const {
    return constraint_violation(power) <= tol;
  }
};

enum class RadarMode { monostatic, bistatic };

// Target geometry and noise. Monostatic uses theta_bs (BS angle), theta_ris
// (RIS elevation) and psi; bistatic uses phi_tx, phi_rx, phi_ris,
// phi_ris_rx and psi.
struct SensingScene {
  RadarMode mode = RadarMode::monostatic;
  double theta_bs = 0.0;
  double theta_ris = 0.0;
  double phi_tx = 0.0;
  double phi_rx = 0.0;
  double phi_ris = 0.0;
  double phi_ris_rx = 0.0;
  double psi = 0.0;
  cd gamma_bs = 1.0;   // gamma_1 (mono) / gamma_3 (bi)
  cd gamma_ris = 1.0;  // gamma_2 (mono) / gamma_4 (bi)
  double noise_var_sensing = 1.0;
  double noise_var_comm = 1.0;

  void validate() const;
};

struct ArraySet {
  UlaSpec tx;
  UlaSpec rx;
  UpaSpec ris;
};

// Direct path: A1 = b(t1) a(t1)^T (mono) or A3 = b(p2) a(p1)^T (bi), Nr x Nt.
// RIS path: A2 = b(t2,psi) b(t2,psi)^T, M x M (mono) or
//           A4 = b(p4) b(p3,psi)^T, Nr x M (bi).
// Partials follow the estimation-vector order of the angles.
struct SensingMatrices {
  RadarMode mode = RadarMode::monostatic;
  CMatrix direct;
  std::vector<CMatrix> direct_partials;
  CMatrix ris;
  std::vector<CMatrix> ris_partials;
};

SensingMatrices build_sensing_matrices(const SensingScene& scene,
                                       const ArraySet& arrays);

struct FiSummary {
  std::vector<double> diag;
  double trace = 0.0;
  // Largest |Im Tr| / |Re Tr| seen while forming the diagonal.
  double max_imag_ratio = 0.0;
};

// log2(1 + h R h^H / sigma_c^2) for the row vector h^H.
double mutual_information(const CRowVector& h_row, const TransmitCovariance& r,
                          double noise_var_comm);

// Diagonal of the FIM for v = [t1 g1 g1* t2 g2 g2*].
FiSummary mono_fi_diag(const SensingScene& scene, const SensingMatrices& mats,
                       const ChannelSet& channels,
                       const EffectiveReflection& theta,
                       const TransmitCovariance& r);

// Diagonal of the FIM for v = [p1 p2 g3 g3* p3 p4 g4 g4*].
FiSummary bi_fi_diag(const SensingScene& scene, const SensingMatrices& mats,
                     const ChannelSet& channels,
                     const EffectiveReflection& theta,
                     const TransmitCovariance& r);

// Dispatches on scene.mode.
FiSummary fi_diag(const SensingScene& scene, const SensingMatrices& mats,
                  const ChannelSet& channels, const EffectiveReflection& theta,
                  const TransmitCovariance& r);

// Hermitian C with Tr(F) = Re Tr(C R) for the fixed reflection.
CMatrix sensing_sandwich(const SensingScene& scene, const SensingMatrices& mats,
                         const ChannelSet& channels,
                         const EffectiveReflection& theta);

// alpha Tr(F) + (1 - alpha) MI
double weighted_objective(double alpha, const FiSummary& fi, double mi);

struct Evaluation {
  FiSummary fi;
  double mi = 0.0;
  double objective = 0.0;
};

Evaluation evaluate(double alpha, const SensingScene& scene,
                    const SensingMatrices& mats, const ChannelSet& channels,
                    const EffectiveReflection& theta,
                    const TransmitCovariance& r);

// Matrix gradients with respect to Upsilon. For a real objective f the
// returned G satisfies df = Re Tr(G^H dUpsilon), i.e. G = 2 df/dconj(Upsilon);
// for the diagonal, G_mm = df/dRe(u_m) + j df/dIm(u_m).
CMatrix grad_upsilon_fi(ReflectionModel model, const SensingScene& scene,
                        const SensingMatrices& mats, const ChannelSet& channels,
                        const PhaseShiftVector& upsilon,
                        const ScatteringMatrix& s, const TransmitCovariance& r);

CMatrix grad_upsilon_mi(ReflectionModel model, const ChannelSet& channels,
                        const PhaseShiftVector& upsilon,
                        const ScatteringMatrix& s, const TransmitCovariance& r,
                        double noise_var_comm);

// Gradients with respect to Theta for a fixed reflection, D = 2 df/dconj(Theta).
CMatrix grad_theta_fi(const SensingScene& scene, const SensingMatrices& mats,
                      const ChannelSet& channels, const EffectiveReflection& theta,
                      const TransmitCovariance& r);
CMatrix grad_theta_mi(const ChannelSet& channels, const EffectiveReflection& theta,
                      const TransmitCovariance& r, double noise_var_comm);

// Gradient of the weighted objective in R (Hermitian):
// alpha C + (1 - alpha) / ln 2 * h h^H / (sigma_c^2 + h^H R h).
CMatrix grad_rx_objective(double alpha, const SensingScene& scene,
                          const SensingMatrices& mats,
                          const ChannelSet& channels,
                          const EffectiveReflection& theta,
                          const TransmitCovariance& r);

// Propagates a gradient with respect to Theta (D = 2 df/dconj(Theta)) to
// Upsilon through Theta = (inv(Upsilon) - S)^{-1}, or passes it through for
// the conventional model.
CMatrix chain_to_upsilon(const CMatrix& d_theta, const PhaseShiftVector& upsilon,
                         const EffectiveReflection& theta);

}  // namespace risjcas

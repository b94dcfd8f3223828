#include "risjcas/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "risjcas/errors.hpp"

namespace risjcas {

namespace {

// One diagonal FIM entry: weight * Tr(E R E^H) where E is the matrix that maps
// x to the derivative of the noiseless received signal.
struct FiTerm {
  double weight;
  const CMatrix* inner;
  bool via_ris;
};

std::vector<FiTerm> fi_terms(const SensingScene& scene,
                             const SensingMatrices& mats) {
  const double inv = 1.0 / scene.noise_var_sensing;
  const double w_bs = 2.0 * std::norm(scene.gamma_bs) * inv;
  const double w_ris = 2.0 * std::norm(scene.gamma_ris) * inv;
  std::vector<FiTerm> terms;
  for (const CMatrix& d : mats.direct_partials) terms.push_back({w_bs, &d, false});
  terms.push_back({inv, &mats.direct, false});
  terms.push_back({inv, &mats.direct, false});
  for (const CMatrix& d : mats.ris_partials) terms.push_back({w_ris, &d, true});
  terms.push_back({inv, &mats.ris, true});
  terms.push_back({inv, &mats.ris, true});
  return terms;
}

// Nr x Nt map for a term.
CMatrix effective(const FiTerm& t, RadarMode mode, const ChannelSet& ch,
                  const CMatrix& theta) {
  if (!t.via_ris) return *t.inner;
  if (mode == RadarMode::monostatic)
    return ch.h_rb * theta.transpose() * (*t.inner) * theta * ch.h_br;
  return (*t.inner) * theta * ch.h_br;
}

void check_shapes(const SensingMatrices& mats, const ChannelSet& ch,
                  const CMatrix& theta, const CMatrix& r) {
  const Eigen::Index nt = ch.h_br.cols();
  const Eigen::Index m = ch.h_br.rows();
  if (r.rows() != nt || r.cols() != nt) throw ShapeError("R_x must be Nt x Nt");
  if (theta.rows() != m || theta.cols() != m) throw ShapeError("Theta must be M x M");
  if (mats.direct.cols() != nt) throw ShapeError("direct sensing matrix must have Nt columns");
  if (mats.mode == RadarMode::monostatic) {
    if (mats.ris.rows() != m || mats.ris.cols() != m)
      throw ShapeError("A2 must be M x M");
    if (ch.h_rb.cols() != m || ch.h_rb.rows() != mats.direct.rows())
      throw ShapeError("H_rb must be Nr x M");
  } else if (mats.ris.cols() != m || mats.ris.rows() != mats.direct.rows()) {
    throw ShapeError("A4 must be Nr x M");
  }
}

FiSummary fi_diag_impl(const SensingScene& scene, const SensingMatrices& mats,
                       const ChannelSet& ch, const EffectiveReflection& theta,
                       const TransmitCovariance& r) {
  check_shapes(mats, ch, theta.theta, r.r);
  FiSummary out;
  for (const FiTerm& t : fi_terms(scene, mats)) {
    const CMatrix e = effective(t, mats.mode, ch, theta.theta);
    const cd tr = (e * r.r * e.adjoint()).trace();
    const double re = tr.real();
    if (std::abs(tr.imag()) > 0.0 && re != 0.0)
      out.max_imag_ratio = std::max(out.max_imag_ratio, std::abs(tr.imag() / re));
    out.diag.push_back(t.weight * re);
  }
  for (double d : out.diag) out.trace += d;
  return out;
}

}  // namespace

double TransmitCovariance::constraint_violation(double power) const {
  if (r.rows() != r.cols()) return std::numeric_limits<double>::infinity();
  double v = (r - r.adjoint()).cwiseAbs().maxCoeff();
  const CMatrix h = 0.5 * (r + r.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(h, Eigen::EigenvaluesOnly);
  if (r.rows() > 0) v = std::max(v, -eig.eigenvalues().minCoeff());
  v = std::max(v, h.trace().real() - power);
  return std::max(v, 0.0);
}

void SensingScene::validate() const {
  if (!(noise_var_sensing > 0.0)) throw DomainError("sensing noise variance must be positive");
  if (!(noise_var_comm > 0.0)) throw DomainError("communication noise variance must be positive");
}

SensingMatrices build_sensing_matrices(const SensingScene& scene,
                                       const ArraySet& arrays) {
  SensingMatrices m;
  m.mode = scene.mode;
  if (scene.mode == RadarMode::monostatic) {
    const CVector a = ula_steering(arrays.tx, scene.theta_bs);
    const CVector b = ula_steering(arrays.rx, scene.theta_bs);
    const CVector da = ula_steering_derivative(arrays.tx, scene.theta_bs);
    const CVector db = ula_steering_derivative(arrays.rx, scene.theta_bs);
    m.direct = b * a.transpose();
    m.direct_partials = {b * da.transpose() + db * a.transpose()};

    const CVector br = upa_steering(arrays.ris, scene.theta_ris, scene.psi);
    const CVector dbr = upa_steering_derivative(arrays.ris, scene.theta_ris, scene.psi);
    m.ris = br * br.transpose();
    m.ris_partials = {br * dbr.transpose() + dbr * br.transpose()};
  } else {
    const CVector a = ula_steering(arrays.tx, scene.phi_tx);
    const CVector b = ula_steering(arrays.rx, scene.phi_rx);
    const CVector da = ula_steering_derivative(arrays.tx, scene.phi_tx);
    const CVector db = ula_steering_derivative(arrays.rx, scene.phi_rx);
    m.direct = b * a.transpose();
    m.direct_partials = {b * da.transpose(), db * a.transpose()};

    const CVector br = upa_steering(arrays.ris, scene.phi_ris, scene.psi);
    const CVector dbr = upa_steering_derivative(arrays.ris, scene.phi_ris, scene.psi);
    const CVector b4 = ula_steering(arrays.rx, scene.phi_ris_rx);
    const CVector db4 = ula_steering_derivative(arrays.rx, scene.phi_ris_rx);
    m.ris = b4 * br.transpose();
    m.ris_partials = {b4 * dbr.transpose(), db4 * br.transpose()};
  }
  return m;
}

double mutual_information(const CRowVector& h_row, const TransmitCovariance& r,
                          double noise_var_comm) {
  if (h_row.size() != r.r.rows()) throw ShapeError("h and R_x sizes differ");
  const double q = (h_row * r.r * h_row.adjoint())(0, 0).real();
  return std::log2(1.0 + std::max(q, 0.0) / noise_var_comm);
}

FiSummary mono_fi_diag(const SensingScene& scene, const SensingMatrices& mats,
                       const ChannelSet& channels,
                       const EffectiveReflection& theta,
                       const TransmitCovariance& r) {
  if (mats.mode != RadarMode::monostatic) throw ShapeError("expected monostatic sensing matrices");
  return fi_diag_impl(scene, mats, channels, theta, r);
}

FiSummary bi_fi_diag(const SensingScene& scene, const SensingMatrices& mats,
                     const ChannelSet& channels,
                     const EffectiveReflection& theta,
                     const TransmitCovariance& r) {
  if (mats.mode != RadarMode::bistatic) throw ShapeError("expected bistatic sensing matrices");
  return fi_diag_impl(scene, mats, channels, theta, r);
}

FiSummary fi_diag(const SensingScene& scene, const SensingMatrices& mats,
                  const ChannelSet& channels, const EffectiveReflection& theta,
                  const TransmitCovariance& r) {
  return fi_diag_impl(scene, mats, channels, theta, r);
}

CMatrix sensing_sandwich(const SensingScene& scene, const SensingMatrices& mats,
                         const ChannelSet& channels,
                         const EffectiveReflection& theta) {
  const Eigen::Index nt = channels.h_br.cols();
  CMatrix c = CMatrix::Zero(nt, nt);
  for (const FiTerm& t : fi_terms(scene, mats)) {
    const CMatrix e = effective(t, mats.mode, channels, theta.theta);
    c += t.weight * e.adjoint() * e;
  }
  return 0.5 * (c + c.adjoint());
}

double weighted_objective(double alpha, const FiSummary& fi, double mi) {
  return alpha * fi.trace + (1.0 - alpha) * mi;
}

Evaluation evaluate(double alpha, const SensingScene& scene,
                    const SensingMatrices& mats, const ChannelSet& channels,
                    const EffectiveReflection& theta,
                    const TransmitCovariance& r) {
  Evaluation e;
  e.fi = fi_diag(scene, mats, channels, theta, r);
  e.mi = mutual_information(
      total_comm_channel(channels.h_ru, theta, channels.h_br, channels.h_bu), r,
      scene.noise_var_comm);
  e.objective = weighted_objective(alpha, e.fi, e.mi);
  return e;
}

CMatrix chain_to_upsilon(const CMatrix& d_theta, const PhaseShiftVector& upsilon,
                         const EffectiveReflection& theta) {
  if (theta.model == ReflectionModel::conventional) return d_theta;
  // dTheta = (Theta inv(U)) dU (inv(U) Theta)
  const CVector inv_u = upsilon.values().cwiseInverse();
  const CMatrix left = theta.theta * inv_u.asDiagonal();
  const CMatrix right = inv_u.asDiagonal() * theta.theta;
  return left.adjoint() * d_theta * right.adjoint();
}

CMatrix grad_theta_fi(const SensingScene& scene, const SensingMatrices& mats,
                      const ChannelSet& channels, const EffectiveReflection& theta,
                      const TransmitCovariance& r) {
  check_shapes(mats, channels, theta.theta, r.r);
  const CMatrix& th = theta.theta;
  const CMatrix& hbr = channels.h_br;
  const CMatrix& hrb = channels.h_rb;
  const Eigen::Index m = th.rows();

  // Only RIS-path terms depend on Theta.
  CMatrix d = CMatrix::Zero(m, m);
  for (const FiTerm& t : fi_terms(scene, mats)) {
    if (!t.via_ris) continue;
    const CMatrix& x = *t.inner;
    const CMatrix e = effective(t, mats.mode, channels, th);
    const CMatrix er = e * r.r;  // Nr x Nt
    if (mats.mode == RadarMode::monostatic) {
      // E = H_rb Theta^T X Theta H_br
      const CMatrix k1 = x * th * hbr * er.adjoint() * hrb;
      d += 2.0 * t.weight * (k1.conjugate() + x.adjoint() * th.conjugate() *
                                                   hrb.adjoint() * er *
                                                   hbr.adjoint());
    } else {
      // E = X Theta H_br
      d += 2.0 * t.weight * x.adjoint() * er * hbr.adjoint();
    }
  }
  return d;
}

CMatrix grad_theta_mi(const ChannelSet& channels, const EffectiveReflection& theta,
                      const TransmitCovariance& r, double noise_var_comm) {
  const CRowVector h = total_comm_channel(channels.h_ru, theta, channels.h_br,
                                          channels.h_bu);
  const double q = (h * r.r * h.adjoint())(0, 0).real();
  const double scale = 2.0 / (std::log(2.0) * (noise_var_comm + q));
  return scale * channels.h_ru * (h * r.r * channels.h_br.adjoint());
}

CMatrix grad_upsilon_fi(ReflectionModel model, const SensingScene& scene,
                        const SensingMatrices& mats, const ChannelSet& channels,
                        const PhaseShiftVector& upsilon,
                        const ScatteringMatrix& s, const TransmitCovariance& r) {
  const EffectiveReflection theta = effective_reflection(upsilon, s, model);
  return chain_to_upsilon(grad_theta_fi(scene, mats, channels, theta, r), upsilon, theta);
}

CMatrix grad_upsilon_mi(ReflectionModel model, const ChannelSet& channels,
                        const PhaseShiftVector& upsilon,
                        const ScatteringMatrix& s, const TransmitCovariance& r,
                        double noise_var_comm) {
  const EffectiveReflection theta = effective_reflection(upsilon, s, model);
  return chain_to_upsilon(grad_theta_mi(channels, theta, r, noise_var_comm), upsilon,
                          theta);
}

CMatrix grad_rx_objective(double alpha, const SensingScene& scene,
                          const SensingMatrices& mats,
                          const ChannelSet& channels,
                          const EffectiveReflection& theta,
                          const TransmitCovariance& r) {
  const CMatrix c = sensing_sandwich(scene, mats, channels, theta);
  const CVector h = total_comm_channel(channels.h_ru, theta, channels.h_br,
                                       channels.h_bu)
                        .adjoint();
  const double q = (h.adjoint() * r.r * h)(0, 0).real();
  const double w = (1.0 - alpha) / (std::log(2.0) * (scene.noise_var_comm + q));
  return alpha * c + w * h * h.adjoint();
}

}  // namespace risjcas

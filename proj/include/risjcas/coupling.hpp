#pragma once

#include <filesystem>
#include <optional>
#include <utility>

#include "risjcas/array_geometry.hpp"
#include "risjcas/types.hpp"

namespace risjcas {

// Embedded-pattern coupling matrix B: Hermitian with unit diagonal.
struct CouplingMatrix {
  CMatrix b;
};

struct ScatteringMatrix {
  CMatrix s;
  // ||(I - S S^H) - B||_F / ||B||_F against the unclipped input.
  double reconstruction_error = 0.0;
  // Number of eigenvalues of B that fell outside [0, 1] and were clipped.
  int clipped_eigenvalues = 0;
  bool real_eigenvectors = true;

  int size() const { return static_cast<int>(s.rows()); }
  static ScatteringMatrix zero(int m);
};

// Unit-modulus RIS reflection coefficients.
class PhaseShiftVector {
 public:
  PhaseShiftVector() = default;
  // Throws DomainError if any |v_m| differs from one by more than 1e-12.
  explicit PhaseShiftVector(CVector values);

  static PhaseShiftVector ones(int m);

  const CVector& values() const { return values_; }
  int size() const { return static_cast<int>(values_.size()); }
  cd operator()(int m) const { return values_(m); }

 private:
  struct Unchecked {};
  PhaseShiftVector(CVector values, Unchecked) : values_(std::move(values)) {}
  friend PhaseShiftVector project_unit_modulus(const CVector& raw);

  CVector values_;
};

enum class ReflectionModel { physically_consistent, conventional };

struct EffectiveReflection {
  CMatrix theta;
  ReflectionModel model = ReflectionModel::conventional;
};

inline constexpr int kDefaultQuadratureOrder = 128;
inline constexpr double kMaxReflectionCondition = 1e12;

// B_mn = int cos(t) exp(j k (r_m - r_n) . u(t, p)) dOmega / int cos(t) dOmega
// over the upper hemisphere, evaluated with Gauss-Legendre nodes in both
// angles. `quadrature_order` is a floor: wide apertures get about
// (pi/2) k D_max + 32 nodes per angle, D_max being the aperture diagonal.
// Throws QuadratureError if the normalising integral misses pi by more
// than 1e-6 (relative).
CouplingMatrix build_coupling_matrix(const UpaSpec& spec,
                                     int quadrature_order = kDefaultQuadratureOrder);

// S = U sqrt(I - clip(Lambda)) U^T with B = U Lambda U^H.
ScatteringMatrix scattering_from_coupling(const CouplingMatrix& coupling);

// Theta = (inv(Upsilon) - S)^{-1} via LU solve, or Diag(upsilon) for the
// conventional model. Throws SingularReflection when the reciprocal condition
// estimate is below 1/kMaxReflectionCondition.
EffectiveReflection effective_reflection(const PhaseShiftVector& upsilon,
                                         const ScatteringMatrix& s,
                                         ReflectionModel model);

// Binary cache for B. Header: magic, version, side, spacing, wavelength,
// quadrature order; payload: M*M complex128, column-major.
void save_coupling_cache(const std::filesystem::path& path, const UpaSpec& spec,
                         int quadrature_order, const CouplingMatrix& coupling);
// nullopt when the file is missing or its header does not match.
std::optional<CouplingMatrix> load_coupling_cache(
    const std::filesystem::path& path, const UpaSpec& spec,
    int quadrature_order);

// Loads from the cache when it matches, otherwise computes and writes it.
CouplingMatrix cached_coupling_matrix(const std::filesystem::path& path,
                                      const UpaSpec& spec,
                                      int quadrature_order = kDefaultQuadratureOrder);

// Gauss-Legendre nodes and weights on [a, b].
void gauss_legendre(int order, double a, double b, RVector& nodes,
                    RVector& weights);

}  // namespace risjcas

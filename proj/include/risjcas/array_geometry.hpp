#pragma once

#include "risjcas/types.hpp"

namespace risjcas {

// Uniform linear array with the phase origin at the array centre.
struct UlaSpec {
  int n_elements = 4;
  double spacing = 0.05;     // metres
  double wavelength = 0.1;   // metres

  // k = 2*pi*d/lambda
  double wavenumber_factor() const;
  void validate() const;
};

// Square uniform planar array, side x side elements, cosine element pattern.
struct UpaSpec {
  int side = 8;
  double spacing = 0.05;     // d_r, metres
  double wavelength = 0.1;

  int elements() const { return side * side; }
  void validate() const;
};

// |cos(theta)| below this is treated as end-fire for the UPA derivative.
inline constexpr double kAngleEpsilon = 1e-9;

// exp(j (i - (N-1)/2) k sin(theta)), i = 0..N-1.
CVector ula_steering(const UlaSpec& spec, double theta);

// Exact theta-derivative of ula_steering; each entry carries its own centred
// index (i - (N-1)/2).
CVector ula_steering_derivative(const UlaSpec& spec, double theta);

// sqrt(|cos theta|) * (p(sin theta sin psi) kron p(sin theta cos psi)), where
// p(u)_n = exp(j 2 pi d_r/lambda n u). Row-major: element m = row*side + col,
// the row index follows the psi-sine progression.
CVector upa_steering(const UpaSpec& spec, double theta, double psi);

// d/dtheta of upa_steering: amplitude term plus the two phase terms.
// Throws DomainError when |cos theta| < kAngleEpsilon.
CVector upa_steering_derivative(const UpaSpec& spec, double theta, double psi);

}  // namespace risjcas

#include "risjcas/array_geometry.hpp"

#include <cmath>
#include <string>

#include "risjcas/errors.hpp"

namespace risjcas {

namespace {

// n-th entry exp(j*phase_step*n), n = 0..count-1
CVector progression(int count, double phase_step) {
  CVector v(count);
  for (int n = 0; n < count; ++n) v(n) = std::polar(1.0, phase_step * n);
  return v;
}

CVector kron(const CVector& left, const CVector& right) {
  CVector out(left.size() * right.size());
  for (Eigen::Index i = 0; i < left.size(); ++i)
    out.segment(i * right.size(), right.size()) = left(i) * right;
  return out;
}

}  // namespace

double UlaSpec::wavenumber_factor() const {
  return 2.0 * kPi * spacing / wavelength;
}

void UlaSpec::validate() const {
  if (n_elements < 1) throw DomainError("ULA needs at least one element");
  if (!(spacing > 0.0)) throw DomainError("ULA spacing must be positive");
  if (!(wavelength > 0.0)) throw DomainError("ULA wavelength must be positive");
  if (!std::isfinite(wavenumber_factor()))
    throw DomainError("ULA wavenumber factor is not finite");
}

void UpaSpec::validate() const {
  if (side < 1) throw DomainError("UPA side must be at least one");
  if (!(spacing > 0.0)) throw DomainError("UPA spacing must be positive");
  if (!(wavelength > 0.0)) throw DomainError("UPA wavelength must be positive");
}

CVector ula_steering(const UlaSpec& spec, double theta) {
  const double k = spec.wavenumber_factor();
  const double centre = 0.5 * (spec.n_elements - 1);
  const double s = std::sin(theta);
  CVector a(spec.n_elements);
  for (int i = 0; i < spec.n_elements; ++i)
    a(i) = std::polar(1.0, (i - centre) * k * s);
  return a;
}

CVector ula_steering_derivative(const UlaSpec& spec, double theta) {
  const double k = spec.wavenumber_factor();
  const double centre = 0.5 * (spec.n_elements - 1);
  const double c = std::cos(theta);
  CVector a = ula_steering(spec, theta);
  for (int i = 0; i < spec.n_elements; ++i)
    a(i) *= cd(0.0, (i - centre) * k * c);
  return a;
}

CVector upa_steering(const UpaSpec& spec, double theta, double psi) {
  const double kd = 2.0 * kPi * spec.spacing / spec.wavelength;
  const double st = std::sin(theta);
  const CVector rows = progression(spec.side, kd * st * std::sin(psi));
  const CVector cols = progression(spec.side, kd * st * std::cos(psi));
  return std::sqrt(std::abs(std::cos(theta))) * kron(rows, cols);
}

CVector upa_steering_derivative(const UpaSpec& spec, double theta,
                                double psi) {
  const double ct = std::cos(theta);
  if (std::abs(ct) < kAngleEpsilon)
    throw DomainError("UPA steering derivative undefined at |cos(theta)| = " +
                      std::to_string(std::abs(ct)));
  const double kd = 2.0 * kPi * spec.spacing / spec.wavelength;
  const double st = std::sin(theta);
  const double sp = std::sin(psi);
  const double cp = std::cos(psi);

  const CVector rows = progression(spec.side, kd * st * sp);
  const CVector cols = progression(spec.side, kd * st * cp);
  CVector d_rows = rows;
  CVector d_cols = cols;
  for (int n = 0; n < spec.side; ++n) {
    d_rows(n) *= cd(0.0, kd * n * ct * sp);
    d_cols(n) *= cd(0.0, kd * n * ct * cp);
  }

  const double amp = std::sqrt(std::abs(ct));
  const double d_amp = -st * ct / (2.0 * std::pow(std::abs(ct), 1.5));
  return d_amp * kron(rows, cols) + amp * kron(d_rows, cols) +
         amp * kron(rows, d_cols);
}

}  // namespace risjcas

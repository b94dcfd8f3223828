#pragma once

// Independent reference implementations used only by the tests.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "risjcas/experiment.hpp"
#include "risjcas/metrics.hpp"
#include "risjcas/optimizer.hpp"

namespace oracle {

using risjcas::cd;
using risjcas::CMatrix;
using risjcas::CVector;
using risjcas::kPi;

inline CVector ula_loop(int n, double d_over_lambda, double theta) {
  CVector v(n);
  for (int i = 0; i < n; ++i) {
    const double phase = 2.0 * kPi * d_over_lambda * (i - 0.5 * (n - 1)) * std::sin(theta);
    v(i) = cd(std::cos(phase), std::sin(phase));
  }
  return v;
}

inline CVector upa_loop(int side, double d_over_lambda, double theta, double psi) {
  CVector v(side * side);
  const double amp = std::sqrt(std::abs(std::cos(theta)));
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      const double phase = 2.0 * kPi * d_over_lambda * std::sin(theta) *
                           (r * std::sin(psi) + c * std::cos(psi));
      v(r * side + c) = amp * cd(std::cos(phase), std::sin(phase));
    }
  return v;
}

template <typename F>
CVector central_difference(F&& f, double x, double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double rel_err(const CVector& a, const CVector& ref) {
  return (a - ref).norm() / std::max(ref.norm(), 1e-300);
}

inline double rel_err(const CMatrix& a, const CMatrix& ref) {
  return (a - ref).norm() / std::max(ref.norm(), 1e-300);
}

inline double rel_err(double a, double ref) {
  return std::abs(a - ref) / std::max(std::abs(ref), 1e-300);
}

// 2 J1(x) / x, the hemisphere cosine-pattern overlap at distance x / k.
inline double jinc(double x) {
  if (x == 0.0) return 1.0;
  return 2.0 * std::cyl_bessel_j(1.0, x) / x;
}

inline CVector random_cvec(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CVector v(n);
  for (int i = 0; i < n; ++i) v(i) = cd(g(rng), g(rng));
  return v;
}

inline CMatrix random_cmat(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CMatrix m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = cd(g(rng), g(rng));
  return m;
}

inline CMatrix random_hermitian(int n, std::mt19937_64& rng) {
  const CMatrix a = random_cmat(n, n, rng);
  return 0.5 * (a + a.adjoint());
}

// PSD with the given trace.
inline CMatrix random_psd(int n, double trace, std::mt19937_64& rng) {
  const CMatrix a = random_cmat(n, n, rng);
  CMatrix r = a * a.adjoint();
  r *= trace / r.trace().real();
  return 0.5 * (r + r.adjoint());
}

inline risjcas::PhaseShiftVector random_phases(int m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-kPi, kPi);
  CVector v(m);
  for (int i = 0; i < m; ++i) v(i) = std::polar(1.0, u(rng));
  return risjcas::PhaseShiftVector(v);
}

// Small scene where the RIS-dependent terms dominate, so finite differences of
// the objective do not cancel against the constant direct-path terms.
inline risjcas::ExperimentConfig scaled_config(const char* mode, const char* model,
                                               int side = 2) {
  risjcas::ExperimentConfig c;
  c.mode = mode;
  c.model = model;
  c.ris_side = side;
  c.spacing = "lambda/4";
  c.pathloss_ref_db = 20.0;
  c.bs_ris.distance = 1.0;
  c.noise_sensing_dbm = -10.0;
  c.noise_comm_dbm = -50.0;
  c.quadrature_order = 64;
  return c;
}

// Noiseless received sensing signal for one transmit sample. Angles and
// gammas are read from `scene`; array sizes and spacings from `arrays`.
inline CVector mean_signal(const risjcas::SensingScene& scene,
                           const risjcas::ArraySet& arrays,
                           const risjcas::ChannelSet& ch, const CMatrix& theta,
                           const CVector& x) {
  const double dt = arrays.tx.spacing / arrays.tx.wavelength;
  const double dr = arrays.rx.spacing / arrays.rx.wavelength;
  const double ds = arrays.ris.spacing / arrays.ris.wavelength;
  const int nt = arrays.tx.n_elements;
  const int nr = arrays.rx.n_elements;
  const int side = arrays.ris.side;
  if (scene.mode == risjcas::RadarMode::monostatic) {
    const CVector a = ula_loop(nt, dt, scene.theta_bs);
    const CVector b = ula_loop(nr, dr, scene.theta_bs);
    const CVector br = upa_loop(side, ds, scene.theta_ris, scene.psi);
    const CVector at_ris = theta * (ch.h_br * x);
    const cd proj = br.transpose() * at_ris;
    const CVector back = theta.transpose() * (br * proj);
    return scene.gamma_bs * b * cd(a.transpose() * x) + scene.gamma_ris * (ch.h_rb * back);
  }
  const CVector a = ula_loop(nt, dt, scene.phi_tx);
  const CVector b = ula_loop(nr, dr, scene.phi_rx);
  const CVector br = upa_loop(side, ds, scene.phi_ris, scene.psi);
  const CVector b4 = ula_loop(nr, dr, scene.phi_ris_rx);
  const cd proj = br.transpose() * (theta * (ch.h_br * x));
  return scene.gamma_bs * b * cd(a.transpose() * x) + scene.gamma_ris * b4 * proj;
}

// Gaussian-mean FIM diagonal from finite differences of the mean signal over
// the columns of `x` (whose sample covariance realises R). Angle entries are
// (2/s2) |dmu/dangle|^2, each complex gain contributes (1/s2) |dmu/dgamma|^2
// twice (gamma and its conjugate).
inline std::vector<double> fd_fi_diag(const risjcas::SensingScene& scene,
                                      const risjcas::ArraySet& arrays,
                                      const risjcas::ChannelSet& ch,
                                      const CMatrix& theta, const CMatrix& x) {
  using risjcas::SensingScene;
  const int n = static_cast<int>(x.cols());
  const double s2 = scene.noise_var_sensing;
  auto angle_entry = [&](double SensingScene::*field) {
    double acc = 0.0;
    const double h = 1e-6;
    for (int k = 0; k < n; ++k) {
      SensingScene p = scene, q = scene;
      p.*field += h;
      q.*field -= h;
      const CVector d = (mean_signal(p, arrays, ch, theta, x.col(k)) -
                         mean_signal(q, arrays, ch, theta, x.col(k))) / (2.0 * h);
      acc += d.squaredNorm();
    }
    return 2.0 / s2 * acc / n;
  };
  auto gain_entry = [&](cd SensingScene::*field) {
    double acc = 0.0;
    const double h = 1e-3 * std::max(std::abs(scene.*field), 1e-3);
    for (int k = 0; k < n; ++k) {
      SensingScene pr = scene, qr = scene, pi = scene, qi = scene;
      pr.*field += h;
      qr.*field -= h;
      pi.*field += cd(0.0, h);
      qi.*field -= cd(0.0, h);
      const CVector x_k = x.col(k);
      const CVector d_re = (mean_signal(pr, arrays, ch, theta, x_k) -
                            mean_signal(qr, arrays, ch, theta, x_k)) / (2.0 * h);
      const CVector d_im = (mean_signal(pi, arrays, ch, theta, x_k) -
                            mean_signal(qi, arrays, ch, theta, x_k)) / (2.0 * h);
      const CVector wirtinger = 0.5 * (d_re - cd(0.0, 1.0) * d_im);
      acc += wirtinger.squaredNorm();
    }
    return acc / (s2 * n);
  };
  std::vector<double> f;
  if (scene.mode == risjcas::RadarMode::monostatic) {
    f.push_back(angle_entry(&SensingScene::theta_bs));
    f.push_back(gain_entry(&SensingScene::gamma_bs));
    f.push_back(f.back());
    f.push_back(angle_entry(&SensingScene::theta_ris));
    f.push_back(gain_entry(&SensingScene::gamma_ris));
    f.push_back(f.back());
  } else {
    f.push_back(angle_entry(&SensingScene::phi_tx));
    f.push_back(angle_entry(&SensingScene::phi_rx));
    f.push_back(gain_entry(&SensingScene::gamma_bs));
    f.push_back(f.back());
    f.push_back(angle_entry(&SensingScene::phi_ris));
    f.push_back(angle_entry(&SensingScene::phi_ris_rx));
    f.push_back(gain_entry(&SensingScene::gamma_ris));
    f.push_back(f.back());
  }
  return f;
}

// Theta from an unconstrained complex upsilon.
inline CMatrix theta_raw(const CVector& u, const CMatrix& s,
                         risjcas::ReflectionModel model) {
  if (model == risjcas::ReflectionModel::conventional) return u.asDiagonal();
  const CMatrix m = CMatrix(u.cwiseInverse().asDiagonal()) - s;
  return m.partialPivLu().solve(CMatrix::Identity(u.size(), u.size()));
}

// Central differences of f with respect to Re and Im of every upsilon entry;
// returns df/dRe + j df/dIm per entry.
template <typename F>
CVector fd_upsilon_gradient(F&& f, const CVector& u, double h = 1e-6) {
  CVector g(u.size());
  for (Eigen::Index m = 0; m < u.size(); ++m) {
    CVector a = u, b = u;
    a(m) += h;
    b(m) -= h;
    const double d_re = (f(a) - f(b)) / (2.0 * h);
    a = u;
    b = u;
    a(m) += cd(0.0, h);
    b(m) -= cd(0.0, h);
    const double d_im = (f(a) - f(b)) / (2.0 * h);
    g(m) = cd(d_re, d_im);
  }
  return g;
}

}  // namespace oracle

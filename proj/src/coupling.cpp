#include "risjcas/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <utility>

#include "risjcas/errors.hpp"

namespace risjcas {

namespace {

constexpr char kCacheMagic[4] = {'R', 'J', 'C', 'B'};
constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool read_pod(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return static_cast<bool>(is);
}

}  // namespace

ScatteringMatrix ScatteringMatrix::zero(int m) {
  ScatteringMatrix out;
  out.s = CMatrix::Zero(m, m);
  return out;
}

PhaseShiftVector::PhaseShiftVector(CVector values) : values_(std::move(values)) {
  for (Eigen::Index m = 0; m < values_.size(); ++m)
    if (std::abs(std::abs(values_(m)) - 1.0) > 1e-12)
      throw DomainError("phase shift entry " + std::to_string(m) +
                        " is not unit modulus");
}

PhaseShiftVector PhaseShiftVector::ones(int m) {
  return PhaseShiftVector(CVector::Ones(m), Unchecked{});
}

void gauss_legendre(int order, double a, double b, RVector& nodes,
                    RVector& weights) {
  if (order < 1) throw QuadratureError("quadrature order must be positive");
  nodes.resize(order);
  weights.resize(order);
  // P_n(x) and P_n'(x) by the three-term recurrence.
  const auto legendre = [order](double x) {
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= order; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    return std::pair{p1, order * (x * p1 - p0) / (x * x - 1.0)};
  };
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (b + a);
  for (int i = 0; i < (order + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (order + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double dp = legendre(x).second;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes(i) = mid - half * x;
    nodes(order - 1 - i) = mid + half * x;
    weights(i) = half * w;
    weights(order - 1 - i) = half * w;
  }
}

CouplingMatrix build_coupling_matrix(const UpaSpec& spec, int quadrature_order) {
  spec.validate();
  const int side = spec.side;
  const int m_total = spec.elements();
  const double kd = 2.0 * kPi * spec.spacing / spec.wavelength;
  // Gauss-Legendre on [0, 2pi) resolves exp(j w psi) only with about
  // pi w / 2 nodes; w reaches k times the aperture diagonal.
  const double widest = kd * (side - 1) * std::sqrt(2.0);
  const int order = std::max(quadrature_order,
                             static_cast<int>(std::ceil(0.5 * kPi * widest)) + 32);

  RVector t_nodes, t_weights, p_nodes, p_weights;
  gauss_legendre(order, 0.0, 0.5 * kPi, t_nodes, t_weights);
  gauss_legendre(order, 0.0, 2.0 * kPi, p_nodes, p_weights);

  // Per-node radial weight cos(t) sin(t) dt dp and in-plane direction cosines.
  const int n_nodes = order * order;
  RVector w(n_nodes), ux(n_nodes), uy(n_nodes);
  for (int i = 0; i < order; ++i) {
    const double st = std::sin(t_nodes(i));
    const double ct = std::cos(t_nodes(i));
    for (int j = 0; j < order; ++j) {
      const int n = i * order + j;
      w(n) = t_weights(i) * p_weights(j) * ct * st;
      ux(n) = st * std::cos(p_nodes(j));
      uy(n) = st * std::sin(p_nodes(j));
    }
  }

  const double norm = w.sum();
  if (std::abs(norm / kPi - 1.0) > 1e-6)
    throw QuadratureError("coupling quadrature self-check failed: normaliser " +
                          std::to_string(norm) + " vs pi");

  // B depends only on the integer offset between elements.
  const int span = 2 * side - 1;
  CMatrix overlap(span, span);  // (d_row + side-1, d_col + side-1)
  for (int dr = -(side - 1); dr < side; ++dr) {
    for (int dc = -(side - 1); dc < side; ++dc) {
      if (dr < 0 || (dr == 0 && dc < 0)) continue;  // filled by conjugation
      cd acc = 0.0;
      for (int n = 0; n < n_nodes; ++n)
        acc += w(n) * std::polar(1.0, kd * (dc * ux(n) + dr * uy(n)));
      overlap(dr + side - 1, dc + side - 1) = acc / norm;
      overlap(-dr + side - 1, -dc + side - 1) = std::conj(acc / norm);
    }
  }

  CouplingMatrix out;
  out.b.resize(m_total, m_total);
  for (int m = 0; m < m_total; ++m) {
    for (int n = 0; n < m_total; ++n) {
      const int dr = m / side - n / side;
      const int dc = m % side - n % side;
      out.b(m, n) = overlap(dr + side - 1, dc + side - 1);
    }
  }
  // The exact integrand is even under u -> -u, so B is real; drop the
  // imaginary quadrature residue when it is negligible.
  if (out.b.imag().cwiseAbs().maxCoeff() < 1e-9) out.b = out.b.real().cast<cd>();
  out.b.diagonal().setOnes();
  return out;
}

ScatteringMatrix scattering_from_coupling(const CouplingMatrix& coupling) {
  const CMatrix& b = coupling.b;
  const Eigen::Index m = b.rows();
  if (b.cols() != m) throw ShapeError("coupling matrix must be square");

  ScatteringMatrix out;
  CMatrix u;
  RVector lambda;
  if (b.imag().cwiseAbs().maxCoeff() == 0.0) {
    Eigen::SelfAdjointEigenSolver<RMatrix> eig(b.real());
    u = eig.eigenvectors().cast<cd>();
    lambda = eig.eigenvalues();
    out.real_eigenvectors = true;
  } else {
    const CMatrix herm = 0.5 * (b + b.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(herm);
    u = eig.eigenvectors();
    lambda = eig.eigenvalues();
    out.real_eigenvectors = false;
  }

  RVector root(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    double l = lambda(i);
    if (l < 0.0 || l > 1.0) ++out.clipped_eigenvalues;
    l = std::clamp(l, 0.0, 1.0);
    root(i) = std::sqrt(1.0 - l);
  }
  out.s = u * root.cast<cd>().asDiagonal() * u.transpose();

  const CMatrix recon = CMatrix::Identity(m, m) - out.s * out.s.adjoint();
  out.reconstruction_error = (recon - b).norm() / b.norm();
  return out;
}

EffectiveReflection effective_reflection(const PhaseShiftVector& upsilon,
                                         const ScatteringMatrix& s,
                                         ReflectionModel model) {
  const int m = upsilon.size();
  EffectiveReflection out;
  out.model = model;
  if (model == ReflectionModel::conventional) {
    out.theta = upsilon.values().asDiagonal();
    return out;
  }
  if (s.size() != m) throw ShapeError("scattering matrix size mismatch");
  CMatrix w = -s.s;
  for (int i = 0; i < m; ++i) w(i, i) += 1.0 / upsilon(i);
  Eigen::PartialPivLU<CMatrix> lu(w);
  const double rcond = lu.rcond();
  if (!(rcond > 1.0 / kMaxReflectionCondition))
    throw SingularReflection("inv(Upsilon) - S is ill-conditioned (rcond " +
                             std::to_string(rcond) + ")");
  out.theta = lu.solve(CMatrix::Identity(m, m));
  return out;
}

void save_coupling_cache(const std::filesystem::path& path, const UpaSpec& spec,
                         int quadrature_order, const CouplingMatrix& coupling) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write coupling cache " + path.string());
  os.write(kCacheMagic, 4);
  write_pod(os, kCacheVersion);
  write_pod(os, static_cast<std::int32_t>(spec.side));
  write_pod(os, spec.spacing);
  write_pod(os, spec.wavelength);
  write_pod(os, static_cast<std::int32_t>(quadrature_order));
  os.write(reinterpret_cast<const char*>(coupling.b.data()),
           static_cast<std::streamsize>(sizeof(cd) * coupling.b.size()));
  if (!os) throw IoError("failed writing coupling cache " + path.string());
}

std::optional<CouplingMatrix> load_coupling_cache(
    const std::filesystem::path& path, const UpaSpec& spec,
    int quadrature_order) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return std::nullopt;
  char magic[4];
  is.read(magic, 4);
  std::uint32_t version = 0;
  std::int32_t side = 0, order = 0;
  double spacing = 0.0, wavelength = 0.0;
  if (!is || !std::equal(magic, magic + 4, kCacheMagic)) return std::nullopt;
  if (!read_pod(is, version) || version != kCacheVersion) return std::nullopt;
  if (!read_pod(is, side) || !read_pod(is, spacing) ||
      !read_pod(is, wavelength) || !read_pod(is, order))
    return std::nullopt;
  if (side != spec.side || spacing != spec.spacing ||
      wavelength != spec.wavelength || order != quadrature_order)
    return std::nullopt;
  CouplingMatrix out;
  const int m = side * side;
  out.b.resize(m, m);
  is.read(reinterpret_cast<char*>(out.b.data()),
          static_cast<std::streamsize>(sizeof(cd) * out.b.size()));
  if (!is) return std::nullopt;
  return out;
}

CouplingMatrix cached_coupling_matrix(const std::filesystem::path& path,
                                      const UpaSpec& spec,
                                      int quadrature_order) {
  if (auto hit = load_coupling_cache(path, spec, quadrature_order)) return *hit;
  CouplingMatrix b = build_coupling_matrix(spec, quadrature_order);
  save_coupling_cache(path, spec, quadrature_order, b);
  return b;
}

}  // namespace risjcas

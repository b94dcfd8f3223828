#include "risjcas/quantization.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <random>

#include "risjcas/errors.hpp"
#include "risjcas/parallel.hpp"

namespace risjcas {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double pdf(double x) {
  if (!std::isfinite(x)) return 0.0;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

void check_bits(int bits) {
  if (bits < 1 || bits > kMaxQuantizerBits)
    throw UnsupportedBits("quantizer resolution must be 1..16 bits, got " +
                          std::to_string(bits));
}

// Fixed 16-point Gauss-Legendre rule on [-1, 1].
struct LocalRule {
  RVector x, w;
  LocalRule() { gauss_legendre(16, -1.0, 1.0, x, w); }
};

const LocalRule& local_rule() {
  static const LocalRule rule;
  return rule;
}

// Integral of (x - c)^2 phi(x) over [a, b] with finite a, b.
double cell_distortion(double a, double b, double c) {
  const LocalRule& q = local_rule();
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double s = 0.0;
  for (Eigen::Index i = 0; i < q.x.size(); ++i) {
    const double x = mid + half * q.x[i];
    s += q.w[i] * (x - c) * (x - c) * pdf(x);
  }
  return s * half;
}

// Integral of (x - c)^2 phi(x) over [b, inf), evaluated piecewise so the
// Gaussian tail is resolved.
double tail_distortion(double b, double c) {
  double s = 0.0;
  const double stop = std::max(b, 0.0) + 40.0;
  for (double lo = b; lo < stop; lo += 1.0) s += cell_distortion(lo, lo + 1.0, c);
  return s;
}

}  // namespace

double standard_normal_cdf(double x) {
  if (x == kInf) return 1.0;
  if (x == -kInf) return 0.0;
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double uniform_quantizer_mse(int bits, double delta) {
  check_bits(bits);
  if (!(delta > 0.0)) throw DomainError("quantizer step must be positive");
  // Symmetric: sum over the positive half and double.
  const long half = 1L << (bits - 1);
  double d = 0.0;
  for (long i = 0; i < half; ++i) {
    const double c = delta * (static_cast<double>(i) + 0.5);
    const double lo = delta * static_cast<double>(i);
    if (i == half - 1)
      d += tail_distortion(lo, c);
    else
      d += cell_distortion(lo, lo + delta, c);
  }
  return 2.0 * d;
}

double mse_optimal_uniform_step(int bits) {
  check_bits(bits);
  static std::mutex mu;
  static std::map<int, double> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = cache.find(bits); it != cache.end()) return it->second;
  }
  // The distortion is unimodal in delta; loading factor 2^(b-1) delta lies
  // well inside (0.5, 8) for every supported resolution.
  const double levels_half = std::ldexp(1.0, bits - 1);
  double lo = 0.5 / levels_half, hi = 8.0 / levels_half;
  if (bits == 1) lo = 0.5, hi = 3.0;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = uniform_quantizer_mse(bits, x1), f2 = uniform_quantizer_mse(bits, x2);
  while (hi - lo > 1e-10 * hi) {
    if (f1 < f2) {
      hi = x2; x2 = x1; f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = uniform_quantizer_mse(bits, x1);
    } else {
      lo = x1; x1 = x2; f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = uniform_quantizer_mse(bits, x2);
    }
  }
  const double best = 0.5 * (lo + hi);
  std::lock_guard<std::mutex> lock(mu);
  cache[bits] = best;
  return best;
}

double optimal_step(int bits) {
  check_bits(bits);
  switch (bits) {
    case 1: return std::sqrt(8.0 / kPi);
    case 3: return 0.5860;
    case 4: return 0.3352;
    case 8: return 0.0308;
    default: return mse_optimal_uniform_step(bits);
  }
}

QuantizerSpec build_midriser(int bits, double signal_variance) {
  check_bits(bits);
  if (!(signal_variance > 0.0) || !std::isfinite(signal_variance))
    throw DomainError("quantizer input variance must be positive and finite");
  QuantizerSpec q;
  q.bits = bits;
  q.delta = optimal_step(bits) * std::sqrt(signal_variance);
  const int n = 1 << bits;
  const int half = n / 2;
  q.levels.resize(n);
  q.lower.resize(n);
  q.upper.resize(n);
  for (int k = 0; k < n; ++k) {
    const double i = static_cast<double>(k - half);
    q.levels[k] = q.delta * (i + 0.5);
    q.lower[k] = k == 0 ? -kInf : q.delta * i;
    q.upper[k] = k == n - 1 ? kInf : q.delta * (i + 1.0);
  }
  return q;
}

int quantizer_cell(double v, const QuantizerSpec& spec) {
  const int n = spec.level_count();
  if (std::isnan(v)) throw DomainError("cannot quantize NaN");
  const double idx = std::floor(v / spec.delta) + n / 2;
  return static_cast<int>(std::clamp(idx, 0.0, static_cast<double>(n - 1)));
}

double quantize(double v, const QuantizerSpec& spec) {
  return spec.levels[quantizer_cell(v, spec)];
}

CVector quantize(const CVector& y, const QuantizerSpec& spec) {
  CVector out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i)
    out(i) = cd(quantize(y(i).real(), spec), quantize(y(i).imag(), spec));
  return out;
}

CMatrix transmit_batch(const TransmitCovariance& r, int n_samples,
                       std::uint64_t seed) {
  const Eigen::Index nt = r.r.rows();
  if (n_samples < nt) throw DomainError("batch must have at least Nt samples");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  CMatrix z(nt, n_samples);
  for (Eigen::Index j = 0; j < z.cols(); ++j)
    for (Eigen::Index i = 0; i < nt; ++i) z(i, j) = cd(normal(rng), normal(rng));

  // Whiten so that z z^H / n = I exactly.
  const CMatrix cov = z * z.adjoint() / static_cast<double>(n_samples);
  Eigen::SelfAdjointEigenSolver<CMatrix> ec(0.5 * (cov + cov.adjoint()));
  const RVector ic = ec.eigenvalues().cwiseSqrt().cwiseInverse();
  const CMatrix whiten = ec.eigenvectors() * ic.cast<cd>().asDiagonal() *
                         ec.eigenvectors().adjoint();

  Eigen::SelfAdjointEigenSolver<CMatrix> er(0.5 * (r.r + r.r.adjoint()));
  const RVector sr = er.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const CMatrix root = er.eigenvectors() * sr.cast<cd>().asDiagonal() *
                       er.eigenvectors().adjoint();
  return root * whiten * z;
}

namespace {

enum class ParamKind { angle, gain, gain_conj };

struct Param {
  CMatrix map;  // Nr x Nt; derivative of the complex mean is map * x
  ParamKind kind;
};

CMatrix through_ris(const CMatrix& inner, RadarMode mode, const ChannelSet& ch,
                    const CMatrix& theta) {
  if (mode == RadarMode::monostatic)
    return ch.h_rb * theta.transpose() * inner * theta * ch.h_br;
  return inner * theta * ch.h_br;
}

std::vector<Param> parameters(const SensingScene& scene,
                              const SensingMatrices& mats,
                              const ChannelSet& ch, const CMatrix& theta) {
  std::vector<Param> p;
  for (const CMatrix& d : mats.direct_partials)
    p.push_back({scene.gamma_bs * d, ParamKind::angle});
  p.push_back({mats.direct, ParamKind::gain});
  p.push_back({mats.direct, ParamKind::gain_conj});
  for (const CMatrix& d : mats.ris_partials)
    p.push_back({scene.gamma_ris * through_ris(d, mats.mode, ch, theta), ParamKind::angle});
  const CMatrix e = through_ris(mats.ris, mats.mode, ch, theta);
  p.push_back({e, ParamKind::gain});
  p.push_back({e, ParamKind::gain_conj});
  return p;
}

// Derivative of the real (re = true) or imaginary component given the complex
// derivative a of the mean with respect to the underlying parameter.
cd component_derivative(ParamKind kind, cd a, bool re) {
  const cd j(0.0, 1.0);
  switch (kind) {
    case ParamKind::angle: return re ? cd(a.real()) : cd(a.imag());
    case ParamKind::gain: return re ? 0.5 * a : -0.5 * j * a;
    case ParamKind::gain_conj: return re ? 0.5 * std::conj(a) : 0.5 * j * std::conj(a);
  }
  return 0.0;
}

// Fisher weight of one quantized real Gaussian observation with mean mu and
// standard deviation sd: sum_i (phi(u_i) - phi(l_i))^2 / (sd^2 P_i).
double quantized_weight(double mu, double sd, const QuantizerSpec& q,
                        int& floored) {
  // Cells far from the mean carry no information at double precision.
  const double reach = 40.0 * sd;
  int k0 = quantizer_cell(mu - reach, q);
  int k1 = quantizer_cell(mu + reach, q);
  double w = 0.0;
  double prev_z = (q.lower[k0] - mu) / sd;
  double prev_cdf = standard_normal_cdf(prev_z), prev_pdf = pdf(prev_z);
  for (int k = k0; k <= k1; ++k) {
    const double z = (q.upper[k] - mu) / sd;
    const double c = standard_normal_cdf(z), f = pdf(z);
    // Upper tail probability computed directly to keep precision above mu.
    double prob = c - prev_cdf;
    if (prev_z > 0.0)
      prob = standard_normal_cdf(-prev_z) - standard_normal_cdf(-z);
    const double df = f - prev_pdf;
    if (prob < kProbabilityFloor) {
      ++floored;
    } else {
      w += df * df / prob;
    }
    prev_z = z;
    prev_cdf = c;
    prev_pdf = f;
  }
  return w / (sd * sd);
}

template <typename SpecFor>
QuantizedFiResult quantized_fim_impl(const SensingScene& scene,
                                     const SensingMatrices& mats,
                                     const ChannelSet& channels,
                                     const EffectiveReflection& theta,
                                     const CMatrix& x, bool include_si,
                                     SpecFor&& spec_for) {
  scene.validate();
  const Eigen::Index nt = channels.h_br.cols();
  if (x.rows() != nt || x.cols() == 0) throw ShapeError("transmit batch must be Nt x n, n > 0");
  const std::vector<Param> params = parameters(scene, mats, channels, theta.theta);
  const Eigen::Index np = static_cast<Eigen::Index>(params.size());

  CMatrix mean = scene.gamma_bs * mats.direct * x +
                 scene.gamma_ris * through_ris(mats.ris, mats.mode, channels, theta.theta) * x;
  if (include_si) mean += channels.h_si * x;
  const Eigen::Index nr = mean.rows();

  std::vector<CMatrix> deriv;  // per parameter, Nr x n
  deriv.reserve(params.size());
  for (const Param& p : params) deriv.push_back(p.map * x);

  const double comp_var = 0.5 * scene.noise_var_sensing;
  const double sd = std::sqrt(comp_var);

  QuantizedFiResult out;
  out.fi_matrix = CMatrix::Zero(np, np);
  out.unquantized_matrix = CMatrix::Zero(np, np);
  CVector d(np);
  for (Eigen::Index n = 0; n < nr; ++n) {
    for (int comp = 0; comp < 2; ++comp) {
      const bool re = comp == 0;
      double power = 0.0;
      for (Eigen::Index t = 0; t < x.cols(); ++t) {
        const double v = re ? mean(n, t).real() : mean(n, t).imag();
        power += v * v;
      }
      power /= static_cast<double>(x.cols());
      const QuantizerSpec& q = spec_for(power + comp_var);
      for (Eigen::Index t = 0; t < x.cols(); ++t) {
        for (Eigen::Index p = 0; p < np; ++p)
          d(p) = component_derivative(params[p].kind, deriv[p](n, t), re);
        const double mu = re ? mean(n, t).real() : mean(n, t).imag();
        const double w = quantized_weight(mu, sd, q, out.floored_cells);
        const CMatrix ddh = d * d.adjoint();
        out.fi_matrix += w * ddh;
        out.unquantized_matrix += ddh / comp_var;
      }
    }
  }
  const double inv_n = 1.0 / static_cast<double>(x.cols());
  out.fi_matrix *= inv_n;
  out.unquantized_matrix *= inv_n;
  out.fi_matrix = 0.5 * (out.fi_matrix + out.fi_matrix.adjoint()).eval();
  out.unquantized_matrix = 0.5 * (out.unquantized_matrix + out.unquantized_matrix.adjoint()).eval();
  out.trace = out.fi_matrix.trace().real();
  out.unquantized_trace = out.unquantized_matrix.trace().real();
  return out;
}

}  // namespace

QuantizedFiResult quantized_fim(const SensingScene& scene,
                                const SensingMatrices& mats,
                                const ChannelSet& channels,
                                const EffectiveReflection& theta,
                                const CMatrix& x_samples, bool include_si,
                                int bits) {
  check_bits(bits);
  QuantizerSpec spec;
  return quantized_fim_impl(scene, mats, channels, theta, x_samples, include_si,
                            [&](double var) -> const QuantizerSpec& {
                              spec = build_midriser(bits, var);
                              return spec;
                            });
}

QuantizedFiResult quantized_fim(const SensingScene& scene,
                                const SensingMatrices& mats,
                                const ChannelSet& channels,
                                const EffectiveReflection& theta,
                                const CMatrix& x_samples, bool include_si,
                                const QuantizerSpec& spec) {
  return quantized_fim_impl(scene, mats, channels, theta, x_samples, include_si,
                            [&](double) -> const QuantizerSpec& { return spec; });
}

QuantStudyTable si_quantization_study(std::span<const QuantStudyDesign> designs,
                                      std::span<const double> noise_grid,
                                      std::span<const int> bits_list,
                                      const std::vector<bool>& si_modes,
                                      int n_samples, int threads) {
  if (designs.empty()) throw EmptyInput("quantization study needs at least one design");
  if (noise_grid.empty()) throw EmptyInput("noise grid is empty");
  if (bits_list.empty()) throw EmptyInput("bits list is empty");
  if (si_modes.empty()) throw EmptyInput("SI mode list is empty");
  for (int b : bits_list) check_bits(b);
  for (double s : noise_grid)
    if (!(s > 0.0)) throw DomainError("noise variances must be positive");

  const std::size_t nd = designs.size(), nn = noise_grid.size();
  const std::size_t nb = bits_list.size(), ns = si_modes.size();
  // traces[((noise * nb + bits) * ns + si) * nd + design]
  std::vector<double> traces(nn * nb * ns * nd, 0.0);
  std::vector<double> reference(nn * nd, 0.0);
  std::vector<int> floored(nn * nd, 0);

  std::vector<CMatrix> batches(nd);
  for (std::size_t k = 0; k < nd; ++k)
    batches[k] = transmit_batch(designs[k].r, n_samples, designs[k].batch_seed);

  parallel_for(static_cast<int>(nn * nd), threads, [&](int job) {
    const std::size_t in = static_cast<std::size_t>(job) / nd;
    const std::size_t k = static_cast<std::size_t>(job) % nd;
    const QuantStudyDesign& des = designs[k];
    SensingScene scene = des.scene;
    scene.noise_var_sensing = noise_grid[in];
    for (std::size_t ib = 0; ib < nb; ++ib) {
      for (std::size_t is = 0; is < ns; ++is) {
        const QuantizedFiResult r = quantized_fim(scene, des.mats, des.channels, des.theta,
                                                  batches[k], si_modes[is], bits_list[ib]);
        traces[((in * nb + ib) * ns + is) * nd + k] = r.trace;
        reference[in * nd + k] = r.unquantized_trace;
        floored[in * nd + k] += r.floored_cells;
      }
    }
  });

  auto stats = [](const double* v, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += v[i];
    m /= static_cast<double>(n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (v[i] - m) * (v[i] - m);
    s = n > 1 ? std::sqrt(s / static_cast<double>(n - 1)) : 0.0;
    return std::pair{m, s};
  };

  QuantStudyTable table;
  for (std::size_t in = 0; in < nn; ++in) {
    for (std::size_t ib = 0; ib < nb; ++ib) {
      for (std::size_t is = 0; is < ns; ++is) {
        const auto [m, s] = stats(&traces[((in * nb + ib) * ns + is) * nd], nd);
        table.rows.push_back({noise_grid[in], bits_list[ib], si_modes[is],
                              static_cast<int>(nd), m, s});
      }
    }
    const auto [m, s] = stats(&reference[in * nd], nd);
    table.unquantized.push_back({noise_grid[in], static_cast<int>(nd), m, s});
  }
  for (int f : floored) table.floored_cells += f;
  return table;
}

}  // namespace risjcas

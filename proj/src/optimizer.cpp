#include "risjcas/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "risjcas/errors.hpp"
#include "risjcas/parallel.hpp"

namespace risjcas {

namespace {

// Reflection-dependent pieces shared by every weight: the sensing sandwich C
// (Tr F = Re Tr(C R)) and the composed user channel h.
struct ThetaTerms {
  CMatrix c;
  CVector h;
  double noise;

  double fi(const CMatrix& r) const { return (c * r).trace().real(); }
  double mi(const CMatrix& r) const {
    const double q = std::max((h.adjoint() * r * h)(0, 0).real(), 0.0);
    return std::log2(1.0 + q / noise);
  }
};

ThetaTerms theta_terms(const Problem& p, const EffectiveReflection& theta) {
  return {sensing_sandwich(p.scene, p.mats, p.channels, theta),
          total_comm_channel(p.channels.h_ru, theta, p.channels.h_br, p.channels.h_bu)
              .adjoint(),
          p.scene.noise_var_comm};
}

struct CovObjective {
  double alpha;
  const ThetaTerms& t;

  double value(const CMatrix& r) const {
    return alpha * t.fi(r) + (1.0 - alpha) * t.mi(r);
  }
  CMatrix gradient(const CMatrix& r) const {
    const double q = std::max((t.h.adjoint() * r * t.h)(0, 0).real(), 0.0);
    const double w = (1.0 - alpha) / (std::log(2.0) * (t.noise + q));
    return alpha * t.c + w * t.h * t.h.adjoint();
  }
};

double real_inner(const CMatrix& a, const CMatrix& b) {
  return (a.adjoint() * b).trace().real();
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::vector<double> default_alpha_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(i / 10.0);
  return g;
}

void OptimizerConfig::validate() const {
  if (alpha_grid.empty()) throw DomainError("alpha grid is empty");
  for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
    if (!(alpha_grid[i] >= 0.0 && alpha_grid[i] <= 1.0))
      throw DomainError("alpha grid value outside [0, 1]");
    if (i > 0 && !(alpha_grid[i] > alpha_grid[i - 1]))
      throw DomainError("alpha grid must be sorted and distinct");
  }
  if (!(step_size > 0.0)) throw DomainError("step size must be positive");
  if (outer_iters < 0 || inner_cov_iters < 0)
    throw DomainError("iteration counts must be non-negative");
  if (!(shrink > 0.0 && shrink < 1.0)) throw DomainError("shrink factor must lie in (0, 1)");
  if (threads < 1) throw DomainError("threads must be >= 1");
  if (restarts < 1) throw DomainError("restarts must be >= 1");
}

PhaseShiftVector project_unit_modulus(const CVector& raw) {
  CVector out(raw.size());
  for (Eigen::Index m = 0; m < raw.size(); ++m) {
    const double mag = std::abs(raw(m));
    out(m) = mag > 0.0 ? raw(m) / mag : cd(1.0, 0.0);
  }
  return PhaseShiftVector(std::move(out), PhaseShiftVector::Unchecked{});
}

TransmitCovariance project_psd_trace(const CMatrix& raw, double p) {
  const Eigen::Index n = raw.rows();
  if (raw.cols() != n) throw ShapeError("covariance must be square");
  if (p <= 0.0) return {CMatrix::Zero(n, n)};
  const CMatrix herm = 0.5 * (raw + raw.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(herm);
  RVector lambda = eig.eigenvalues().cwiseMax(0.0);
  if (lambda.sum() > p) {
    // Simplex threshold: sum_i max(l_i - tau, 0) = p.
    std::vector<double> sorted(lambda.data(), lambda.data() + n);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double tau = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      cumulative += sorted[k];
      const double candidate = (cumulative - p) / static_cast<double>(k + 1);
      if (k + 1 == n || sorted[k + 1] <= candidate) {
        tau = candidate;
        break;
      }
    }
    lambda = (lambda.array() - tau).cwiseMax(0.0);
    // Roundoff in tau can leave the sum slightly above p.
    const double total = lambda.sum();
    if (total > p) lambda *= p / total;
  }
  const CMatrix& u = eig.eigenvectors();
  CMatrix r = u * lambda.cast<cd>().asDiagonal() * u.adjoint();
  return {0.5 * (r + r.adjoint())};
}

namespace {

CovarianceSolution solve_with(double alpha, const Problem& problem, const ThetaTerms& terms,
                              const OptimizerConfig& config,
                              const TransmitCovariance* warm_start) {
  const int nt = problem.channels.nt();
  CovarianceSolution out;
  if (problem.power <= 0.0) {
    out.r.r = CMatrix::Zero(nt, nt);
    out.objective = 0.0;
    out.inner_objectives = {0.0};
    return out;
  }
  const CovObjective f{alpha, terms};

  CMatrix r = (problem.power / nt) * CMatrix::Identity(nt, nt);
  double value = f.value(r);
  if (warm_start != nullptr && warm_start->r.rows() == nt) {
    const CMatrix w = project_psd_trace(warm_start->r, problem.power).r;
    const double wv = f.value(w);
    if (wv > value) {
      r = w;
      value = wv;
    }
  }
  out.inner_objectives.push_back(value);

  CMatrix g = f.gradient(r);
  double step = problem.power / std::max(g.norm(), 1e-300);
  for (int it = 0; it < config.inner_cov_iters; ++it) {
    g = f.gradient(r);
    bool accepted = false;
    double gain = 0.0;
    for (int b = 0; b < config.max_backtracks; ++b) {
      const CMatrix cand = project_psd_trace(r + step * g, problem.power).r;
      const CMatrix delta = cand - r;
      if (delta.norm() <= 1e-15 * std::max(1.0, r.norm())) break;
      const double predicted = std::max(real_inner(g, delta), 0.0);
      const double cv = f.value(cand);
      if (cv >= value + config.armijo * predicted && cv >= value) {
        gain = cv - value;
        r = cand;
        value = cv;
        accepted = true;
        break;
      }
      step *= config.shrink;
    }
    if (!accepted) break;
    out.inner_objectives.push_back(value);
    ++out.iterations;
    // Growth is capped so r + step * g stays within a few orders of P and the
    // projection keeps full precision.
    step = std::min(2.0 * step, 1e3 * problem.power / std::max(g.norm(), 1e-300));
    if (gain <= config.inner_tol * std::max(1.0, std::abs(value))) break;
  }
  out.r.r = r;
  out.objective = value;
  return out;
}

}  // namespace

CovarianceSolution solve_covariance(double alpha, const Problem& problem,
                                    const EffectiveReflection& theta,
                                    const OptimizerConfig& config,
                                    const TransmitCovariance* warm_start) {
  return solve_with(alpha, problem, theta_terms(problem, theta), config, warm_start);
}

CMatrix average_gradient_over_weights(std::span<const CMatrix> gradients) {
  if (gradients.empty()) throw EmptyInput("no gradients to average");
  CMatrix sum = gradients[0];
  for (std::size_t k = 1; k < gradients.size(); ++k) {
    if (gradients[k].rows() != sum.rows() || gradients[k].cols() != sum.cols())
      throw ShapeError("gradient shapes differ");
    sum += gradients[k];
  }
  return sum / static_cast<double>(gradients.size());
}

PhaseShiftVector ascent_step(const PhaseShiftVector& upsilon,
                             const CMatrix& g_avg, double mu) {
  if (g_avg.rows() != upsilon.size() || g_avg.cols() != upsilon.size())
    throw ShapeError("gradient and phase vector sizes differ");
  return project_unit_modulus(upsilon.values() + mu * g_avg.diagonal());
}

namespace {

struct AlphaState {
  TransmitCovariance r;
  double objective = 0.0;
  double inner_drop = 0.0;
};

double worst_drop(const std::vector<double>& v) {
  double worst = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) worst = std::max(worst, v[i - 1] - v[i]);
  return worst;
}

double modulus_error(const PhaseShiftVector& u) {
  return (u.values().cwiseAbs().array() - 1.0).abs().maxCoeff();
}

}  // namespace

OptimizationResult alternating_optimize(const Problem& problem,
                                        const OptimizerConfig& config,
                                        const PhaseShiftVector* start) {
  config.validate();
  const int m = problem.channels.m();
  const int k_count = static_cast<int>(config.alpha_grid.size());
  const auto& alphas = config.alpha_grid;

  OptimizationResult res;
  PhaseShiftVector upsilon =
      start != nullptr ? *start
                       : project_unit_modulus(
                             CVector::Constant(m, std::polar(1.0, config.initial_phase)));
  if (upsilon.size() != m) throw ShapeError("start phases do not match the RIS size");
  EffectiveReflection theta;
  try {
    theta = problem.reflect(upsilon);
  } catch (const SingularReflection& e) {
    throw NumericalAbort(std::string("initial phases are singular: ") + e.what());
  }

  std::vector<AlphaState> state(k_count);
  const auto solve_all = [&](const EffectiveReflection& th, bool warm) {
    const ThetaTerms terms = theta_terms(problem, th);
    parallel_for(k_count, config.threads, [&](int k) {
      const CovarianceSolution sol = solve_with(
          alphas[k], problem, terms, config, warm ? &state[k].r : nullptr);
      state[k].r = sol.r;
      state[k].objective = sol.objective;
      state[k].inner_drop = worst_drop(sol.inner_objectives);
    });
    for (const auto& s : state) {
      res.worst_inner_drop = std::max(res.worst_inner_drop, s.inner_drop);
      res.max_constraint_violation =
          std::max(res.max_constraint_violation, s.r.constraint_violation(problem.power));
    }
  };
  const auto record = [&](int iteration, const EffectiveReflection& th, double step) {
    const ThetaTerms terms = theta_terms(problem, th);
    for (int k = 0; k < k_count; ++k) {
      const double fi = terms.fi(state[k].r.r), mi = terms.mi(state[k].r.r);
      res.trace.push_back(
          {iteration, alphas[k], alphas[k] * fi + (1.0 - alphas[k]) * mi, fi, mi, step});
    }
  };
  const auto averaged = [&](const EffectiveReflection& th) {
    const ThetaTerms terms = theta_terms(problem, th);
    std::vector<double> values(k_count);
    for (int k = 0; k < k_count; ++k)
      values[k] = CovObjective{alphas[k], terms}.value(state[k].r.r);
    return mean(values);
  };

  solve_all(theta, false);
  std::vector<double> objectives(k_count);
  for (int k = 0; k < k_count; ++k) objectives[k] = state[k].objective;
  double current = mean(objectives);
  res.trajectory.push_back(current);
  record(0, theta, 0.0);
  res.max_modulus_error = modulus_error(upsilon);

  int stall = 0;
  // Largest phase move of the first trial; grows after accepted steps.
  double trial_scale = config.step_size;
  for (int it = 1; it <= config.outer_iters; ++it) {
    // The weight average of the per-alpha gradients. FI is linear in R and the
    // chain rule is linear in dTheta, so the sensing part is evaluated once at
    // the weighted covariance and the chain is applied once.
    CMatrix r_fi = CMatrix::Zero(problem.channels.nt(), problem.channels.nt());
    double fi_weight = 0.0;
    CMatrix d_theta = CMatrix::Zero(m, m);
    for (int k = 0; k < k_count; ++k) {
      r_fi += alphas[k] * state[k].r.r;
      fi_weight += alphas[k];
      if (alphas[k] < 1.0)
        d_theta += (1.0 - alphas[k]) * grad_theta_mi(problem.channels, theta, state[k].r,
                                                     problem.scene.noise_var_comm);
    }
    if (fi_weight > 0.0)
      d_theta += grad_theta_fi(problem.scene, problem.mats, problem.channels, theta,
                               TransmitCovariance{r_fi});
    const CMatrix g_avg =
        chain_to_upsilon(d_theta / static_cast<double>(k_count), upsilon, theta);
    const CVector g = g_avg.diagonal();
    const double g_max = g.cwiseAbs().maxCoeff();

    double step = config.backtracking ? trial_scale / std::max(g_max, 1e-300)
                                      : config.step_size;
    bool moved = false;
    int singular = 0;
    PhaseShiftVector accepted_u = upsilon;
    EffectiveReflection accepted_theta = theta;
    double accepted_step = 0.0;
    for (int b = 0; b < config.max_backtracks && g_max > 0.0; ++b) {
      const PhaseShiftVector cand = ascent_step(upsilon, g_avg, step);
      EffectiveReflection cand_theta;
      try {
        cand_theta = problem.reflect(cand);
      } catch (const SingularReflection& e) {
        if (++singular > config.max_singular_halvings)
          throw NumericalAbort("phase candidate stayed singular after " +
                               std::to_string(config.max_singular_halvings) +
                               " step halvings at outer iteration " +
                               std::to_string(it) + ": " + e.what());
        step *= 0.5;
        continue;
      }
      if (!config.backtracking) {
        accepted_u = cand;
        accepted_theta = std::move(cand_theta);
        accepted_step = step;
        moved = true;
        break;
      }
      const double value = averaged(cand_theta);
      const double predicted =
          std::max((g.conjugate().cwiseProduct(cand.values() - upsilon.values())).sum().real(), 0.0);
      if (value >= current + config.armijo * predicted && value >= current) {
        accepted_u = cand;
        accepted_theta = std::move(cand_theta);
        accepted_step = step;
        moved = true;
        break;
      }
      step *= config.shrink;
    }
    if (!moved) ++res.stalled_steps;
    else if (config.backtracking)
      trial_scale = std::min(2.0 * accepted_step * g_max, kPi);
    upsilon = accepted_u;
    theta = std::move(accepted_theta);
    res.max_modulus_error = std::max(res.max_modulus_error, modulus_error(upsilon));

    solve_all(theta, true);
    for (int k = 0; k < k_count; ++k) objectives[k] = state[k].objective;
    const double next = mean(objectives);
    res.worst_outer_drop = std::max(res.worst_outer_drop, current - next);
    const double rel = (next - current) / std::max(std::abs(current), 1e-300);
    current = next;
    res.trajectory.push_back(current);
    record(it, theta, accepted_step);
    res.outer_iterations = it;

    stall = rel < config.objective_tol ? stall + 1 : 0;
    if (stall >= config.stall_iters) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged && config.outer_iters > 0)
    res.diagnostic = "reached outer iteration limit";

  res.upsilon_final = upsilon;
  for (const auto& s : state) res.rx_per_alpha.push_back(s.r);
  res.pareto_points = pareto_sweep(problem, upsilon, res.rx_per_alpha, alphas).points;
  return res;
}

OptimizationResult optimize_multistart(const Problem& problem,
                                       const OptimizerConfig& config) {
  config.validate();
  OptimizationResult best = alternating_optimize(problem, config);
  const int m = problem.channels.m();
  std::mt19937_64 rng(config.restart_seed);
  std::uniform_real_distribution<double> phase(-kPi, kPi);
  for (int k = 1; k < config.restarts; ++k) {
    CVector v(m);
    for (int i = 0; i < m; ++i) v(i) = std::polar(1.0, phase(rng));
    const PhaseShiftVector start = project_unit_modulus(v);
    try {
      problem.reflect(start);
    } catch (const SingularReflection&) {
      continue;
    }
    OptimizationResult run = alternating_optimize(problem, config, &start);
    if (run.trajectory.back() > best.trajectory.back()) best = std::move(run);
  }
  return best;
}

ParetoSweep pareto_sweep(const Problem& problem, const PhaseShiftVector& upsilon,
                         std::span<const TransmitCovariance> rx_per_alpha,
                         std::span<const double> alpha_grid) {
  if (rx_per_alpha.size() != alpha_grid.size())
    throw ShapeError("one covariance per alpha is required");
  const EffectiveReflection theta = problem.reflect(upsilon);
  ParetoSweep out;
  for (std::size_t k = 0; k < alpha_grid.size(); ++k) {
    const Evaluation e = evaluate(alpha_grid[k], problem.scene, problem.mats,
                                  problem.channels, theta, rx_per_alpha[k]);
    out.points.push_back({alpha_grid[k], e.fi.trace, e.mi});
  }
  for (std::size_t k = 1; k < out.points.size(); ++k) {
    const double tol = 1e-9;
    if (out.points[k].fi_trace < out.points[k - 1].fi_trace -
                                     tol * std::max(1.0, std::abs(out.points[k - 1].fi_trace)))
      ++out.fi_order_violations;
    if (out.points[k].mi > out.points[k - 1].mi + tol * std::max(1.0, out.points[k - 1].mi))
      ++out.mi_order_violations;
  }
  return out;
}

DesignEvaluation evaluate_design(const Problem& problem,
                                 const PhaseShiftVector& upsilon,
                                 const OptimizerConfig& config) {
  const EffectiveReflection theta = problem.reflect(upsilon);
  const int k_count = static_cast<int>(config.alpha_grid.size());
  DesignEvaluation out;
  out.rx_per_alpha.resize(k_count);
  std::vector<double> objectives(k_count);
  const ThetaTerms terms = theta_terms(problem, theta);
  parallel_for(k_count, config.threads, [&](int k) {
    const CovarianceSolution sol =
        solve_with(config.alpha_grid[k], problem, terms, config, nullptr);
    out.rx_per_alpha[k] = sol.r;
    objectives[k] = sol.objective;
  });
  out.mean_objective = mean(objectives);
  out.points = pareto_sweep(problem, upsilon, out.rx_per_alpha, config.alpha_grid).points;
  return out;
}

double complexity_estimate(int outer_iters, int n_weights, int nt, int m) {
  const double md = m;
  const double per_weight = static_cast<double>(nt) * nt + 2.0 * md * md * md + md;
  return outer_iters * (n_weights * per_weight + 5.0 * md);
}

}  // namespace risjcas

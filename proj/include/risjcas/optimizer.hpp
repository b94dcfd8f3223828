#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "risjcas/coupling.hpp"
#include "risjcas/metrics.hpp"

namespace risjcas {

// Everything the alternating optimisation needs for one channel realisation.
struct Problem {
  SensingScene scene;
  SensingMatrices mats;
  ChannelSet channels;
  ScatteringMatrix s;
  ReflectionModel model = ReflectionModel::physically_consistent;
  double power = 1.0;

  EffectiveReflection reflect(const PhaseShiftVector& upsilon) const {
    return effective_reflection(upsilon, s, model);
  }
};

std::vector<double> default_alpha_grid();  // 0:0.1:1

struct OptimizerConfig {
  std::vector<double> alpha_grid = default_alpha_grid();
  // Phase step. With backtracking the first trial of the first iteration
  // moves the largest gradient entry by step_size, later first trials by twice
  // the last accepted move (capped at pi); without backtracking the update is
  // u + step_size * grad.
  double step_size = 0.5;
  int outer_iters = 30;
  int inner_cov_iters = 200;
  bool backtracking = true;
  double shrink = 0.5;
  double objective_tol = 1e-6;  // relative outer improvement
  double inner_tol = 1e-12;     // relative covariance improvement
  double constraint_tol = 1e-9;
  int stall_iters = 3;
  int max_backtracks = 40;
  int max_singular_halvings = 10;
  double armijo = 1e-4;
  int threads = 1;
  // Every element starts at exp(j initial_phase). With real symmetric S the
  // default pi/2 keeps |eig(inv(Upsilon) - S)| >= 1, so Theta starts bounded;
  // zero (all ones) sits on a resonance whenever S has an eigenvalue near 1.
  double initial_phase = 0.5 * kPi;
  // optimize_multistart: total number of starts (the constant start plus
  // restarts - 1 uniformly random phase vectors drawn from restart_seed).
  int restarts = 1;
  std::uint64_t restart_seed = 0;

  void validate() const;
};

PhaseShiftVector project_unit_modulus(const CVector& raw);

// Frobenius projection onto {R >= 0, Tr R <= p}.
TransmitCovariance project_psd_trace(const CMatrix& raw, double p);

struct CovarianceSolution {
  TransmitCovariance r;
  double objective = 0.0;
  // Objective after every accepted inner step, starting with the start point.
  std::vector<double> inner_objectives;
  int iterations = 0;
};

// Maximises alpha Tr(F) + (1 - alpha) MI over the PSD trace ball for a fixed
// reflection by projected gradient ascent with Armijo backtracking. Starts
// from the better of (P/Nt) I and `warm_start`.
CovarianceSolution solve_covariance(double alpha, const Problem& problem,
                                    const EffectiveReflection& theta,
                                    const OptimizerConfig& config,
                                    const TransmitCovariance* warm_start = nullptr);

CMatrix average_gradient_over_weights(std::span<const CMatrix> gradients);

// u + mu Diag(G), projected to unit modulus.
PhaseShiftVector ascent_step(const PhaseShiftVector& upsilon,
                             const CMatrix& g_avg, double mu);

struct ParetoPoint {
  double alpha = 0.0;
  double fi_trace = 0.0;
  double mi = 0.0;
};

struct TraceRecord {
  int iteration = 0;
  double alpha = 0.0;
  double objective = 0.0;
  double fi = 0.0;
  double mi = 0.0;
  double step = 0.0;
};

struct OptimizationResult {
  PhaseShiftVector upsilon_final;
  std::vector<TransmitCovariance> rx_per_alpha;
  // Alpha-averaged objective; entry 0 is the initial design.
  std::vector<double> trajectory;
  std::vector<ParetoPoint> pareto_points;
  std::vector<TraceRecord> trace;
  int outer_iterations = 0;
  bool converged = false;
  // Largest decrease seen inside any covariance solve and across outer steps.
  double worst_inner_drop = 0.0;
  double worst_outer_drop = 0.0;
  double max_constraint_violation = 0.0;
  double max_modulus_error = 0.0;
  int stalled_steps = 0;
  std::string diagnostic;
};

// Alternating optimisation: per-alpha covariance solves, weight-averaged
// phase gradient, projected ascent step. Throws NumericalAbort when a phase
// candidate stays singular after max_singular_halvings halvings.
OptimizationResult alternating_optimize(const Problem& problem,
                                        const OptimizerConfig& config,
                                        const PhaseShiftVector* start = nullptr);

// Runs alternating_optimize from every start and keeps the run with the
// largest final alpha-averaged objective. Random starts that are singular for
// the problem's reflection model are skipped.
OptimizationResult optimize_multistart(const Problem& problem,
                                       const OptimizerConfig& config);

struct ParetoSweep {
  std::vector<ParetoPoint> points;
  // Adjacent pairs where FI decreases / MI increases with alpha.
  int fi_order_violations = 0;
  int mi_order_violations = 0;
};

ParetoSweep pareto_sweep(const Problem& problem, const PhaseShiftVector& upsilon,
                         std::span<const TransmitCovariance> rx_per_alpha,
                         std::span<const double> alpha_grid);

struct DesignEvaluation {
  double mean_objective = 0.0;
  std::vector<ParetoPoint> points;
  std::vector<TransmitCovariance> rx_per_alpha;
};

// Re-solves every per-alpha covariance for fixed phases and reports the
// alpha-averaged objective of `problem`.
DesignEvaluation evaluate_design(const Problem& problem,
                                 const PhaseShiftVector& upsilon,
                                 const OptimizerConfig& config);

// Operation count I_max (K (Nt^2 + 2 M^3 + M) + 5 M).
double complexity_estimate(int outer_iters, int n_weights, int nt, int m);

}  // namespace risjcas

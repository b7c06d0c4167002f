#pragma once

#include "lsm/dynamics.hpp"
#include "lsm/manifold.hpp"

#include <functional>
#include <string>
#include <vector>

namespace lsm {

/// Monte Carlo shape of the p-moment mismatch objective
///   F(lambda) = (1/(K M)) sum_j sum_r sum_i |y_ob^{i,j} - y_S^{i,r}(lambda)|^p dt.
struct ObjectiveConfig {
  double p = 1.5;    // moment exponent, must lie in (1, alpha)
  int k_obs = 10;    // observation paths (generate_observations)
  int m_rep = 5;     // reduced realizations per lambda
  int l_grid = 0;    // time samples entering the sum; 0 = the full grid
  bool crn = true;   // reuse realization seeds across lambda
  int retry_cap = 3; // resamples allowed per aborted path

  void validate(double alpha) const;
};

struct NelderMeadConfig {
  int max_iterations = 100;
  double tol_lambda = 1e-4;      // simplex diameter tolerance
  std::vector<double> init;      // initial simplex vertices; empty = defaults inside Lambda
};

/// Everything an estimation run needs besides the model and observations.
struct EstimationContext {
  StableNoiseSpec noise;
  IntegratorConfig dyn;
  QuadratureConfig quad;
  int manifold_order = 1;
  Vec x0;
  Vec y0;
  double cache_quantum = 1e-3;
  ReducedNoiseMode mode = ReducedNoiseMode::StationaryEta;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct ObjectiveValue {
  double f_hat = 0.0;
  double std_error = 0.0;  // replica spread / sqrt(m_rep); 0 when m_rep == 1
  int aborted_paths = 0;
};

struct TraceRow {
  int iteration = 0;
  double lambda = 0.0;
  double f_hat = 0.0;
  double std_error = 0.0;
};

struct BestRecord {
  int iteration = 0;
  double lambda = 0.0;
  double f_hat = 0.0;
};

struct SimplexVertexState {
  double lambda = 0.0;
  double f_hat = 0.0;
  int eval_count = 0;
};

struct SimplexState {
  std::vector<SimplexVertexState> vertices;  // sorted by f_hat ascending
  int iteration = 0;
  std::vector<BestRecord> best_history;
};

struct EstimationReport {
  double lambda_e = 0.0;
  double f_value = 0.0;
  double f_std_error = 0.0;
  int iterations = 0;
  bool converged = false;
  SimplexState simplex;
  std::vector<TraceRow> trace;  // one row per objective evaluation
  std::vector<std::string> warnings;
  int aborted_path_count = 0;
  int projection_count = 0;
  std::uint64_t seed = 0;
  std::vector<SeededStream> observation_streams;
};

/// K_obs full-system paths at lambda0 with the fast components discarded;
/// aborted paths are resampled from the retry stream domain up to
/// cfg.retry_cap each, counted into *aborted_out.
TrajectorySet generate_observations(const ModelSpec& model, double lambda0,
                                    const ObjectiveConfig& cfg, const EstimationContext& ctx,
                                    int* aborted_out = nullptr);

/// Monte Carlo estimate of F(lambda) against the given observations, fanned
/// out over reduced realizations realization_base .. +m_rep-1 from the
/// factory (base 0 with CRN) and reduced by deterministic ordered summation.
ObjectiveValue objective(double lambda, const TrajectorySet& observations, const ModelSpec& model,
                         const ManifoldFactory& factory, const ObjectiveConfig& cfg,
                         const EstimationContext& ctx, std::uint64_t realization_base = 0);

/// F-hat over a lambda grid with shared (CRN) realizations.
std::vector<ObjectiveValue> scan_objective(const std::vector<double>& lambdas,
                                           const TrajectorySet& observations,
                                           const ModelSpec& model, const ObjectiveConfig& cfg,
                                           const EstimationContext& ctx);

/// Stochastic Nelder-Mead on a scalar interval: reflect/expand/contract/
/// shrink on the 2-point simplex, incumbent vertices re-estimated with
/// fresh replicas each time the simplex diameter halves (a no-op under CRN,
/// where repeated evaluation is deterministic), comparisons on pooled
/// means. eval(lambda, fresh) must honor fresh by drawing new replicas when
/// CRN is off.
EstimationReport minimize_scalar(const std::function<ObjectiveValue(double, bool)>& eval,
                                 Interval lambda_range, const NelderMeadConfig& nm, bool crn);

/// Full pipeline: CRN-capable objective wired into the Nelder-Mead search.
EstimationReport estimate(const ModelSpec& model, const TrajectorySet& observations,
                          Interval lambda_range, const ObjectiveConfig& cfg,
                          const NelderMeadConfig& nm, const EstimationContext& ctx);

struct SweepRow {
  double eps = 0.0;
  double median_abs_error = 0.0;
  int repetitions = 0;
};

/// Repeats generate-observations + estimate per eps with matched seeds and
/// reports the median |lambda_E - lambda0| (qualitative reduction-error
/// check; expected non-increasing as eps shrinks).
std::vector<SweepRow> epsilon_sweep_diagnostic(const ModelSpec& model, double lambda0,
                                               const std::vector<double>& eps_list,
                                               const ObjectiveConfig& cfg,
                                               const NelderMeadConfig& nm,
                                               const EstimationContext& ctx, int repetitions = 10);

}  // namespace lsm

#pragma once

#include "lsm/estimator.hpp"
#include "lsm/io.hpp"
#include "lsm/models.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace lsm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSimulation = 3;
inline constexpr int kExitEstimation = 4;
inline constexpr int kExitValidation = 5;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// All knobs of a run, mirroring the config file sections. Precedence is
/// flags > file > defaults.
struct RunConfig {
  std::string model_name = "example";
  std::optional<double> l_f_override;  // validation experiments only

  double alpha = 1.8;
  double sigma = 0.05;

  double eps = 0.01;
  double dt = 1e-3;
  double t_final = 1.0;
  int substep_ratio = 0;
  double state_cap = 1e6;
  std::vector<double> x0{0.0};
  std::vector<double> y0{0.1};

  int manifold_order = 1;
  double t_trunc = 0.0;  // 0 = derived from tol
  double quad_dt = 1e-2;
  double quad_tol = 1e-6;
  double cache_quantum = 1e-3;
  std::string reduced_noise = "eta";  // "frozen_xi" | "shifted_xi" | "eta"

  double p = 1.5;
  int k_obs = 10;
  int m_rep = 5;
  int l_grid = 0;
  bool crn = true;
  int retry_cap = 3;

  double lambda_min = 0.2;
  double lambda_max = 3.0;
  std::vector<double> simplex_init;  // empty = defaults inside Lambda
  int max_iterations = 100;
  double tol_lambda = 1e-4;

  double lambda0 = 1.0;
  std::string observations;  // directory of trajectory CSVs; empty = synthetic

  std::int64_t validate_samples = 1000000;
  int hypothesis_samples = 2000;
  int zeta_points = 21;
  double hill_fraction = 0.002;

  double zeta_min = -3.141592653589793;
  double zeta_max = 3.141592653589793;
  double track_threshold = 0.1;  // mean |y_full - y_reduced| per unit time

  std::uint64_t seed = 42;
  std::string out_dir = "out";
  int threads = 0;  // 0 = hardware concurrency

  static RunConfig defaults() { return RunConfig{}; }

  const ModelSpec& model() const;
  ModelSpec model_with_overrides() const;
  StableNoiseSpec noise_spec() const;
  IntegratorConfig integrator_config() const;
  QuadratureConfig quadrature_config() const;
  ObjectiveConfig objective_config() const;
  NelderMeadConfig nelder_mead_config() const;
  EstimationContext estimation_context() const;
  Interval lambda_interval() const { return Interval{lambda_min, lambda_max}; }
  ReducedNoiseMode reduced_mode() const;
  int effective_threads() const;

  /// Cross-checks every nested-module invariant; throws ConfigError naming
  /// the offending field.
  void validate() const;

  /// Canonical parameter snapshot (estimation-relevant fields only, not
  /// data provenance) and its hash, stamped into every output.
  nlohmann::json snapshot() const;
  std::uint64_t config_hash() const;
};

/// Parses the TOML-subset config text ([section], key = value, # comments)
/// and applies it over the defaults; errors carry "section.key (line N)".
RunConfig load_config(const std::string& text);
RunConfig load_config_file(const std::filesystem::path& file);

int cmd_simulate(const RunConfig& config);
int cmd_reduce(const RunConfig& config);
int cmd_estimate(const RunConfig& config);
int cmd_validate(const RunConfig& config);

/// estimate as a library call: synthetic or file-loaded observations per
/// the config; also used by the determinism tests.
EstimationReport run_estimation(const RunConfig& config, nlohmann::json* report_json);

}  // namespace lsm

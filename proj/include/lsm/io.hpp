#pragma once

#include "lsm/estimator.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace lsm {

/// Metadata embedded as the leading `# key=value ...` comment line of every
/// CSV (before the mandatory header row) and as fields of JSON outputs.
struct OutputMeta {
  std::uint64_t config_hash = 0;
  SeededStream stream;
  double lambda = 0.0;
};

/// FNV-1a over a canonical string; used to stamp outputs with the config.
std::uint64_t fnv1a64(const std::string& text);

/// Doubles formatted with max_digits10 so CSV round-trips are exact.
std::string format_double(double v);

void write_trajectory_csv(const std::filesystem::path& file, const TrajectorySet& set,
                          int path_index, const OutputMeta& meta);

/// Reads one trajectory CSV back into a single-path set; the metadata line
/// restores the stream and lambda, so re-ingestion is loss-free.
TrajectorySet read_trajectory_csv(const std::filesystem::path& file);

/// Merges single-path sets sharing a grid into one observation set.
TrajectorySet merge_observations(const std::vector<TrajectorySet>& sets);

void write_cross_section_csv(const std::filesystem::path& file,
                             const Eigen::VectorXd& zeta_grid, const Eigen::MatrixXd& h0,
                             const Eigen::MatrixXd& h1, const Eigen::MatrixXd& h_tilde,
                             const OutputMeta& meta);

void write_comparison_csv(const std::filesystem::path& file, const Eigen::VectorXd& t_grid,
                          const Eigen::MatrixXd& y_full, const Eigen::MatrixXd& y_reduced,
                          const OutputMeta& meta);

void write_trace_csv(const std::filesystem::path& file, const EstimationReport& report,
                     const OutputMeta& meta);

/// Report JSON with stable field names: lambda_e, f_value, iterations,
/// seeds, config, warnings (plus diagnostics).
nlohmann::json report_to_json(const EstimationReport& report, const nlohmann::json& config_snapshot,
                              std::uint64_t config_hash);

void write_text_file(const std::filesystem::path& file, const std::string& text);

}  // namespace lsm

#include "lsm/io.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lsm {

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::string meta_line(const OutputMeta& meta) {
  std::ostringstream os;
  os << "# config_hash=" << std::hex << meta.config_hash << std::dec
     << " seed=" << meta.stream.seed << " stream=" << meta.stream.stream_id
     << " lambda=" << format_double(meta.lambda) << "\n";
  return os.str();
}

OutputMeta parse_meta_line(const std::string& line) {
  OutputMeta meta;
  std::istringstream is(line);
  std::string token;
  is >> token;  // '#'
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "config_hash")
      meta.config_hash = std::stoull(value, nullptr, 16);
    else if (key == "seed")
      meta.stream.seed = std::stoull(value);
    else if (key == "stream")
      meta.stream.stream_id = std::stoull(value);
    else if (key == "lambda")
      meta.lambda = std::stod(value);
  }
  return meta;
}

void write_matrix_csv(const std::filesystem::path& file, const std::string& header,
                      const Eigen::MatrixXd& table, const OutputMeta& meta) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + file.string());
  out << meta_line(meta) << header << "\n";
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.cols(); ++c) {
      if (c) out << ",";
      out << format_double(table(r, c));
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void write_trajectory_csv(const std::filesystem::path& file, const TrajectorySet& set,
                          int path_index, const OutputMeta& meta) {
  const auto& p = set.paths.at(path_index);
  std::string header = "t";
  for (Eigen::Index i = 0; i < p.x.rows(); ++i) header += ",x" + std::to_string(i + 1);
  for (Eigen::Index i = 0; i < p.y.rows(); ++i) header += ",y" + std::to_string(i + 1);
  OutputMeta m = meta;
  m.stream = p.stream;
  m.lambda = set.lambda_used;
  write_matrix_csv(file, header, trajectory_table(set, path_index), m);
}

TrajectorySet read_trajectory_csv(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + file.string());
  std::string line;
  OutputMeta meta;
  bool have_header = false;
  int n = 0, m = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      meta = parse_meta_line(line);
      continue;
    }
    if (!have_header) {
      for (const auto& col : split_csv(line)) {
        if (col.size() > 1 && col[0] == 'x') ++n;
        if (col.size() > 1 && col[0] == 'y') ++m;
      }
      if (m == 0) throw std::runtime_error(file.string() + ": header lacks y columns");
      have_header = true;
      continue;
    }
    const auto cells = split_csv(line);
    if (static_cast<int>(cells.size()) != 1 + n + m)
      throw std::runtime_error(file.string() + ": row width does not match header");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& cell : cells) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(file.string() + ": no data rows");

  TrajectorySet set;
  set.lambda_used = meta.lambda;
  const auto L = static_cast<Eigen::Index>(rows.size());
  set.t_grid.resize(L);
  auto& p = set.paths.emplace_back();
  p.stream = meta.stream;
  p.x.resize(n, n > 0 ? L : 0);
  p.y.resize(m, L);
  for (Eigen::Index i = 0; i < L; ++i) {
    set.t_grid[i] = rows[i][0];
    for (int c = 0; c < n; ++c) p.x(c, i) = rows[i][1 + c];
    for (int c = 0; c < m; ++c) p.y(c, i) = rows[i][1 + n + c];
  }
  return set;
}

TrajectorySet merge_observations(const std::vector<TrajectorySet>& sets) {
  if (sets.empty()) throw std::invalid_argument("merge_observations: no sets");
  TrajectorySet merged;
  merged.t_grid = sets[0].t_grid;
  merged.lambda_used = sets[0].lambda_used;
  for (const auto& s : sets) {
    if (s.t_grid.size() != merged.t_grid.size() ||
        (s.t_grid - merged.t_grid).cwiseAbs().maxCoeff() > 1e-12)
      throw std::invalid_argument("merge_observations: grids differ");
    for (const auto& p : s.paths) merged.paths.push_back(p);
  }
  return merged;
}

void write_cross_section_csv(const std::filesystem::path& file, const Eigen::VectorXd& zeta_grid,
                             const Eigen::MatrixXd& h0, const Eigen::MatrixXd& h1,
                             const Eigen::MatrixXd& h_tilde, const OutputMeta& meta) {
  const auto n = h0.rows();
  std::string header = "zeta";
  for (auto tag : {"h0", "h1", "h_tilde"})
    for (Eigen::Index i = 0; i < n; ++i)
      header += "," + std::string(tag) + (n > 1 ? "_" + std::to_string(i + 1) : "");
  Eigen::MatrixXd table(zeta_grid.size(), 1 + 3 * n);
  table.col(0) = zeta_grid;
  table.middleCols(1, n) = h0.transpose();
  table.middleCols(1 + n, n) = h1.transpose();
  table.middleCols(1 + 2 * n, n) = h_tilde.transpose();
  write_matrix_csv(file, header, table, meta);
}

void write_comparison_csv(const std::filesystem::path& file, const Eigen::VectorXd& t_grid,
                          const Eigen::MatrixXd& y_full, const Eigen::MatrixXd& y_reduced,
                          const OutputMeta& meta) {
  const auto m = y_full.rows();
  std::string header = "t";
  for (Eigen::Index i = 0; i < m; ++i)
    header += ",y_full" + std::string(m > 1 ? "_" + std::to_string(i + 1) : "");
  for (Eigen::Index i = 0; i < m; ++i)
    header += ",y_reduced" + std::string(m > 1 ? "_" + std::to_string(i + 1) : "");
  header += ",abs_diff";
  Eigen::MatrixXd table(t_grid.size(), 1 + 2 * m + 1);
  table.col(0) = t_grid;
  table.middleCols(1, m) = y_full.transpose();
  table.middleCols(1 + m, m) = y_reduced.transpose();
  table.col(1 + 2 * m) = (y_full - y_reduced).colwise().norm().transpose();
  write_matrix_csv(file, header, table, meta);
}

void write_trace_csv(const std::filesystem::path& file, const EstimationReport& report,
                     const OutputMeta& meta) {
  Eigen::MatrixXd table(static_cast<Eigen::Index>(report.trace.size()), 4);
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    const auto& row = report.trace[static_cast<std::size_t>(i)];
    table(i, 0) = row.iteration;
    table(i, 1) = row.lambda;
    table(i, 2) = row.f_hat;
    table(i, 3) = row.std_error;
  }
  write_matrix_csv(file, "iteration,lambda,f_hat,stderr", table, meta);
}

nlohmann::json report_to_json(const EstimationReport& report, const nlohmann::json& config_snapshot,
                              std::uint64_t config_hash) {
  nlohmann::json j;
  j["lambda_e"] = report.lambda_e;
  j["f_value"] = report.f_value;
  j["f_stderr"] = report.f_std_error;
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;
  j["config"] = config_snapshot;
  j["config_hash"] = config_hash;
  j["warnings"] = report.warnings;
  j["aborted_paths"] = report.aborted_path_count;
  j["projections"] = report.projection_count;
  nlohmann::json seeds;
  seeds["base"] = report.seed;
  nlohmann::json obs = nlohmann::json::array();
  for (const auto& s : report.observation_streams)
    obs.push_back({{"seed", s.seed}, {"stream", s.stream_id}});
  seeds["observations"] = obs;
  j["seeds"] = seeds;
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& b : report.simplex.best_history)
    hist.push_back({{"iteration", b.iteration}, {"lambda", b.lambda}, {"f_hat", b.f_hat}});
  j["best_history"] = hist;
  nlohmann::json verts = nlohmann::json::array();
  for (const auto& v : report.simplex.vertices)
    verts.push_back({{"lambda", v.lambda}, {"f_hat", v.f_hat}, {"evals", v.eval_count}});
  j["simplex"] = verts;
  return j;
}

void write_text_file(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + file.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

}  // namespace lsm

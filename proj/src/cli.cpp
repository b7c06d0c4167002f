#include "lsm/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <thread>

namespace lsm {

namespace {

struct Entry {
  std::string raw;
  int line = 0;
  bool used = false;
};

struct Parsed {
  std::map<std::string, Entry> entries;

  bool has(const std::string& key) const { return entries.count(key) > 0; }
  Entry& at(const std::string& key) { return entries.find(key)->second; }
};

[[noreturn]] void fail(const std::string& field, int line, const std::string& what) {
  std::ostringstream os;
  os << field;
  if (line > 0) os << " (line " << line << ")";
  os << ": " << what;
  throw ConfigError(os.str());
}

bool parse_number(const std::string& raw, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(raw, &used);
    return used == raw.size();
  } catch (...) {
    return false;
  }
}

Parsed parse_toml_subset(const std::string& text) {
  Parsed parsed;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    // strip comments outside quotes
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        fail("config", line_no, "malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) fail("config", line_no, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(section.empty() ? "config" : section, line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      fail(section.empty() ? "config" : section, line_no, "expected 'key = value'");
    const std::string path = section.empty() ? key : section + "." + key;
    if (parsed.entries.count(path))
      fail(path, line_no, "duplicate key");
    parsed.entries[path] = Entry{value, line_no, false};
  }
  return parsed;
}

class Reader {
 public:
  explicit Reader(Parsed& parsed) : parsed_(parsed) {}

  bool has(const std::string& key) const { return parsed_.has(key); }

  double number(const std::string& key, double fallback) {
    if (!parsed_.has(key)) return fallback;
    Entry& e = parsed_.at(key);
    e.used = true;
    double v = 0.0;
    if (!parse_number(e.raw, v)) fail(key, e.line, "expected a number, got '" + e.raw + "'");
    return v;
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    if (!parsed_.has(key)) return fallback;
    Entry& e = parsed_.at(key);
    const double v = number(key, 0.0);
    if (std::abs(v - std::llround(v)) > 1e-9) fail(key, e.line, "expected an integer");
    return std::llround(v);
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!parsed_.has(key)) return fallback;
    Entry& e = parsed_.at(key);
    e.used = true;
    if (e.raw == "true") return true;
    if (e.raw == "false") return false;
    fail(key, e.line, "expected true or false");
  }

  std::string text(const std::string& key, std::string fallback) {
    if (!parsed_.has(key)) return fallback;
    Entry& e = parsed_.at(key);
    e.used = true;
    std::string raw = e.raw;
    if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"')
      return raw.substr(1, raw.size() - 2);
    fail(key, e.line, "expected a quoted string");
  }

  std::vector<double> array(const std::string& key, std::vector<double> fallback) {
    if (!parsed_.has(key)) return fallback;
    Entry& e = parsed_.at(key);
    e.used = true;
    std::string raw = e.raw;
    if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']')
      fail(key, e.line, "expected an array like [1.0, 2.0]");
    raw = raw.substr(1, raw.size() - 2);
    std::vector<double> out;
    std::string cell;
    std::istringstream cells(raw);
    while (std::getline(cells, cell, ',')) {
      const auto a = cell.find_first_not_of(" \t");
      const auto b = cell.find_last_not_of(" \t");
      if (a == std::string::npos) fail(key, e.line, "empty array element");
      double v = 0.0;
      if (!parse_number(cell.substr(a, b - a + 1), v))
        fail(key, e.line, "array element is not a number");
      out.push_back(v);
    }
    if (out.empty()) fail(key, e.line, "empty array");
    return out;
  }

  void require(const std::string& key) {
    if (!parsed_.has(key)) throw ConfigError("missing required field " + key);
  }

  void check_unused() const {
    for (const auto& [key, entry] : parsed_.entries)
      if (!entry.used) fail(key, entry.line, "unknown field");
  }

 private:
  Parsed& parsed_;
};

int entry_line(const Parsed& parsed, const std::string& key) {
  auto it = parsed.entries.find(key);
  return it == parsed.entries.end() ? 0 : it->second.line;
}

}  // namespace

const ModelSpec& RunConfig::model() const { return ModelRegistry::builtin().find(model_name).spec; }

ModelSpec RunConfig::model_with_overrides() const {
  ModelSpec spec = model();
  if (l_f_override) spec.L_f = *l_f_override;
  return spec;
}

StableNoiseSpec RunConfig::noise_spec() const {
  return StableNoiseSpec{alpha, sigma, model().fast_dim()};
}

IntegratorConfig RunConfig::integrator_config() const {
  return IntegratorConfig{dt, t_final, eps, substep_ratio, state_cap};
}

QuadratureConfig RunConfig::quadrature_config() const {
  return QuadratureConfig{t_trunc, quad_dt, quad_tol};
}

ObjectiveConfig RunConfig::objective_config() const {
  return ObjectiveConfig{p, k_obs, m_rep, l_grid, crn, retry_cap};
}

NelderMeadConfig RunConfig::nelder_mead_config() const {
  return NelderMeadConfig{max_iterations, tol_lambda, simplex_init};
}

ReducedNoiseMode RunConfig::reduced_mode() const {
  if (reduced_noise == "frozen_xi") return ReducedNoiseMode::FrozenXi;
  if (reduced_noise == "shifted_xi") return ReducedNoiseMode::ShiftedXi;
  if (reduced_noise == "eta") return ReducedNoiseMode::StationaryEta;
  throw ConfigError("manifold.reduced_noise: expected frozen_xi, shifted_xi or eta");
}

int RunConfig::effective_threads() const {
  if (threads > 0) return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

EstimationContext RunConfig::estimation_context() const {
  EstimationContext ctx;
  ctx.noise = noise_spec();
  ctx.dyn = integrator_config();
  ctx.quad = quadrature_config();
  ctx.manifold_order = manifold_order;
  ctx.x0 = Eigen::Map<const Eigen::VectorXd>(x0.data(), static_cast<Eigen::Index>(x0.size()));
  ctx.y0 = Eigen::Map<const Eigen::VectorXd>(y0.data(), static_cast<Eigen::Index>(y0.size()));
  ctx.cache_quantum = cache_quantum;
  ctx.mode = reduced_mode();
  ctx.seed = seed;
  ctx.threads = effective_threads();
  return ctx;
}

void RunConfig::validate() const {
  if (!ModelRegistry::builtin().contains(model_name))
    throw ConfigError("model.name: unknown model '" + model_name + "'");
  const ModelSpec& spec = model();
  if (!(alpha > 1.0 && alpha < 2.0)) throw ConfigError("noise.alpha: must lie in the open interval (1,2)");
  if (!(sigma >= 0.0)) throw ConfigError("noise.sigma: must be >= 0");
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("dynamics.eps: must lie in (0,1)");
  try {
    integrator_config().validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("dynamics: ") + e.what());
  }
  try {
    quadrature_config().validate(dt, spec.gamma);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("manifold: ") + e.what());
  }
  if (manifold_order != 0 && manifold_order != 1) throw ConfigError("manifold.order: must be 0 or 1");
  if (!(cache_quantum > 0.0)) throw ConfigError("manifold.cache_quantum: must be > 0");
  reduced_mode();
  try {
    objective_config().validate(alpha);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("objective: ") + e.what());
  }
  if (!(lambda_min < lambda_max)) throw ConfigError("optimizer.lambda_min/lambda_max: empty interval");
  if (!spec.lambda_range.contains(lambda_min) || !spec.lambda_range.contains(lambda_max))
    throw ConfigError("optimizer: search interval leaves the model's Lambda");
  for (double v : simplex_init)
    if (!(v >= lambda_min && v <= lambda_max))
      throw ConfigError("optimizer.init: vertex outside the search interval");
  if (!simplex_init.empty() && simplex_init.size() != 2)
    throw ConfigError("optimizer.init: scalar simplex needs exactly 2 vertices");
  if (max_iterations < 0) throw ConfigError("optimizer.max_iterations: must be >= 0");
  if (!(tol_lambda > 0.0)) throw ConfigError("optimizer.tol_lambda: must be > 0");
  if (static_cast<int>(x0.size()) != spec.fast_dim())
    throw ConfigError("dynamics.x0: dimension does not match the model's fast block");
  if (static_cast<int>(y0.size()) != spec.slow_dim())
    throw ConfigError("dynamics.y0: dimension does not match the model's slow block");
  if (observations.empty() && !Interval{lambda_min, lambda_max}.contains(lambda0))
    throw ConfigError("estimate.lambda0: outside the search interval");
  if (validate_samples < 1000) throw ConfigError("validate.sample_count: must be >= 1000");
  if (hypothesis_samples < 10) throw ConfigError("validate.hypothesis_samples: must be >= 10");
  if (zeta_points < 2) throw ConfigError("validate.zeta_points: must be >= 2");
  if (!(hill_fraction > 0.0 && hill_fraction <= 0.05))
    throw ConfigError("validate.hill_fraction: must lie in (0, 0.05]");
  if (!(zeta_min < zeta_max)) throw ConfigError("reduce.zeta_min/zeta_max: empty grid");
  if (!(track_threshold > 0.0)) throw ConfigError("reduce.track_threshold: must be > 0");
}

RunConfig load_config(const std::string& text) {
  Parsed parsed = parse_toml_subset(text);
  Reader r(parsed);
  RunConfig c = RunConfig::defaults();

  for (const char* key : {"model.name", "noise.alpha", "noise.sigma", "dynamics.eps"})
    r.require(key);

  c.model_name = r.text("model.name", c.model_name);
  if (r.has("model.l_f_override")) c.l_f_override = r.number("model.l_f_override", 0.0);

  c.alpha = r.number("noise.alpha", c.alpha);
  if (!(c.alpha > 1.0 && c.alpha < 2.0))
    fail("noise.alpha", entry_line(parsed, "noise.alpha"), "must lie in the open interval (1,2)");
  c.sigma = r.number("noise.sigma", c.sigma);
  if (!(c.sigma >= 0.0)) fail("noise.sigma", entry_line(parsed, "noise.sigma"), "must be >= 0");

  c.eps = r.number("dynamics.eps", c.eps);
  if (!(c.eps > 0.0 && c.eps < 1.0))
    fail("dynamics.eps", entry_line(parsed, "dynamics.eps"), "must lie in (0,1)");
  c.dt = r.number("dynamics.dt", c.dt);
  c.t_final = r.number("dynamics.t_final", c.t_final);
  c.substep_ratio = static_cast<int>(r.integer("dynamics.substep_ratio", c.substep_ratio));
  c.state_cap = r.number("dynamics.state_cap", c.state_cap);
  c.x0 = r.array("dynamics.x0", c.x0);
  c.y0 = r.array("dynamics.y0", c.y0);

  c.manifold_order = static_cast<int>(r.integer("manifold.order", c.manifold_order));
  c.t_trunc = r.number("manifold.t_trunc", c.t_trunc);
  c.quad_dt = r.number("manifold.quad_dt", c.quad_dt);
  c.quad_tol = r.number("manifold.tol", c.quad_tol);
  c.cache_quantum = r.number("manifold.cache_quantum", c.cache_quantum);
  c.reduced_noise = r.text("manifold.reduced_noise", c.reduced_noise);

  c.p = r.number("objective.p", c.p);
  c.k_obs = static_cast<int>(r.integer("objective.k_obs", c.k_obs));
  c.m_rep = static_cast<int>(r.integer("objective.m_rep", c.m_rep));
  c.l_grid = static_cast<int>(r.integer("objective.l_grid", c.l_grid));
  c.crn = r.boolean("objective.crn", c.crn);
  c.retry_cap = static_cast<int>(r.integer("objective.retry_cap", c.retry_cap));

  c.lambda_min = r.number("optimizer.lambda_min", c.lambda_min);
  c.lambda_max = r.number("optimizer.lambda_max", c.lambda_max);
  c.simplex_init = r.array("optimizer.init", c.simplex_init);
  c.max_iterations = static_cast<int>(r.integer("optimizer.max_iterations", c.max_iterations));
  c.tol_lambda = r.number("optimizer.tol_lambda", c.tol_lambda);

  c.lambda0 = r.number("estimate.lambda0", c.lambda0);
  c.observations = r.text("estimate.observations", c.observations);

  c.validate_samples = r.integer("validate.sample_count", c.validate_samples);
  c.hypothesis_samples = static_cast<int>(r.integer("validate.hypothesis_samples", c.hypothesis_samples));
  c.zeta_points = static_cast<int>(r.integer("validate.zeta_points", c.zeta_points));
  c.hill_fraction = r.number("validate.hill_fraction", c.hill_fraction);

  c.zeta_min = r.number("reduce.zeta_min", c.zeta_min);
  c.zeta_max = r.number("reduce.zeta_max", c.zeta_max);
  c.track_threshold = r.number("reduce.track_threshold", c.track_threshold);

  c.seed = static_cast<std::uint64_t>(r.integer("seeds.base", static_cast<std::int64_t>(c.seed)));
  c.out_dir = r.text("output.dir", c.out_dir);

  r.check_unused();

  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return c;
}

RunConfig load_config_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + file.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_config(buffer.str());
}

nlohmann::json RunConfig::snapshot() const {
  nlohmann::json j;
  j["model"] = model_name;
  j["noise"] = {{"alpha", alpha}, {"sigma", sigma}};
  j["dynamics"] = {{"eps", eps},
                   {"dt", dt},
                   {"t_final", t_final},
                   {"substep_ratio", integrator_config().effective_substeps()},
                   {"state_cap", state_cap},
                   {"x0", x0},
                   {"y0", y0}};
  j["manifold"] = {{"order", manifold_order},
                   {"t_trunc", quadrature_config().resolved_t_trunc(model().gamma)},
                   {"quad_dt", quad_dt},
                   {"tol", quad_tol},
                   {"cache_quantum", cache_quantum},
                   {"reduced_noise", reduced_noise}};
  j["objective"] = {{"p", p},         {"k_obs", k_obs}, {"m_rep", m_rep},
                    {"l_grid", l_grid}, {"crn", crn},     {"retry_cap", retry_cap}};
  j["optimizer"] = {{"lambda_min", lambda_min},
                    {"lambda_max", lambda_max},
                    {"init", simplex_init},
                    {"max_iterations", max_iterations},
                    {"tol_lambda", tol_lambda}};
  j["lambda0"] = lambda0;
  j["seed"] = seed;
  return j;
}

std::uint64_t RunConfig::config_hash() const { return fnv1a64(snapshot().dump()); }

namespace {

namespace fs = std::filesystem;

fs::path prepare_out_dir(const RunConfig& config) {
  fs::path dir(config.out_dir);
  fs::create_directories(dir);
  return dir;
}

int guarded(const std::function<void()>& body, int failure_code) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return failure_code;
  }
}

}  // namespace

int cmd_simulate(const RunConfig& config) {
  return guarded(
      [&] {
        config.validate();
        const ModelSpec& model = config.model();
        const EstimationContext ctx = config.estimation_context();
        const fs::path dir = prepare_out_dir(config);
        const std::uint64_t hash = config.config_hash();

        nlohmann::json manifest;
        manifest["config"] = config.snapshot();
        manifest["config_hash"] = hash;
        nlohmann::json files = nlohmann::json::array();
        int aborted_total = 0;
        for (int j = 0; j < config.k_obs; ++j) {
          SeededStream stream = substream(config.seed, stream_domain::kObservation, j);
          TrajectorySet set;
          int aborts = 0;
          for (int attempt = 0;; ++attempt) {
            try {
              set = integrate_full(model, config.lambda0, ctx.x0, ctx.y0, ctx.dyn, ctx.noise,
                                   stream);
              break;
            } catch (const PathAbort&) {
              if (attempt >= config.retry_cap) throw;
              ++aborts;
              stream = substream(config.seed, stream_domain::kRetry,
                                 static_cast<std::uint64_t>(j) * (config.retry_cap + 1) + attempt);
            }
          }
          aborted_total += aborts;
          char name[32];
          std::snprintf(name, sizeof(name), "path_%03d.csv", j);
          const fs::path file = dir / name;
          write_trajectory_csv(file, set, 0, OutputMeta{hash, stream, config.lambda0});
          files.push_back({{"file", name},
                           {"seed", stream.seed},
                           {"stream", stream.stream_id},
                           {"aborted_resamples", aborts}});
        }
        manifest["paths"] = files;
        manifest["aborted_paths"] = aborted_total;
        write_text_file(dir / "simulate_manifest.json", manifest.dump(2) + "\n");
      },
      kExitSimulation);
}

int cmd_reduce(const RunConfig& config) {
  return guarded(
      [&] {
        config.validate();
        const ModelSpec& model = config.model();
        const EstimationContext ctx = config.estimation_context();
        const fs::path dir = prepare_out_dir(config);
        const std::uint64_t hash = config.config_hash();

        ManifoldFactory factory(model, ctx.noise, ctx.quad, ctx.dyn, ctx.manifold_order,
                                ctx.cache_quantum, ctx.seed);
        auto manifold = factory.manifold(0, config.lambda0);

        // cross-section over the requested zeta grid, one realization
        const int points = config.zeta_points;
        Eigen::VectorXd zeta_grid = Eigen::VectorXd::LinSpaced(points, config.zeta_min, config.zeta_max);
        const int n = model.fast_dim();
        Eigen::MatrixXd h0s(n, points), h1s(n, points), hts(n, points);
        for (int i = 0; i < points; ++i) {
          Vec zeta(1);
          zeta[0] = zeta_grid[i];
          h0s.col(i) = manifold->h0(zeta);
          h1s.col(i) = manifold->h1(zeta);
          hts.col(i) = manifold->h_tilde(zeta);
        }
        write_cross_section_csv(dir / "manifold_cross_section.csv", zeta_grid, h0s, h1s, hts,
                                OutputMeta{hash, manifold->stream(), config.lambda0});

        // full-vs-reduced comparison at lambda0
        const SeededStream obs_stream = substream(config.seed, stream_domain::kObservation, 0);
        TrajectorySet full = integrate_full(model, config.lambda0, ctx.x0, ctx.y0, ctx.dyn,
                                            ctx.noise, obs_stream);
        TrajectorySet reduced = integrate_reduced(model, config.lambda0, ctx.y0, ctx.dyn,
                                                  *manifold, factory.xi_at_zero(0), ctx.mode);
        write_comparison_csv(dir / "reduced_comparison.csv", full.t_grid, full.paths[0].y,
                             reduced.paths[0].y, OutputMeta{hash, obs_stream, config.lambda0});

        const double tracking =
            (full.paths[0].y - reduced.paths[0].y).colwise().norm().sum() * config.dt /
            config.t_final;
        nlohmann::json summary;
        summary["config"] = config.snapshot();
        summary["config_hash"] = hash;
        summary["tracking_error"] = tracking;
        summary["track_threshold"] = config.track_threshold;
        summary["within_threshold"] = tracking <= config.track_threshold;
        write_text_file(dir / "reduce_summary.json", summary.dump(2) + "\n");
      },
      kExitSimulation);
}

EstimationReport run_estimation(const RunConfig& config, nlohmann::json* report_json) {
  config.validate();
  const ModelSpec& model = config.model();
  const EstimationContext ctx = config.estimation_context();
  const ObjectiveConfig obj = config.objective_config();

  TrajectorySet observations;
  double lambda0 = config.lambda0;
  int aborted_obs = 0;
  if (config.observations.empty()) {
    observations = generate_observations(model, lambda0, obj, ctx, &aborted_obs);
  } else {
    std::vector<TrajectorySet> loaded;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(config.observations))
      if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      TrajectorySet one = read_trajectory_csv(f);
      one.paths[0].x.resize(0, 0);  // estimation sees slow components only
      loaded.push_back(std::move(one));
    }
    if (loaded.empty())
      throw std::runtime_error("no observation CSVs found in " + config.observations);
    observations = merge_observations(loaded);
    lambda0 = observations.lambda_used;
  }

  EstimationReport report =
      estimate(model, observations, config.lambda_interval(), obj, config.nelder_mead_config(), ctx);
  report.aborted_path_count += aborted_obs;

  if (report_json) {
    RunConfig snap_cfg = config;
    snap_cfg.lambda0 = lambda0;
    *report_json = report_to_json(report, snap_cfg.snapshot(), snap_cfg.config_hash());
  }
  return report;
}

int cmd_estimate(const RunConfig& config) {
  return guarded(
      [&] {
        nlohmann::json report_json;
        EstimationReport report = run_estimation(config, &report_json);
        const fs::path dir = prepare_out_dir(config);
        write_text_file(dir / "estimation_report.json", report_json.dump(2) + "\n");
        const auto hash = report_json["config_hash"].get<std::uint64_t>();
        write_trace_csv(dir / "objective_trace.csv", report,
                        OutputMeta{hash, SeededStream{config.seed, 0}, report.lambda_e});
        std::cout << "lambda_e = " << format_double(report.lambda_e)
                  << "  F = " << format_double(report.f_value) << "  iterations = "
                  << report.iterations << "\n";
      },
      kExitEstimation);
}

int cmd_validate(const RunConfig& config) {
  int exit_code = kExitOk;
  const int guard = guarded(
      [&] {
        config.validate();
        const ModelSpec model = config.model_with_overrides();
        const fs::path dir = prepare_out_dir(config);
        nlohmann::json out;
        out["config"] = config.snapshot();
        out["config_hash"] = config.config_hash();
        bool all_pass = true;

        // sampler statistics
        {
          StableNoiseSpec spec{config.alpha, config.sigma, 1};
          const SeededStream stream = substream(config.seed, stream_domain::kValidation, 0);
          Eigen::MatrixXd samples = sample_stable(spec, stream, config.validate_samples);
          const Eigen::ArrayXd x = samples.row(0).transpose().array();
          nlohmann::json ecf = nlohmann::json::array();
          bool ecf_ok = true;
          for (double u : {0.5, 1.0, 2.0}) {
            const double emp = (u == 0.0) ? 1.0 : (x * u).cos().mean();
            const double target = std::exp(-std::pow(std::abs(u), config.alpha));
            const bool ok = std::abs(emp - target) < 0.02;
            ecf_ok = ecf_ok && ok;
            ecf.push_back({{"u", u}, {"empirical", emp}, {"target", target}, {"pass", ok}});
          }
          // Hill tail index on the upper order statistics
          std::vector<double> absx(x.size());
          for (Eigen::Index i = 0; i < x.size(); ++i) absx[i] = std::abs(x[i]);
          std::sort(absx.begin(), absx.end(), std::greater<double>());
          const auto k = static_cast<std::size_t>(absx.size() * config.hill_fraction);
          double log_sum = 0.0;
          for (std::size_t i = 0; i < k; ++i) log_sum += std::log(absx[i]);
          const double hill = 1.0 / (log_sum / k - std::log(absx[k]));
          const bool hill_ok = std::abs(hill - config.alpha) <= 0.15;
          // symmetry via median of block means
          const int blocks = 100;
          const Eigen::Index block_len = x.size() / blocks;
          std::vector<double> means(blocks);
          for (int b = 0; b < blocks; ++b)
            means[b] = x.segment(b * block_len, block_len).mean();
          std::sort(means.begin(), means.end());
          const double median = means[blocks / 2];
          std::vector<double> dev(blocks);
          for (int b = 0; b < blocks; ++b) dev[b] = std::abs(means[b] - median);
          std::sort(dev.begin(), dev.end());
          const double mad = dev[blocks / 2];
          const double se = 1.4826 * mad / std::sqrt(static_cast<double>(blocks));
          const bool sym_ok = std::abs(median) <= 3.0 * se;
          out["sampler"] = {{"ecf", ecf},
                            {"hill", {{"estimate", hill}, {"fraction", config.hill_fraction}, {"pass", hill_ok}}},
                            {"symmetry", {{"median_of_means", median}, {"se", se}, {"pass", sym_ok}}}};
          all_pass = all_pass && ecf_ok && hill_ok && sym_ok;
        }

        // hypothesis checks
        {
          const HypothesisReport rep = check_hypotheses(
              model, config.hypothesis_samples, substream(config.seed, stream_domain::kValidation, 1));
          nlohmann::json checks = nlohmann::json::array();
          for (const auto& c : rep.checks)
            checks.push_back({{"name", c.name}, {"pass", c.pass}, {"witness", c.witness}});
          const double dc = derivative_consistency(
              model, 100, substream(config.seed, stream_domain::kValidation, 2));
          const bool dc_ok = dc < 1e-6;
          out["hypotheses"] = {{"checks", checks}, {"all_pass", rep.all_pass},
                               {"derivative_consistency", {{"max_error", dc}, {"pass", dc_ok}}}};
          all_pass = all_pass && rep.all_pass && dc_ok;
        }

        // manifold analytic agreement (worked example) + truncation check
        {
          const EstimationContext ctx = config.estimation_context();
          QuadratureConfig fine = ctx.quad;
          fine.dt = std::min(fine.dt, ctx.dyn.dt);
          const double horizon = fine.resolved_t_trunc(model.gamma);
          StableNoiseSpec noise = ctx.noise;
          StationaryPath xi = simulate_stationary(
              model.A, noise, uniform_grid(-2.0 * horizon, 0.0, ctx.dyn.dt),
              default_burn_in(model.gamma, fine.tol), ctx.dyn.dt,
              substream(config.seed, stream_domain::kValidation, 3));
          nlohmann::json manifold_j;
          bool manifold_ok = true;
          if (config.model_name == "example") {
            double worst = 0.0;
            for (int i = 0; i < config.zeta_points; ++i) {
              const double z = -std::numbers::pi +
                               2.0 * std::numbers::pi * i / (config.zeta_points - 1);
              Vec zeta(1);
              zeta[0] = z;
              const double value = h0(zeta, xi, model, fine, config.sigma)[0];
              worst = std::max(worst, std::abs(value - 0.25 * std::cos(z)));
            }
            const bool ok = worst < 1e-6;
            manifold_j["analytic_h0"] = {{"max_error", worst}, {"pass", ok}};
            manifold_ok = manifold_ok && ok;
          }
          Vec zeta(1);
          zeta[0] = 1.0;
          const TruncationCheck trunc =
              check_truncation(zeta, xi, model, config.lambda0, fine, config.sigma);
          manifold_j["truncation"] = {{"dh0", trunc.dh0}, {"dh1", trunc.dh1}, {"pass", trunc.converged}};
          manifold_ok = manifold_ok && trunc.converged;
          out["manifold"] = manifold_j;
          all_pass = all_pass && manifold_ok;
        }

        out["pass"] = all_pass;
        write_text_file(dir / "validation.json", out.dump(2) + "\n");
        std::cout << (all_pass ? "validation passed" : "validation FAILED") << "\n";
        if (!all_pass) exit_code = kExitValidation;
      },
      kExitValidation);
  return guard != kExitOk ? guard : exit_code;
}

}  // namespace lsm

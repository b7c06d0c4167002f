#include "lsm/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>

namespace lsm {

void ObjectiveConfig::validate(double alpha) const {
  if (!(p > 1.0 && p < alpha))
    throw std::invalid_argument("ObjectiveConfig: p must lie in (1, alpha)");
  if (k_obs < 1 || m_rep < 1) throw std::invalid_argument("ObjectiveConfig: k_obs, m_rep >= 1");
  if (l_grid != 0 && l_grid < 2) throw std::invalid_argument("ObjectiveConfig: l_grid must be >= 2");
  if (retry_cap < 0) throw std::invalid_argument("ObjectiveConfig: retry_cap must be >= 0");
}

namespace {

int subsample_stride(int full_len, int l_grid) {
  if (l_grid == 0) return 1;
  if (l_grid < 2 || l_grid > full_len || (full_len - 1) % (l_grid - 1) != 0)
    throw std::invalid_argument("ObjectiveConfig: l_grid must evenly divide the trajectory grid");
  return (full_len - 1) / (l_grid - 1);
}

// sum_j sum_i |y_ob^{i,j} - y_red^i|^p dt over the subsampled grid, in
// fixed order so the reduction is bit-stable.
double mismatch_sum(const TrajectorySet& obs, const Eigen::MatrixXd& reduced, int stride,
                    double p, double dt_sum) {
  double total = 0.0;
  const auto L = reduced.cols();
  for (const auto& path : obs.paths) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < L; i += stride)
      acc += std::pow((path.y.col(i) - reduced.col(i)).norm(), p);
    total += acc * dt_sum;
  }
  return total;
}

std::uint64_t lambda_bits(double lambda) {
  std::uint64_t bits;
  std::memcpy(&bits, &lambda, sizeof(bits));
  return bits;
}

}  // namespace

TrajectorySet generate_observations(const ModelSpec& model, double lambda0,
                                    const ObjectiveConfig& cfg, const EstimationContext& ctx,
                                    int* aborted_out) {
  cfg.validate(ctx.noise.alpha);
  if (!model.lambda_range.contains(lambda0))
    throw std::invalid_argument("generate_observations: lambda0 outside Lambda");

  TrajectorySet set;
  set.t_grid = ctx.dyn.grid();
  set.lambda_used = lambda0;
  set.paths.resize(cfg.k_obs);
  std::vector<int> aborts(cfg.k_obs, 0);

  parallel_for_indexed(cfg.k_obs, ctx.threads, [&](int j) {
    SeededStream stream = substream(ctx.seed, stream_domain::kObservation, j);
    for (int attempt = 0;; ++attempt) {
      try {
        TrajectorySet one =
            integrate_full(model, lambda0, ctx.x0, ctx.y0, ctx.dyn, ctx.noise, stream);
        auto& p = one.paths[0];
        p.x.resize(0, 0);  // observations keep the slow component only
        set.paths[j] = std::move(p);
        return;
      } catch (const PathAbort&) {
        if (attempt >= cfg.retry_cap) throw;
        ++aborts[j];
        stream = substream(ctx.seed, stream_domain::kRetry,
                           static_cast<std::uint64_t>(j) * (cfg.retry_cap + 1) + attempt);
      }
    }
  });
  if (aborted_out) {
    *aborted_out = 0;
    for (int a : aborts) *aborted_out += a;
  }
  return set;
}

ObjectiveValue objective(double lambda, const TrajectorySet& observations, const ModelSpec& model,
                         const ManifoldFactory& factory, const ObjectiveConfig& cfg,
                         const EstimationContext& ctx, std::uint64_t realization_base) {
  cfg.validate(ctx.noise.alpha);
  if (observations.paths.empty()) throw std::invalid_argument("objective: no observation paths");
  const int L = ctx.dyn.grid_size();
  if (observations.t_grid.size() != L ||
      std::abs(observations.t_grid[L - 1] - ctx.dyn.t_final) > 1e-9)
    throw std::invalid_argument("objective: observation grid does not match the integrator grid");
  for (const auto& p : observations.paths)
    if (p.has_fast()) throw std::invalid_argument("objective: observations must be slow-only");

  const int stride = subsample_stride(L, cfg.l_grid);
  const double dt_sum = ctx.dyn.dt * stride;
  const Vec y0 = observations.paths[0].y.col(0);
  const int k = static_cast<int>(observations.paths.size());

  std::vector<double> f_rep(cfg.m_rep, 0.0);
  std::vector<int> aborts(cfg.m_rep, 0);
  parallel_for_indexed(cfg.m_rep, ctx.threads, [&](int r) {
    std::uint64_t index = realization_base + static_cast<std::uint64_t>(r);
    for (int attempt = 0;; ++attempt) {
      try {
        auto manifold = factory.manifold(index, lambda);
        TrajectorySet reduced = integrate_reduced(model, lambda, y0, ctx.dyn, *manifold,
                                                  factory.xi_at_zero(index), ctx.mode);
        f_rep[r] =
            mismatch_sum(observations, reduced.paths[0].y, stride, cfg.p, dt_sum) / k;
        return;
      } catch (const PathAbort&) {
        if (attempt >= cfg.retry_cap) throw;
        ++aborts[r];
        // deterministic retry indices disjoint from the CRN block
        index = (1ull << 40) + (realization_base + r) * (cfg.retry_cap + 1) + attempt;
      }
    }
  });

  ObjectiveValue out;
  for (int r = 0; r < cfg.m_rep; ++r) {
    out.f_hat += f_rep[r];
    out.aborted_paths += aborts[r];
  }
  out.f_hat /= cfg.m_rep;
  if (cfg.m_rep > 1) {
    double ss = 0.0;
    for (int r = 0; r < cfg.m_rep; ++r) ss += (f_rep[r] - out.f_hat) * (f_rep[r] - out.f_hat);
    out.std_error = std::sqrt(ss / (cfg.m_rep - 1)) / std::sqrt(static_cast<double>(cfg.m_rep));
  }
  return out;
}

std::vector<ObjectiveValue> scan_objective(const std::vector<double>& lambdas,
                                           const TrajectorySet& observations,
                                           const ModelSpec& model, const ObjectiveConfig& cfg,
                                           const EstimationContext& ctx) {
  ManifoldFactory factory(model, ctx.noise, ctx.quad, ctx.dyn, ctx.manifold_order,
                          ctx.cache_quantum, ctx.seed);
  std::vector<ObjectiveValue> out;
  out.reserve(lambdas.size());
  std::uint64_t fresh_base = 0;
  for (double lambda : lambdas) {
    out.push_back(objective(lambda, observations, model, factory, cfg, ctx,
                            cfg.crn ? 0 : fresh_base));
    if (!cfg.crn) fresh_base += cfg.m_rep;
  }
  return out;
}

EstimationReport minimize_scalar(const std::function<ObjectiveValue(double, bool)>& eval,
                                 Interval lambda_range, const NelderMeadConfig& nm, bool crn) {
  if (!lambda_range.valid() || lambda_range.width() <= 0.0)
    throw std::invalid_argument("minimize_scalar: empty Lambda");
  if (nm.max_iterations < 0) throw std::invalid_argument("minimize_scalar: negative iteration cap");

  struct Vertex {
    double lambda = 0.0;
    double sum = 0.0;
    int count = 0;
    double se = 0.0;
    double mean() const { return sum / count; }
  };

  EstimationReport report;
  int iteration = 0;
  auto evaluate = [&](double lambda, bool fresh) {
    ObjectiveValue v = eval(lambda, fresh);
    report.trace.push_back({iteration, lambda, v.f_hat, v.std_error});
    report.aborted_path_count += v.aborted_paths;
    return v;
  };
  auto project = [&](double lambda) {
    const double c = lambda_range.clamp(lambda);
    if (c != lambda) ++report.projection_count;
    return c;
  };
  auto make_vertex = [&](double lambda, bool fresh) {
    Vertex v;
    v.lambda = lambda;
    const ObjectiveValue val = evaluate(lambda, fresh);
    v.sum = val.f_hat;
    v.count = 1;
    v.se = val.std_error;
    return v;
  };

  std::vector<double> init = nm.init;
  if (init.empty())
    init = {lambda_range.lo + 0.3 * lambda_range.width(),
            lambda_range.lo + 0.7 * lambda_range.width()};
  if (init.size() != 2) throw std::invalid_argument("minimize_scalar: scalar simplex needs 2 vertices");
  for (double v : init)
    if (!lambda_range.contains(v))
      throw std::invalid_argument("minimize_scalar: initial simplex outside Lambda");
  if (init[0] == init[1]) throw std::invalid_argument("minimize_scalar: degenerate initial simplex");

  Vertex best = make_vertex(init[0], false);
  Vertex worst = make_vertex(init[1], false);
  auto order = [&] {
    if (worst.mean() < best.mean()) std::swap(best, worst);
  };
  order();
  report.simplex.best_history.push_back({0, best.lambda, best.mean()});

  double resample_diameter = std::abs(best.lambda - worst.lambda);
  bool converged = false;
  bool collapsed = false;
  while (iteration < nm.max_iterations) {
    const double diameter = std::abs(best.lambda - worst.lambda);
    if (diameter < nm.tol_lambda) {
      converged = true;
      break;
    }
    if (diameter == 0.0) {
      collapsed = true;
      break;
    }
    ++iteration;
    // Incumbents are re-estimated with fresh replicas whenever the simplex
    // diameter has halved; under CRN repeated evaluation returns the same
    // value, so the pooled record stays exact and the step is skipped.
    if (!crn && diameter <= 0.5 * resample_diameter) {
      for (Vertex* v : {&best, &worst}) {
        const ObjectiveValue val = evaluate(v->lambda, true);
        v->sum += val.f_hat;
        v->count += 1;
      }
      order();
      resample_diameter = diameter;
    }

    const double centroid = best.lambda;
    const double reflected = project(centroid + (centroid - worst.lambda));
    Vertex vr = make_vertex(reflected, !crn);
    if (vr.mean() < best.mean()) {
      const double expanded = project(centroid + 2.0 * (centroid - worst.lambda));
      if (expanded != reflected) {
        Vertex ve = make_vertex(expanded, !crn);
        worst = ve.mean() < vr.mean() ? ve : vr;
      } else {
        worst = vr;
      }
    } else if (vr.mean() < worst.mean()) {
      const double out_c = project(centroid + 0.5 * (centroid - worst.lambda));
      Vertex vc = make_vertex(out_c, !crn);
      worst = vc.mean() <= vr.mean() ? vc : vr;
    } else {
      const double in_c = 0.5 * (centroid + worst.lambda);
      Vertex vc = make_vertex(in_c, !crn);
      if (vc.mean() < worst.mean()) {
        worst = vc;
      } else {
        worst = make_vertex(best.lambda + 0.5 * (worst.lambda - best.lambda), !crn);
      }
    }
    order();
    report.simplex.best_history.push_back({iteration, best.lambda, best.mean()});
  }

  report.lambda_e = best.lambda;
  report.f_value = best.mean();
  report.f_std_error = best.se;
  report.iterations = iteration;
  report.converged = converged;
  report.simplex.iteration = iteration;
  report.simplex.vertices = {{best.lambda, best.mean(), best.count},
                             {worst.lambda, worst.mean(), worst.count}};
  if (!converged && !collapsed)
    report.warnings.push_back("iteration cap reached before the simplex diameter tolerance");
  if (collapsed)
    report.warnings.push_back("simplex collapsed to a point before the diameter tolerance");
  if (report.projection_count > 0)
    report.warnings.push_back("simplex vertices were projected onto the Lambda boundary");
  return report;
}

EstimationReport estimate(const ModelSpec& model, const TrajectorySet& observations,
                          Interval lambda_range, const ObjectiveConfig& cfg,
                          const NelderMeadConfig& nm, const EstimationContext& ctx) {
  cfg.validate(ctx.noise.alpha);
  ManifoldFactory factory(model, ctx.noise, ctx.quad, ctx.dyn, ctx.manifold_order,
                          ctx.cache_quantum, ctx.seed);

  std::map<std::uint64_t, ObjectiveValue> memo;
  std::uint64_t fresh_base = 0;
  auto eval = [&](double lambda, bool fresh) {
    if (cfg.crn) {
      const std::uint64_t bits = lambda_bits(lambda);
      auto it = memo.find(bits);
      if (it != memo.end()) return it->second;
      ObjectiveValue v = objective(lambda, observations, model, factory, cfg, ctx, 0);
      memo.emplace(bits, v);
      return v;
    }
    (void)fresh;  // every non-CRN evaluation draws fresh realizations
    ObjectiveValue v = objective(lambda, observations, model, factory, cfg, ctx, fresh_base);
    fresh_base += cfg.m_rep;
    return v;
  };

  EstimationReport report = minimize_scalar(eval, lambda_range, nm, cfg.crn);
  report.seed = ctx.seed;
  for (const auto& p : observations.paths) report.observation_streams.push_back(p.stream);
  return report;
}

std::vector<SweepRow> epsilon_sweep_diagnostic(const ModelSpec& model, double lambda0,
                                               const std::vector<double>& eps_list,
                                               const ObjectiveConfig& cfg,
                                               const NelderMeadConfig& nm,
                                               const EstimationContext& ctx, int repetitions) {
  if (eps_list.empty()) throw std::invalid_argument("epsilon_sweep: empty eps list");
  for (std::size_t i = 1; i < eps_list.size(); ++i)
    if (eps_list[i] >= eps_list[i - 1])
      throw std::invalid_argument("epsilon_sweep: eps list must be sorted descending");
  if (repetitions < 1) throw std::invalid_argument("epsilon_sweep: repetitions must be >= 1");

  std::vector<SweepRow> rows;
  for (double eps : eps_list) {
    std::vector<double> errors;
    for (int rep = 0; rep < repetitions; ++rep) {
      EstimationContext c = ctx;
      c.dyn.eps = eps;
      c.seed = ctx.seed + static_cast<std::uint64_t>(rep);  // matched across eps
      TrajectorySet obs = generate_observations(model, lambda0, cfg, c);
      EstimationReport report = estimate(model, obs, model.lambda_range, cfg, nm, c);
      errors.push_back(std::abs(report.lambda_e - lambda0));
    }
    std::sort(errors.begin(), errors.end());
    const std::size_t mid = errors.size() / 2;
    const double median = errors.size() % 2 ? errors[mid] : 0.5 * (errors[mid - 1] + errors[mid]);
    rows.push_back({eps, median, repetitions});
  }
  return rows;
}

}  // namespace lsm

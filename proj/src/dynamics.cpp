#include "lsm/dynamics.hpp"

#include "lsm/manifold.hpp"

#include <cmath>

namespace lsm {

void ModelSpec::validate() const {
  if (A.rows() == 0 || A.rows() != A.cols()) throw std::invalid_argument(name + ": A must be square");
  if (B.rows() == 0 || B.rows() != B.cols()) throw std::invalid_argument(name + ": B must be square");
  if (!f || !g) throw std::invalid_argument(name + ": f and g are required");
  if (!(gamma > K * L_f))
    throw std::invalid_argument(name + ": hypothesis (H2) gamma > K*L_f fails on declared constants");
  if (!lambda_range.valid() || lambda_range.width() <= 0.0)
    throw std::invalid_argument(name + ": Lambda must be a nonempty bounded interval");
  if (!spectrum_stable(A))
    throw std::invalid_argument(name + ": A must have a stable spectrum for (H1)");
}

int IntegratorConfig::effective_substeps() const {
  if (substep_ratio > 0) return substep_ratio;
  return std::max(1, static_cast<int>(std::ceil(10.0 * dt / eps - 1e-12)));
}

int IntegratorConfig::grid_size() const {
  return static_cast<int>(std::llround(t_final / dt)) + 1;
}

void IntegratorConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("IntegratorConfig: dt must be > 0");
  if (!(t_final > 0.0)) throw std::invalid_argument("IntegratorConfig: t_final must be > 0");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("IntegratorConfig: eps must lie in (0,1)");
  if (!(state_cap > 0.0)) throw std::invalid_argument("IntegratorConfig: state_cap must be > 0");
  if (dt_fast() > eps / 10.0 + 1e-15)
    throw std::invalid_argument("IntegratorConfig: dt_fast exceeds eps/10 (stiffness guard)");
  const double steps = t_final / dt;
  if (std::abs(steps - std::llround(steps)) > 1e-9)
    throw std::invalid_argument("IntegratorConfig: t_final must be a multiple of dt");
}

namespace {

void check_finite(const Vec& x, const Vec& y, double cap, double t) {
  const double mx = x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
  const double my = y.cwiseAbs().maxCoeff();
  if (!std::isfinite(mx) || !std::isfinite(my) || mx > cap || my > cap)
    throw PathAbort(t, "state exceeded cap or turned non-finite at t=" + std::to_string(t));
}

}  // namespace

TrajectorySet integrate_full(const ModelSpec& model, double lambda, const Vec& x0, const Vec& y0,
                             const IntegratorConfig& cfg, const StableNoiseSpec& noise,
                             const SeededStream& stream) {
  model.validate();
  cfg.validate();
  noise.validate();
  if (noise.dim != model.fast_dim())
    throw std::invalid_argument("integrate_full: noise dim must match the fast dimension");
  if (x0.size() != model.fast_dim() || y0.size() != model.slow_dim())
    throw std::invalid_argument("integrate_full: bad initial-value dimensions");
  if (!model.lambda_range.contains(lambda))
    throw std::invalid_argument("integrate_full: lambda outside Lambda");

  const int L = cfg.grid_size();
  const int sub = cfg.effective_substeps();
  const double dt = cfg.dt;
  const double dtf = cfg.dt_fast();
  const double noise_factor =
      noise.sigma * std::pow(cfg.eps, -1.0 / noise.alpha) * std::pow(dtf, 1.0 / noise.alpha);

  TrajectorySet set;
  set.t_grid = cfg.grid();
  set.lambda_used = lambda;
  auto& path = set.paths.emplace_back();
  path.stream = stream;
  path.x.resize(model.fast_dim(), L);
  path.y.resize(model.slow_dim(), L);

  auto rng = make_rng(stream);
  Vec x = x0;
  Vec y = y0;
  path.x.col(0) = x;
  path.y.col(0) = y;
  for (int i = 1; i < L; ++i) {
    // Slow update from the left point; y is held across the substeps below.
    const Vec y_next = y + dt * (Vec(model.B * y) + model.g(x, y, lambda));
    for (int s = 0; s < sub; ++s) {
      Vec noise_inc(model.fast_dim());
      for (int c = 0; c < model.fast_dim(); ++c)
        noise_inc[c] = noise_factor * sample_standard_stable(noise.alpha, rng);
      x += (dtf / cfg.eps) * (Vec(model.A * x) + model.f(x, y)) + noise_inc;
    }
    y = y_next;
    check_finite(x, y, cfg.state_cap, set.t_grid[i]);
    path.x.col(i) = x;
    path.y.col(i) = y;
  }
  return set;
}

TrajectorySet integrate_reduced(const ModelSpec& model, double lambda, const Vec& y0,
                                const IntegratorConfig& cfg, const ManifoldApprox& manifold,
                                const Vec& xi0, ReducedNoiseMode mode) {
  model.validate();
  cfg.validate();
  if (y0.size() != model.slow_dim())
    throw std::invalid_argument("integrate_reduced: bad initial-value dimension");
  if (std::abs(manifold.eps() - cfg.eps) > 1e-12)
    throw std::invalid_argument("integrate_reduced: manifold eps differs from integrator eps");
  if (std::abs(manifold.path_dt() - cfg.dt) > 1e-12)
    throw std::invalid_argument("integrate_reduced: manifold path step differs from integrator dt");
  const int L = cfg.grid_size();
  if (manifold.max_shift() < L - 1)
    throw std::invalid_argument("integrate_reduced: realization does not cover the horizon");
  if (mode == ReducedNoiseMode::StationaryEta && !manifold.has_eta())
    throw std::invalid_argument("integrate_reduced: realization carries no eta path");

  const double sigma = manifold.sigma();
  TrajectorySet set;
  set.t_grid = cfg.grid();
  set.lambda_used = lambda;
  auto& path = set.paths.emplace_back();
  path.stream = manifold.stream();
  path.y.resize(model.slow_dim(), L);

  Vec y = y0;
  path.y.col(0) = y;
  for (int i = 1; i < L; ++i) {
    const int shift = i - 1;
    const Vec h = manifold.h_tilde(y, shift);
    Vec fast_term;
    switch (mode) {
      case ReducedNoiseMode::FrozenXi: fast_term = xi0; break;
      case ReducedNoiseMode::ShiftedXi: fast_term = manifold.xi_at_shift(shift); break;
      case ReducedNoiseMode::StationaryEta: fast_term = manifold.eta_at_shift(shift); break;
    }
    y += cfg.dt * (Vec(model.B * y) + model.g(h + sigma * fast_term, y, lambda));
    check_finite(Vec(), y, cfg.state_cap, set.t_grid[i]);
    path.y.col(i) = y;
  }
  return set;
}

Vec apply_transformation(const Vec& x, const Vec& eta_value, double sigma) {
  return x - sigma * eta_value;
}

Vec invert_transformation(const Vec& x_hat, const Vec& eta_value, double sigma) {
  return x_hat + sigma * eta_value;
}

Eigen::MatrixXd trajectory_table(const TrajectorySet& set, int path_index) {
  const auto& p = set.paths.at(path_index);
  const auto L = set.t_grid.size();
  const auto n = p.x.rows();
  const auto m = p.y.rows();
  Eigen::MatrixXd table(L, 1 + n + m);
  table.col(0) = set.t_grid;
  if (n > 0) table.middleCols(1, n) = p.x.transpose();
  table.middleCols(1 + n, m) = p.y.transpose();
  return table;
}

}  // namespace lsm

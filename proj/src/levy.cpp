#include "lsm/levy.hpp"

#include <cmath>
#include <numbers>

namespace lsm {

void StableNoiseSpec::validate() const {
  if (!(alpha > 1.0 && alpha < 2.0))
    throw std::invalid_argument("StableNoiseSpec: alpha must lie in the open interval (1,2)");
  if (!(sigma >= 0.0)) throw std::invalid_argument("StableNoiseSpec: sigma must be >= 0");
  if (dim < 1) throw std::invalid_argument("StableNoiseSpec: dim must be positive");
}

int StationaryPath::index_of(double t) const {
  if (dt <= 0.0 || t_grid.size() == 0)
    throw std::logic_error("StationaryPath: empty path");
  const double pos = (t - t_grid[0]) / dt;
  const auto idx = static_cast<Eigen::Index>(std::llround(pos));
  if (idx < 0 || idx >= t_grid.size() || std::abs(pos - static_cast<double>(idx)) > 1e-6)
    throw std::invalid_argument("StationaryPath: time off the stored grid");
  return static_cast<int>(idx);
}

double sample_standard_stable(double alpha, std::mt19937_64& rng) {
  // CMS for the symmetric case with characteristic function exp(-|u|^alpha).
  const double u = (uniform_open(rng) - 0.5) * std::numbers::pi;
  const double w = -std::log(uniform_open(rng));
  const double au = alpha * u;
  return std::sin(au) / std::pow(std::cos(u), 1.0 / alpha) *
         std::pow(std::cos(u - au) / w, (1.0 - alpha) / alpha);
}

Eigen::MatrixXd sample_stable(const StableNoiseSpec& spec, const SeededStream& stream,
                              std::int64_t count) {
  spec.validate();
  if (count <= 0) throw std::invalid_argument("sample_stable: count must be positive");
  auto rng = make_rng(stream);
  Eigen::MatrixXd out(spec.dim, count);
  for (std::int64_t j = 0; j < count; ++j)
    for (int i = 0; i < spec.dim; ++i) out(i, j) = sample_standard_stable(spec.alpha, rng);
  return out;
}

StableIncrementSampler::StableIncrementSampler(const StableNoiseSpec& spec,
                                               const SeededStream& stream)
    : spec_(spec), rng_(make_rng(stream)) {
  spec_.validate();
}

Vec StableIncrementSampler::next(double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("increment: dt must be positive");
  const double scale = std::pow(dt, 1.0 / spec_.alpha);
  Vec v(spec_.dim);
  for (int i = 0; i < spec_.dim; ++i) v[i] = scale * sample_standard_stable(spec_.alpha, rng_);
  return v;
}

Vec increment(const StableNoiseSpec& spec, double dt, const SeededStream& stream) {
  StableIncrementSampler sampler(spec, stream);
  return sampler.next(dt);
}

Eigen::VectorXd uniform_grid(double t0, double t1, double dt) {
  if (!(dt > 0.0) || t1 < t0) throw std::invalid_argument("uniform_grid: bad range or step");
  const auto n = static_cast<Eigen::Index>(std::llround((t1 - t0) / dt));
  if (std::abs(t0 + static_cast<double>(n) * dt - t1) > 1e-9 * std::max(1.0, std::abs(t1)))
    throw std::invalid_argument("uniform_grid: span is not a multiple of dt");
  Eigen::VectorXd g(n + 1);
  for (Eigen::Index i = 0; i <= n; ++i) g[i] = t0 + static_cast<double>(i) * dt;
  return g;
}

double default_burn_in(double gamma, double tol) {
  if (!(gamma > 0.0) || !(tol > 0.0) || tol >= 1.0)
    throw std::invalid_argument("default_burn_in: need gamma > 0 and tol in (0,1)");
  return std::log(1.0 / tol) / gamma;
}

StationaryPath simulate_stationary(const Mat& a, const StableNoiseSpec& spec,
                                   const Eigen::VectorXd& t_grid, double burn_in, double dt,
                                   const SeededStream& stream, double increment_scale) {
  spec.validate();
  if (a.rows() != spec.dim || a.cols() != spec.dim)
    throw std::invalid_argument("simulate_stationary: A must be dim x dim");
  if (!spectrum_stable(a))
    throw std::invalid_argument("simulate_stationary: A must have a stable spectrum");
  if (!(burn_in > 0.0)) throw std::invalid_argument("simulate_stationary: burn_in must be > 0");
  if (!(dt > 0.0)) throw std::invalid_argument("simulate_stationary: dt must be > 0");
  if (t_grid.size() == 0) throw std::invalid_argument("simulate_stationary: empty grid");

  StationaryPath path;
  path.t_grid = t_grid;
  path.burn_in = burn_in;
  path.dt = dt;
  path.values.resize(spec.dim, t_grid.size());

  StableIncrementSampler sampler(spec, stream);
  const auto burn_steps = static_cast<std::int64_t>(std::llround(burn_in / dt));
  Vec z = Vec::Zero(spec.dim);
  for (std::int64_t i = 0; i < burn_steps; ++i)
    z += dt * (a * z) + increment_scale * sampler.next(dt);
  path.values.col(0) = z;
  for (Eigen::Index j = 1; j < t_grid.size(); ++j) {
    const auto steps =
        static_cast<std::int64_t>(std::llround((t_grid[j] - t_grid[j - 1]) / dt));
    if (steps < 1 ||
        std::abs(t_grid[j] - t_grid[j - 1] - static_cast<double>(steps) * dt) > 1e-9)
      throw std::invalid_argument("simulate_stationary: grid must be dt-aligned and increasing");
    for (std::int64_t s = 0; s < steps; ++s)
      z += dt * (a * z) + increment_scale * sampler.next(dt);
    path.values.col(j) = z;
  }
  return path;
}

NoiseRealization simulate_driving(const Mat& a, const StableNoiseSpec& spec, double eps,
                                  double t_hist, double t_forward, double dt, int substeps,
                                  double burn_in, const SeededStream& stream, int id) {
  spec.validate();
  if (!(eps > 0.0)) throw std::invalid_argument("simulate_driving: eps must be > 0");
  if (substeps < 1) throw std::invalid_argument("simulate_driving: substeps must be >= 1");
  if (!(t_hist >= 0.0 && t_forward >= 0.0))
    throw std::invalid_argument("simulate_driving: horizons must be >= 0");
  if (!spectrum_stable(a))
    throw std::invalid_argument("simulate_driving: A must have a stable spectrum");

  const double dtf = dt / substeps;
  if (dtf > 0.5 * eps)
    throw std::invalid_argument("simulate_driving: dt/substeps must be <= eps/2 (fast EM stability)");
  const double eta_scale = std::pow(eps, -1.0 / spec.alpha);
  const Mat a_fast = a / eps;

  NoiseRealization real;
  real.stream = stream;
  real.id = id;
  real.xi.t_grid = uniform_grid(-t_hist, t_forward, dt);
  real.xi.burn_in = burn_in;
  real.xi.dt = dt;
  real.xi.values.resize(spec.dim, real.xi.t_grid.size());
  const int eta_len = static_cast<int>(std::llround(t_forward / dt)) + 1;
  real.eta.t_grid = uniform_grid(0.0, t_forward, dt);
  real.eta.burn_in = burn_in;
  real.eta.dt = dt;
  real.eta.values.resize(spec.dim, eta_len);

  StableIncrementSampler sampler(spec, stream);
  Vec zx = Vec::Zero(spec.dim);
  Vec ze = Vec::Zero(spec.dim);
  const auto burn_steps = static_cast<std::int64_t>(std::llround(burn_in / dtf));
  for (std::int64_t i = 0; i < burn_steps; ++i) {
    const Vec dl = sampler.next(dtf);
    zx += dtf * (a * zx) + dl;
    ze += dtf * (a_fast * ze) + eta_scale * dl;
  }
  const int i0 = static_cast<int>(std::llround(t_hist / dt));
  real.xi.values.col(0) = zx;
  if (i0 == 0) real.eta.values.col(0) = ze;
  for (int j = 1; j < real.xi.size(); ++j) {
    for (int s = 0; s < substeps; ++s) {
      const Vec dl = sampler.next(dtf);
      zx += dtf * (a * zx) + dl;
      ze += dtf * (a_fast * ze) + eta_scale * dl;
    }
    real.xi.values.col(j) = zx;
    if (j >= i0) real.eta.values.col(j - i0) = ze;
  }
  return real;
}

}  // namespace lsm

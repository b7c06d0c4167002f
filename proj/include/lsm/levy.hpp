#pragma once

#include "lsm/types.hpp"

namespace lsm {

/// Symmetric alpha-stable driving noise. The stability index must lie in
/// (1,2) so p-moments with p < alpha are finite; samples are unit scale per
/// coordinate (characteristic function exp(-|u|^alpha)), with the intensity
/// sigma applied by consumers, never by the sampler.
struct StableNoiseSpec {
  double alpha = 1.8;
  double sigma = 0.05;
  int dim = 1;

  void validate() const;
};

/// A sampled response of a stable linear system driven by the noise,
/// reported on t_grid after integrating from zero data burn_in time units
/// earlier. The grid is uniform with step dt.
struct StationaryPath {
  Eigen::VectorXd t_grid;
  Eigen::MatrixXd values;  // dim x len(t_grid)
  double burn_in = 0.0;
  double dt = 0.0;

  int size() const { return static_cast<int>(t_grid.size()); }
  /// Grid index of time t; t must sit on the grid to within 1e-9.
  int index_of(double t) const;
  Vec at(int index) const { return values.col(index); }
};

/// One draw of a standard symmetric alpha-stable variate via the
/// Chambers-Mallows-Stuck transform (exact, no series truncation).
double sample_standard_stable(double alpha, std::mt19937_64& rng);

/// count standard SaS vectors with independent coordinates, one per column.
Eigen::MatrixXd sample_stable(const StableNoiseSpec& spec, const SeededStream& stream,
                              std::int64_t count);

/// Successive increments of L over steps dt, distributed dt^{1/alpha} times
/// a standard SaS vector; increments over disjoint steps are independent.
class StableIncrementSampler {
 public:
  StableIncrementSampler(const StableNoiseSpec& spec, const SeededStream& stream);
  Vec next(double dt);

 private:
  StableNoiseSpec spec_;
  std::mt19937_64 rng_;
};

/// One increment of L over dt from a fresh stream.
Vec increment(const StableNoiseSpec& spec, double dt, const SeededStream& stream);

/// Stationary solution of dz = A z dt + increment_scale dL via left-point
/// Euler-Maruyama, started from zero at t_grid[0] - burn_in. A must have a
/// stable spectrum; burn_in should exceed ln(1/tol)/gamma for the decay rate
/// gamma of A. increment_scale = eps^{-1/alpha} with A/eps gives the
/// eps-scaled fast response.
StationaryPath simulate_stationary(const Mat& a, const StableNoiseSpec& spec,
                                   const Eigen::VectorXd& t_grid, double burn_in, double dt,
                                   const SeededStream& stream, double increment_scale = 1.0);

/// Uniform grid from t0 to t1 with step dt (t1 - t0 must be a multiple).
Eigen::VectorXd uniform_grid(double t0, double t1, double dt);

/// Burn-in horizon making the start-from-zero truncation error at most tol.
double default_burn_in(double gamma, double tol = 1e-6);

/// One noise realization driving a reduced-system run: the stationary slow
/// response xi(theta_t w) on [-t_hist, t_forward] and the eps-scaled fast
/// response eta^eps(theta_t w) on [0, t_forward], both built from the same
/// increment stream (they share dL) at substep resolution dt/substeps.
struct NoiseRealization {
  StationaryPath xi;
  StationaryPath eta;
  SeededStream stream;
  int id = 0;
};

NoiseRealization simulate_driving(const Mat& a, const StableNoiseSpec& spec, double eps,
                                  double t_hist, double t_forward, double dt, int substeps,
                                  double burn_in, const SeededStream& stream, int id = 0);

}  // namespace lsm

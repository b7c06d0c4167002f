#pragma once

#include "lsm/levy.hpp"
#include "lsm/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace lsm {

class ManifoldApprox;

/// Fast-slow model
///   dx = (1/eps) A x dt + (1/eps) f(x,y) dt + sigma eps^{-1/alpha} dL
///   dy = B y dt + g(x,y,lambda) dt
/// with the exponential-dichotomy constants of (H1) and the Lipschitz
/// constants declared, not derived.
struct ModelSpec {
  std::string name;
  Mat A;  // n x n, stable spectrum
  Mat B;  // m x m

  std::function<Vec(const Vec& x, const Vec& y)> f;
  std::function<Vec(const Vec& x, const Vec& y, double lambda)> g;
  std::function<Mat(const Vec& x, const Vec& y)> f_x;  // n x n
  std::function<Mat(const Vec& x, const Vec& y)> f_y;  // n x m
  std::function<Vec(const Vec& x, const Vec& y, double lambda)> g_lambda;  // m

  double L_f = 0.0;
  double L_g = 0.0;
  double K = 1.0;
  double gamma = 1.0;
  double beta = 1.0;
  Interval lambda_range{0.0, 0.0};
  double lambda_ref = 1.0;  // operating parameter for Lipschitz spot-checks

  int fast_dim() const { return static_cast<int>(A.rows()); }
  int slow_dim() const { return static_cast<int>(B.rows()); }

  /// Cheap structural checks: shapes, (H2) gamma > K L_f, nonempty Lambda.
  void validate() const;
};

struct IntegratorConfig {
  double dt = 1e-3;       // slow step
  double t_final = 1.0;   // horizon
  double eps = 0.01;      // time-scale ratio
  int substep_ratio = 0;  // fast substeps per slow step; 0 = smallest ratio with dt_fast <= eps/10
  double state_cap = 1e6; // overflow guard for heavy-tailed excursions

  int effective_substeps() const;
  double dt_fast() const { return dt / effective_substeps(); }
  int grid_size() const;
  Eigen::VectorXd grid() const { return uniform_grid(0.0, t_final, dt); }
  void validate() const;
};

/// Slow (and optionally fast) sample paths on a shared grid. The fast block
/// is present exactly when the path came from the full system.
struct TrajectorySet {
  struct Path {
    Eigen::MatrixXd x;  // n x L, or 0 x 0 when only the slow component is kept
    Eigen::MatrixXd y;  // m x L
    SeededStream stream;
    bool has_fast() const { return x.size() > 0; }
  };

  Eigen::VectorXd t_grid;
  std::vector<Path> paths;
  double lambda_used = 0.0;
};

/// Thrown when a path leaves the state cap or turns non-finite; carries the
/// offending time so callers can log and resample.
class PathAbort : public std::runtime_error {
 public:
  PathAbort(double time, const std::string& what)
      : std::runtime_error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

/// Euler-Maruyama on the full system. The fast equation advances with
/// substeps dt_fast and noise sigma eps^{-1/alpha} dt_fast^{1/alpha} S per
/// substep; the slow equation advances with step dt from the left point,
/// holding y across the substeps of each slow step.
TrajectorySet integrate_full(const ModelSpec& model, double lambda, const Vec& x0, const Vec& y0,
                             const IntegratorConfig& cfg, const StableNoiseSpec& noise,
                             const SeededStream& stream);

/// Which fast-state argument feeds g in the reduced equation
///   dy = B y dt + g(h~(y, theta_t w) + sigma * <term>, y, lambda) dt.
/// FrozenXi is the reduced equation exactly as written (time-0 value
/// xi(w)); ShiftedXi is the sensitivity variant xi(theta_t w);
/// StationaryEta substitutes the eps-scaled stationary fast response
/// eta^eps(theta_t w), which is what the slow-manifold substitution
/// actually produces before the in-distribution simplification. Estimation
/// uses StationaryEta.
enum class ReducedNoiseMode { FrozenXi, ShiftedXi, StationaryEta };

/// Euler path of the reduced slow system; deterministic given the frozen
/// realization bound into the manifold. xi0 must be the time-0 value of the
/// same realization.
TrajectorySet integrate_reduced(const ModelSpec& model, double lambda, const Vec& y0,
                                const IntegratorConfig& cfg, const ManifoldApprox& manifold,
                                const Vec& xi0,
                                ReducedNoiseMode mode = ReducedNoiseMode::FrozenXi);

/// The random transformation T(w,x,y) = (x - sigma eta, y), fast block.
Vec apply_transformation(const Vec& x, const Vec& eta_value, double sigma);
Vec invert_transformation(const Vec& x_hat, const Vec& eta_value, double sigma);

/// CSV-ready matrix [t | x^T | y^T] used by the exporters.
Eigen::MatrixXd trajectory_table(const TrajectorySet& set, int path_index);

}  // namespace lsm

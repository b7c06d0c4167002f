#pragma once

#include "lsm/dynamics.hpp"
#include "lsm/levy.hpp"
#include "lsm/types.hpp"

#include <memory>
#include <mutex>
#include <unordered_map>

namespace lsm {

/// Truncation and resolution of the (-inf, 0] window integrals. The window
/// subsamples the stored xi path, so dt must be an integer multiple of the
/// path step, and exp(-gamma * t_trunc) <= tol must hold so the truncation
/// error stays within tolerance.
struct QuadratureConfig {
  double t_trunc = 0.0;  // 0 = derived from tol and the model's gamma
  double dt = 1e-2;
  double tol = 1e-6;

  double resolved_t_trunc(double gamma) const;
  void validate(double path_dt, double gamma) const;
};

/// First-order slow-manifold approximation h~(zeta, theta_t w) =
/// h0 + eps*h1 bound to one frozen noise realization. Evaluation at noise
/// shift t slides the quadrature window along the stored xi history;
/// repeated evaluations are served from a thread-safe memo table keyed by
/// (zeta quantized to cache_quantum, shift).
class ManifoldApprox {
 public:
  ManifoldApprox(ModelSpec model, std::shared_ptr<const NoiseRealization> realization,
                 QuadratureConfig quad, double eps, double lambda, int order, double sigma,
                 double cache_quantum = 1e-3);

  Vec h_tilde(const Vec& zeta, int shift = 0) const;
  Vec h0(const Vec& zeta, int shift = 0) const;
  Vec h1(const Vec& zeta, int shift = 0) const;

  Vec xi_at_zero() const { return xi_at_shift(0); }
  Vec xi_at_shift(int shift) const;
  Vec eta_at_shift(int shift) const;
  bool has_eta() const;
  int max_shift() const { return max_shift_; }

  double eps() const { return eps_; }
  double lambda() const { return lambda_; }
  int order() const { return order_; }
  double sigma() const { return sigma_; }
  double path_dt() const { return realization_->xi.dt; }
  SeededStream stream() const { return realization_->stream; }
  const NoiseRealization& realization() const { return *realization_; }
  const QuadratureConfig& quad() const { return quad_; }
  const ModelSpec& model() const { return model_; }

 private:
  struct CacheKey {
    std::int64_t q[kMaxDim];
    int dim;
    int shift;
    bool operator==(const CacheKey& o) const;
  };
  struct CacheKeyHash {
    std::size_t operator()(const CacheKey& k) const;
  };

  Vec eval(const Vec& zeta, int shift, bool want_h1, Vec* h1_out) const;

  ModelSpec model_;
  std::shared_ptr<const NoiseRealization> realization_;
  QuadratureConfig quad_;
  double eps_;
  double lambda_;
  int order_;
  double sigma_;
  double cache_quantum_;
  int stride_ = 1;
  int base_ = 0;       // xi column of the window's oldest node at shift 0
  int n_nodes_ = 0;    // window nodes = t_trunc / quad dt
  int max_shift_ = 0;
  int xi_zero_index_ = 0;
  std::shared_ptr<const Eigen::MatrixXd> decay_;  // n x n*(n_nodes+1), e^{-A s_k} blocks
  Eigen::VectorXd node_s_;                        // s_k = -t_trunc + k*dt
  Eigen::VectorXd weights_;                       // trapezoid weights
  mutable std::mutex cache_mu_;
  mutable std::unordered_map<CacheKey, Vec, CacheKeyHash> cache_;
};

/// Path of x^(0) on [-t_trunc, 0] (columns are window nodes), integrated
/// forward from zero data; by exponential forgetting the value at 0
/// recovers the self-referential initial condition within quad.tol.
Eigen::MatrixXd solve_x0(const Vec& zeta, const StationaryPath& xi, const ModelSpec& model,
                         const QuadratureConfig& quad, double sigma);

/// h^(0)(zeta, w): truncated trapezoid quadrature of e^{-As} f(x0 + sigma xi, zeta).
Vec h0(const Vec& zeta, const StationaryPath& xi, const ModelSpec& model,
       const QuadratureConfig& quad, double sigma);

/// Path of x^(1) on [-t_trunc, 0], driven by f_y(...) [B s zeta + int_0^s g]
/// with the running integral accumulated by trapezoid quadrature.
Eigen::MatrixXd solve_x1(const Vec& zeta, const StationaryPath& xi, const ModelSpec& model,
                         double lambda, const QuadratureConfig& quad,
                         const Eigen::MatrixXd& x0_path, double sigma);

/// h^(1)(zeta, w): truncated trapezoid quadrature of the full integrand.
Vec h1(const Vec& zeta, const StationaryPath& xi, const ModelSpec& model, double lambda,
       const QuadratureConfig& quad, double sigma);

/// h~ = h0 (order 0) or h0 + eps*h1 (order 1) through the manifold's cache.
Vec h_tilde(const Vec& zeta, const ManifoldApprox& manifold, int shift = 0);

struct TruncationCheck {
  double dh0 = 0.0;
  double dh1 = 0.0;
  bool converged = false;
};

/// Change in h0/h1 when the truncation horizon doubles (the xi path must
/// cover the doubled window); converged when both stay within quad.tol.
TruncationCheck check_truncation(const Vec& zeta, const StationaryPath& xi,
                                 const ModelSpec& model, double lambda,
                                 const QuadratureConfig& quad, double sigma);

/// Builds manifolds bound to seeded noise realizations. Realizations are
/// simulated once and shared across every lambda evaluated against them
/// (common random numbers); manifolds are memoized by (realization, lambda).
class ManifoldFactory {
 public:
  ManifoldFactory(ModelSpec model, StableNoiseSpec noise, QuadratureConfig quad,
                  IntegratorConfig dyn, int order, double cache_quantum, std::uint64_t seed);

  std::shared_ptr<const ManifoldApprox> manifold(std::uint64_t realization, double lambda) const;
  std::shared_ptr<const NoiseRealization> realization(std::uint64_t index) const;
  Vec xi_at_zero(std::uint64_t realization) const;
  double eps() const { return dyn_.eps; }
  int order() const { return order_; }

 private:
  ModelSpec model_;
  StableNoiseSpec noise_;
  QuadratureConfig quad_;
  IntegratorConfig dyn_;
  int order_;
  double cache_quantum_;
  std::uint64_t seed_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::uint64_t, std::shared_ptr<const NoiseRealization>> realizations_;
  mutable std::unordered_map<std::uint64_t,
                             std::unordered_map<std::uint64_t, std::shared_ptr<const ManifoldApprox>>>
      manifolds_;
};

}  // namespace lsm

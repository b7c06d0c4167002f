#include "lsm/manifold.hpp"

#include <cmath>
#include <cstring>

namespace lsm {

double QuadratureConfig::resolved_t_trunc(double gamma) const {
  if (t_trunc > 0.0) return t_trunc;
  // The h1 integrand carries a factor growing like |s|, so its truncation
  // error scales as (1 + t) e^{-gamma t}; fixed-point the log correction.
  double needed = std::log(1.0 / tol) / gamma;
  for (int i = 0; i < 3; ++i) needed = (std::log(1.0 / tol) + std::log1p(needed)) / gamma;
  return std::ceil(needed / dt) * dt;
}

void QuadratureConfig::validate(double path_dt, double gamma) const {
  if (!(dt > 0.0)) throw std::invalid_argument("QuadratureConfig: dt must be > 0");
  if (!(tol > 0.0 && tol < 1.0)) throw std::invalid_argument("QuadratureConfig: tol must lie in (0,1)");
  const double ratio = dt / path_dt;
  if (std::abs(ratio - std::llround(ratio)) > 1e-9 || ratio < 1.0 - 1e-9)
    throw std::invalid_argument("QuadratureConfig: dt must be an integer multiple of the path step");
  const double horizon = resolved_t_trunc(gamma);
  const double nodes = horizon / dt;
  if (std::abs(nodes - std::llround(nodes)) > 1e-9)
    throw std::invalid_argument("QuadratureConfig: t_trunc must be a multiple of dt");
  if (std::exp(-gamma * horizon) > tol * (1.0 + 1e-9))
    throw std::invalid_argument("QuadratureConfig: exp(-gamma*t_trunc) exceeds tol");
}

namespace {

// e^{-A s_k} for the window nodes s_k = -t_trunc + k*dt, assembled from the
// single-step propagator so each block is exactly e^{A dt (N-k)}.
Eigen::MatrixXd build_decay(const Mat& a, double dt, int n_nodes) {
  const auto n = a.rows();
  Eigen::MatrixXd decay(n, n * (n_nodes + 1));
  const Mat step = mat_exp(a, dt);
  Mat cur = Mat::Identity(n, n);
  decay.middleCols(n * n_nodes, n) = cur;
  for (int k = n_nodes - 1; k >= 0; --k) {
    cur = step * cur;
    decay.middleCols(n * k, n) = cur;
  }
  return decay;
}

Eigen::VectorXd trapezoid_weights(double dt, int n_nodes) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n_nodes + 1, dt);
  w[0] = 0.5 * dt;
  w[n_nodes] = 0.5 * dt;
  return w;
}

struct Workspace {
  Eigen::MatrixXd arg;   // n x (N+1): x0_k + sigma * xi_k
  Eigen::MatrixXd x0;    // n x (N+1)
  Eigen::MatrixXd gval;  // m x (N+1)
  Eigen::MatrixXd gint;  // m x (N+1): G_k = int_0^{s_k} g dr
  Eigen::MatrixXd x1;    // n x (N+1)
};

Workspace& workspace() {
  thread_local Workspace ws;
  return ws;
}

struct WindowInput {
  const ModelSpec* model;
  const Eigen::MatrixXd* xi;  // full stored path, columns are times
  int base;                   // column of window node 0
  int stride;
  const Eigen::MatrixXd* decay;
  const Eigen::VectorXd* weights;
  const Eigen::VectorXd* node_s;
  double quad_dt;
  double sigma;
  const Eigen::MatrixXd* x0_override = nullptr;  // precomputed x0 node path
};

// Single sweep over the window: x0 Euler forward plus the h0 quadrature;
// when want_h1 is set, the running g-integral, the x1 Euler pass and the h1
// quadrature. x0_out/x1_out capture the node paths for the diagnostic ops.
void eval_window(const WindowInput& in, const Vec& zeta, double lambda, bool want_h1, Vec* h0_out,
                 Vec* h1_out, Eigen::MatrixXd* x0_out, Eigen::MatrixXd* x1_out) {
  const ModelSpec& model = *in.model;
  const int n = model.fast_dim();
  const int m = model.slow_dim();
  const int nodes = static_cast<int>(in.node_s->size());
  Workspace& ws = workspace();
  ws.arg.resize(n, nodes);
  ws.x0.resize(n, nodes);

  const Eigen::MatrixXd& xi = *in.xi;
  const Eigen::MatrixXd& decay = *in.decay;
  const Eigen::VectorXd& w = *in.weights;

  Vec h0 = Vec::Zero(n);
  Vec x0 = Vec::Zero(n);
  for (int k = 0; k < nodes; ++k) {
    if (in.x0_override) x0 = in.x0_override->col(k);
    ws.x0.col(k) = x0;
    const Vec arg = x0 + in.sigma * Vec(xi.col(in.base + k * in.stride));
    ws.arg.col(k) = arg;
    const Vec f = model.f(arg, zeta);
    h0.noalias() += w[k] * (decay.middleCols(n * k, n) * f);
    if (k + 1 < nodes && !in.x0_override) x0 += in.quad_dt * (Vec(model.A * x0) + f);
  }
  if (h0_out) *h0_out = h0;
  if (x0_out) *x0_out = ws.x0.leftCols(nodes);
  if (!want_h1) return;

  ws.gval.resize(m, nodes);
  ws.gint.resize(m, nodes);
  for (int k = 0; k < nodes; ++k)
    ws.gval.col(k) = model.g(Vec(ws.arg.col(k)), zeta, lambda);
  ws.gint.col(nodes - 1).setZero();
  for (int k = nodes - 2; k >= 0; --k)
    ws.gint.col(k) =
        ws.gint.col(k + 1) - 0.5 * in.quad_dt * (ws.gval.col(k) + ws.gval.col(k + 1));

  const Vec b_zeta = model.B * zeta;
  Vec h1 = Vec::Zero(n);
  Vec x1 = Vec::Zero(n);
  if (x1_out) ws.x1.resize(n, nodes);
  for (int k = 0; k < nodes; ++k) {
    if (x1_out) ws.x1.col(k) = x1;
    const Vec arg = ws.arg.col(k);
    const Mat fy = model.f_y ? model.f_y(arg, zeta) : Mat::Zero(n, m);
    const Mat fx = model.f_x ? model.f_x(arg, zeta) : Mat::Zero(n, n);
    const Vec drive = (*in.node_s)[k] * b_zeta + Vec(ws.gint.col(k));
    const Vec force = fy * drive;
    const Vec integrand = force + fx * x1;
    h1.noalias() += w[k] * (decay.middleCols(n * k, n) * integrand);
    if (k + 1 < nodes) x1 += in.quad_dt * (Vec(model.A * x1) + Vec(fx * x1) + force);
  }
  if (h1_out) *h1_out = h1;
  if (x1_out) *x1_out = ws.x1.leftCols(nodes);
}

// Window geometry for a free-standing evaluation ending at path time 0.
struct FreeWindow {
  int base = 0;
  int stride = 1;
  int n_nodes = 0;
  Eigen::MatrixXd decay;
  Eigen::VectorXd weights;
  Eigen::VectorXd node_s;
};

FreeWindow make_free_window(const StationaryPath& xi, const ModelSpec& model,
                            const QuadratureConfig& quad) {
  quad.validate(xi.dt, model.gamma);
  FreeWindow fw;
  fw.stride = static_cast<int>(std::llround(quad.dt / xi.dt));
  const double horizon = quad.resolved_t_trunc(model.gamma);
  fw.n_nodes = static_cast<int>(std::llround(horizon / quad.dt));
  const int zero = xi.index_of(0.0);
  fw.base = zero - fw.n_nodes * fw.stride;
  if (fw.base < 0)
    throw std::invalid_argument("manifold: xi path does not cover [-t_trunc, 0]");
  fw.decay = build_decay(model.A, quad.dt, fw.n_nodes);
  fw.weights = trapezoid_weights(quad.dt, fw.n_nodes);
  fw.node_s = Eigen::VectorXd::LinSpaced(fw.n_nodes + 1, -horizon, 0.0);
  return fw;
}

WindowInput free_input(const FreeWindow& fw, const StationaryPath& xi, const ModelSpec& model,
                       const QuadratureConfig& quad, double sigma) {
  return WindowInput{&model,     &xi.values,  fw.base,     fw.stride, &fw.decay,
                     &fw.weights, &fw.node_s,  quad.dt,     sigma};
}

}  // namespace

ManifoldApprox::ManifoldApprox(ModelSpec model, std::shared_ptr<const NoiseRealization> realization,
                               QuadratureConfig quad, double eps, double lambda, int order,
                               double sigma, double cache_quantum)
    : model_(std::move(model)),
      realization_(std::move(realization)),
      quad_(quad),
      eps_(eps),
      lambda_(lambda),
      order_(order),
      sigma_(sigma),
      cache_quantum_(cache_quantum) {
  if (order_ != 0 && order_ != 1)
    throw std::invalid_argument("ManifoldApprox: order must be 0 or 1");
  if (!(cache_quantum_ > 0.0))
    throw std::invalid_argument("ManifoldApprox: cache_quantum must be > 0");
  if (!realization_) throw std::invalid_argument("ManifoldApprox: null realization");
  const StationaryPath& xi = realization_->xi;
  quad_.validate(xi.dt, model_.gamma);
  stride_ = static_cast<int>(std::llround(quad_.dt / xi.dt));
  const double horizon = quad_.resolved_t_trunc(model_.gamma);
  n_nodes_ = static_cast<int>(std::llround(horizon / quad_.dt));
  xi_zero_index_ = xi.index_of(0.0);
  base_ = xi_zero_index_ - n_nodes_ * stride_;
  if (base_ < 0) throw std::invalid_argument("ManifoldApprox: xi path does not cover [-t_trunc, 0]");
  max_shift_ = xi.size() - 1 - xi_zero_index_;
  decay_ = std::make_shared<Eigen::MatrixXd>(build_decay(model_.A, quad_.dt, n_nodes_));
  weights_ = trapezoid_weights(quad_.dt, n_nodes_);
  node_s_ = Eigen::VectorXd::LinSpaced(n_nodes_ + 1, -horizon, 0.0);
}

bool ManifoldApprox::CacheKey::operator==(const CacheKey& o) const {
  if (dim != o.dim || shift != o.shift) return false;
  for (int i = 0; i < dim; ++i)
    if (q[i] != o.q[i]) return false;
  return true;
}

std::size_t ManifoldApprox::CacheKeyHash::operator()(const CacheKey& k) const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  mix(static_cast<std::uint64_t>(k.shift));
  for (int i = 0; i < k.dim; ++i) mix(static_cast<std::uint64_t>(k.q[i]));
  return static_cast<std::size_t>(h);
}

Vec ManifoldApprox::eval(const Vec& zeta, int shift, bool want_h1, Vec* h1_out) const {
  if (shift < 0 || shift > max_shift_)
    throw std::invalid_argument("ManifoldApprox: shift outside the simulated horizon");
  WindowInput in{&model_,   &realization_->xi.values,
                 base_ + shift, stride_,
                 decay_.get(), &weights_,
                 &node_s_,  quad_.dt,
                 sigma_};
  Vec h0v;
  Vec h1v;
  eval_window(in, zeta, lambda_, want_h1, &h0v, want_h1 ? &h1v : nullptr, nullptr, nullptr);
  if (h1_out) *h1_out = h1v;
  return h0v;
}

Vec ManifoldApprox::h0(const Vec& zeta, int shift) const { return eval(zeta, shift, false, nullptr); }

Vec ManifoldApprox::h1(const Vec& zeta, int shift) const {
  Vec h1v;
  eval(zeta, shift, true, &h1v);
  return h1v;
}

Vec ManifoldApprox::h_tilde(const Vec& zeta, int shift) const {
  CacheKey key{};
  key.dim = static_cast<int>(zeta.size());
  key.shift = shift;
  for (int i = 0; i < key.dim; ++i)
    key.q[i] = static_cast<std::int64_t>(std::llround(zeta[i] / cache_quantum_));
  {
    std::lock_guard<std::mutex> lock(cache_mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  Vec h1v;
  Vec value = eval(zeta, shift, order_ == 1, order_ == 1 ? &h1v : nullptr);
  if (order_ == 1) value += eps_ * h1v;
  std::lock_guard<std::mutex> lock(cache_mu_);
  auto [it, inserted] = cache_.emplace(key, value);
  return it->second;  // first writer wins so concurrent readers agree
}

Vec ManifoldApprox::xi_at_shift(int shift) const {
  return realization_->xi.values.col(xi_zero_index_ + shift);
}

Vec ManifoldApprox::eta_at_shift(int shift) const {
  return realization_->eta.values.col(shift);
}

bool ManifoldApprox::has_eta() const { return realization_->eta.values.size() > 0; }

Eigen::MatrixXd solve_x0(const Vec& zeta, const StationaryPath& xi, const ModelSpec& model,
                         const QuadratureConfig& quad, double sigma) {
  const FreeWindow fw = make_free_window(xi, model, quad);
  const WindowInput in = free_input(fw, xi, model, quad, sigma);
  Eigen::MatrixXd path;
  eval_window(in, zeta, 0.0, false, nullptr, nullptr, &path, nullptr);
  return path;
}

Vec h0(const Vec& zeta, const StationaryPath& xi, const ModelSpec& model,
       const QuadratureConfig& quad, double sigma) {
  const FreeWindow fw = make_free_window(xi, model, quad);
  const WindowInput in = free_input(fw, xi, model, quad, sigma);
  Vec out;
  eval_window(in, zeta, 0.0, false, &out, nullptr, nullptr, nullptr);
  return out;
}

Eigen::MatrixXd solve_x1(const Vec& zeta, const StationaryPath& xi, const ModelSpec& model,
                         double lambda, const QuadratureConfig& quad,
                         const Eigen::MatrixXd& x0_path, double sigma) {
  const FreeWindow fw = make_free_window(xi, model, quad);
  if (x0_path.cols() != fw.n_nodes + 1 || x0_path.rows() != model.fast_dim())
    throw std::invalid_argument("solve_x1: x0_path does not match the window grid");
  WindowInput in = free_input(fw, xi, model, quad, sigma);
  in.x0_override = &x0_path;
  Eigen::MatrixXd path;
  eval_window(in, zeta, lambda, true, nullptr, nullptr, nullptr, &path);
  return path;
}

Vec h1(const Vec& zeta, const StationaryPath& xi, const ModelSpec& model, double lambda,
       const QuadratureConfig& quad, double sigma) {
  const FreeWindow fw = make_free_window(xi, model, quad);
  const WindowInput in = free_input(fw, xi, model, quad, sigma);
  Vec out;
  eval_window(in, zeta, lambda, true, nullptr, &out, nullptr, nullptr);
  return out;
}

Vec h_tilde(const Vec& zeta, const ManifoldApprox& manifold, int shift) {
  return manifold.h_tilde(zeta, shift);
}

TruncationCheck check_truncation(const Vec& zeta, const StationaryPath& xi,
                                 const ModelSpec& model, double lambda,
                                 const QuadratureConfig& quad, double sigma) {
  QuadratureConfig doubled = quad;
  doubled.t_trunc = 2.0 * quad.resolved_t_trunc(model.gamma);
  TruncationCheck out;
  out.dh0 = (h0(zeta, xi, model, doubled, sigma) - h0(zeta, xi, model, quad, sigma)).norm();
  out.dh1 =
      (h1(zeta, xi, model, lambda, doubled, sigma) - h1(zeta, xi, model, lambda, quad, sigma))
          .norm();
  out.converged = out.dh0 <= quad.tol && out.dh1 <= quad.tol;
  return out;
}

ManifoldFactory::ManifoldFactory(ModelSpec model, StableNoiseSpec noise, QuadratureConfig quad,
                                 IntegratorConfig dyn, int order, double cache_quantum,
                                 std::uint64_t seed)
    : model_(std::move(model)),
      noise_(noise),
      quad_(quad),
      dyn_(dyn),
      order_(order),
      cache_quantum_(cache_quantum),
      seed_(seed) {
  model_.validate();
  dyn_.validate();
  noise_.validate();
  quad_.validate(dyn_.dt, model_.gamma);
}

std::shared_ptr<const NoiseRealization> ManifoldFactory::realization(std::uint64_t index) const {
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = realizations_.find(index);
    if (it != realizations_.end()) return it->second;
  }
  const double t_hist = quad_.resolved_t_trunc(model_.gamma);
  auto real = std::make_shared<NoiseRealization>(simulate_driving(
      model_.A, noise_, dyn_.eps, t_hist, dyn_.t_final, dyn_.dt, dyn_.effective_substeps(),
      default_burn_in(model_.gamma, quad_.tol), substream(seed_, stream_domain::kRealization, index),
      static_cast<int>(index)));
  std::lock_guard<std::mutex> lock(mu_);
  auto [it, inserted] = realizations_.emplace(index, std::move(real));
  return it->second;
}

std::shared_ptr<const ManifoldApprox> ManifoldFactory::manifold(std::uint64_t realization_index,
                                                                double lambda) const {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(lambda));
  std::memcpy(&bits, &lambda, sizeof(bits));
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = manifolds_.find(realization_index);
    if (it != manifolds_.end()) {
      auto jt = it->second.find(bits);
      if (jt != it->second.end()) return jt->second;
    }
  }
  auto real = realization(realization_index);
  auto made = std::make_shared<const ManifoldApprox>(model_, std::move(real), quad_, dyn_.eps,
                                                     lambda, order_, noise_.sigma, cache_quantum_);
  std::lock_guard<std::mutex> lock(mu_);
  auto [it, inserted] = manifolds_[realization_index].emplace(bits, std::move(made));
  return it->second;
}

Vec ManifoldFactory::xi_at_zero(std::uint64_t r) const {
  auto real = realization(r);
  return real->xi.values.col(real->xi.index_of(0.0));
}

}  // namespace lsm

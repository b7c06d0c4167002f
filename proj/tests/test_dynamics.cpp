#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lsm/dynamics.hpp"
#include "lsm/manifold.hpp"
#include "lsm/models.hpp"
#include "support/oracles.hpp"

#include <cmath>

using namespace lsm;

namespace {

ModelSpec linear_model(double a, double b) {
  ModelSpec m;
  m.name = "linear";
  m.A = Mat::Constant(1, 1, a);
  m.B = Mat::Constant(1, 1, b);
  m.f = [](const Vec&, const Vec&) { return Vec::Zero(1); };
  m.g = [](const Vec&, const Vec&, double) { return Vec::Zero(1); };
  m.f_x = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
  m.f_y = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
  m.g_lambda = [](const Vec&, const Vec&, double) { return Vec::Zero(1); };
  m.L_f = 0.0;
  m.L_g = 0.0;
  m.K = 1.0;
  m.gamma = -a;
  m.beta = b;
  m.lambda_range = Interval{0.0, 2.0};
  return m;
}

Vec scalar(double v) { return Vec::Constant(1, v); }

}  // namespace

TEST_CASE("deterministic linear system matches closed forms") {
  const ModelSpec model = linear_model(-1.0, 1.0);
  IntegratorConfig cfg{1e-3, 1.0, 0.01, 0, 1e6};
  StableNoiseSpec noise{1.8, 0.0, 1};
  const auto set = integrate_full(model, 1.0, scalar(1.0), scalar(1.0), cfg, noise, {1, 0});
  const auto& path = set.paths[0];
  const int L = cfg.grid_size();
  // y = e^t within Euler error
  CHECK(path.y(0, L - 1) == doctest::Approx(std::exp(1.0)).epsilon(3e-3));
  // x = e^{-t/eps}: essentially 0 at t = 1, and accurate at t = eps
  CHECK(std::abs(path.x(0, L - 1)) < 1e-10);
  const int i_eps = static_cast<int>(std::llround(cfg.eps / cfg.dt));
  CHECK(path.x(0, i_eps) == doctest::Approx(std::exp(-1.0)).epsilon(2e-2));
}

TEST_CASE("deterministic worked example agrees with an RK4 reference") {
  const ModelSpec model = example_model();
  const double eps = 0.01;
  IntegratorConfig cfg{2e-4, 1.0, eps, 0, 1e6};
  StableNoiseSpec noise{1.8, 0.0, 1};
  const auto set = integrate_full(model, 1.0, scalar(0.0), scalar(1.0), cfg, noise, {1, 0});

  auto rhs = [&](double, const Eigen::VectorXd& s) {
    Eigen::VectorXd d(2);
    d[0] = (-s[0] + 0.25 * std::cos(s[1])) / eps;
    d[1] = s[1] + 0.25 * std::sin(s[0]);
    return d;
  };
  Eigen::VectorXd init(2);
  init << 0.0, 1.0;
  const Eigen::VectorXd ref = oracles::rk4_integrate(rhs, init, 0.0, 1.0, 5e-5);
  const int L = cfg.grid_size();
  CHECK(std::abs(set.paths[0].x(0, L - 1) - ref[0]) < 1e-3);
  CHECK(std::abs(set.paths[0].y(0, L - 1) - ref[1]) < 1e-3);
}

TEST_CASE("step halving moves the deterministic endpoint by O(dt)") {
  const ModelSpec model = example_model();
  StableNoiseSpec noise{1.8, 0.0, 1};
  IntegratorConfig coarse{1e-3, 1.0, 0.01, 0, 1e6};
  IntegratorConfig fine{5e-4, 1.0, 0.01, 0, 1e6};
  const auto a = integrate_full(model, 1.0, scalar(0.0), scalar(1.0), coarse, noise, {1, 0});
  const auto b = integrate_full(model, 1.0, scalar(0.0), scalar(1.0), fine, noise, {1, 0});
  const double ya = a.paths[0].y(0, coarse.grid_size() - 1);
  const double yb = b.paths[0].y(0, fine.grid_size() - 1);
  CHECK(std::abs(ya - yb) < 5.0 * coarse.dt);
}

TEST_CASE("transformation and its inverse") {
  CHECK(apply_transformation(scalar(1.0), scalar(2.0), 0.05)[0] == doctest::Approx(0.9));
  CHECK(apply_transformation(scalar(1.0), scalar(2.0), 0.0)[0] == 1.0);
  const Vec x = scalar(0.7312);
  const Vec eta = scalar(-1.25);
  CHECK(invert_transformation(apply_transformation(x, eta, 0.05), eta, 0.05)[0] == x[0]);
}

TEST_CASE("noise contribution scales bit-exactly with sigma") {
  // From x0 = 0 with f = 0 the first step is exactly the noise increment.
  const ModelSpec model = linear_model(-1.0, 1.0);
  IntegratorConfig cfg{1e-3, 1e-3, 0.01, 1, 1e6};
  auto run = [&](double sigma) {
    StableNoiseSpec noise{1.8, sigma, 1};
    return integrate_full(model, 1.0, scalar(0.0), scalar(1.0), cfg, noise, {9, 3}).paths[0].x(0, 1);
  };
  const double base = run(0.05);
  CHECK(run(0.10) == 2.0 * base);
  CHECK(run(0.20) == 4.0 * base);
  CHECK(run(0.0) == 0.0);
}

TEST_CASE("identical configuration and stream reproduce bit-identical paths") {
  const ModelSpec model = example_model();
  IntegratorConfig cfg{2e-3, 1.0, 0.01, 0, 1e6};
  StableNoiseSpec noise{1.8, 0.05, 1};
  const auto a = integrate_full(model, 1.3, scalar(0.0), scalar(1.0), cfg, noise, {17, 4});
  const auto b = integrate_full(model, 1.3, scalar(0.0), scalar(1.0), cfg, noise, {17, 4});
  CHECK(a.paths[0].x == b.paths[0].x);
  CHECK(a.paths[0].y == b.paths[0].y);
}

TEST_CASE("paths beyond the state cap abort with the offending time") {
  const ModelSpec model = example_model();
  IntegratorConfig cfg{2e-3, 1.0, 0.01, 0, 2.0};  // tight cap
  StableNoiseSpec noise{1.8, 50.0, 1};            // huge jumps
  try {
    integrate_full(model, 1.0, scalar(0.0), scalar(1.0), cfg, noise, {2, 0});
    FAIL("expected PathAbort");
  } catch (const PathAbort& abort) {
    CHECK(abort.time() > 0.0);
    CHECK(abort.time() <= 1.0);
  }
}

TEST_CASE("integrator configuration guards") {
  IntegratorConfig cfg{2e-3, 1.0, 0.01, 1, 1e6};  // dt_fast = 2e-3 > eps/10
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.substep_ratio = 0;  // auto restores dt_fast <= eps/10
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.effective_substeps() == 2);
  IntegratorConfig bad_t{1e-3, 1.0005, 0.01, 0, 1e6};
  CHECK_THROWS_AS(bad_t.validate(), std::invalid_argument);
}

TEST_CASE("fast variable relaxes to its quasi-steady value in O(eps log) time") {
  const ModelSpec model = example_model();
  const double eps = 1e-3;
  IntegratorConfig cfg{1e-4, 0.05, eps, 0, 1e6};
  StableNoiseSpec noise{1.8, 0.0, 1};
  const auto set = integrate_full(model, 1.0, scalar(0.0), scalar(1.0), cfg, noise, {1, 0});
  const auto& p = set.paths[0];
  double hit_time = -1.0;
  for (int i = 1; i < cfg.grid_size(); ++i) {
    const double target = 0.25 * std::cos(p.y(0, i));
    if (std::abs(p.x(0, i) - target) <= 0.01 * std::abs(target)) {
      hit_time = set.t_grid[i];
      break;
    }
  }
  REQUIRE(hit_time > 0.0);
  CHECK(hit_time <= 2.0 * eps * std::log(100.0));
}

TEST_CASE("reduced system with g = 0 is the decoupled slow flow") {
  const ModelSpec model = example_model_g0();
  IntegratorConfig cfg{2e-3, 1.0, 0.02, 0, 1e6};
  StableNoiseSpec noise{1.8, 0.05, 1};
  QuadratureConfig quad{10.0, 1e-2, 1e-4};
  ManifoldFactory factory(model, noise, quad, cfg, 1, 1e-3, 5);
  auto manifold = factory.manifold(0, 1.0);
  const auto set =
      integrate_reduced(model, 1.0, scalar(0.7), cfg, *manifold, factory.xi_at_zero(0),
                        ReducedNoiseMode::StationaryEta);
  const int L = cfg.grid_size();
  CHECK(set.paths[0].y(0, L - 1) == doctest::Approx(0.7 * std::exp(1.0)).epsilon(3e-3));
  CHECK_FALSE(set.paths[0].has_fast());
}

TEST_CASE("reduced system tracks the full slow path") {
  const ModelSpec model = example_model();
  IntegratorConfig cfg{2e-3, 1.0, 0.02, 0, 1e6};
  StableNoiseSpec noise{1.8, 0.05, 1};
  QuadratureConfig quad{12.0, 1e-2, 1e-5};
  const auto full = integrate_full(model, 1.0, scalar(0.0), scalar(0.1), cfg, noise, {23, 0});
  ManifoldFactory factory(model, noise, quad, cfg, 1, 1e-3, 23);
  auto manifold = factory.manifold(0, 1.0);
  const auto reduced = integrate_reduced(model, 1.0, scalar(0.1), cfg, *manifold,
                                         factory.xi_at_zero(0), ReducedNoiseMode::StationaryEta);
  const double err = (full.paths[0].y - reduced.paths[0].y).cwiseAbs().sum() * cfg.dt / cfg.t_final;
  CHECK(err < 0.1);
}

TEST_CASE("tracking error does not grow as eps shrinks (matched seeds)") {
  const ModelSpec model = example_model();
  StableNoiseSpec noise{1.8, 0.05, 1};
  QuadratureConfig quad{12.0, 1e-2, 1e-5};
  auto median_err = [&](double eps) {
    std::vector<double> errs;
    for (std::uint64_t s = 0; s < 6; ++s) {
      IntegratorConfig cfg{2e-3, 1.0, eps, 0, 1e6};
      const auto full = integrate_full(model, 1.0, scalar(0.0), scalar(0.1), cfg, noise,
                                       substream(100 + s, stream_domain::kObservation, 0));
      ManifoldFactory factory(model, noise, quad, cfg, 1, 1e-3, 100 + s);
      auto manifold = factory.manifold(0, 1.0);
      const auto reduced =
          integrate_reduced(model, 1.0, scalar(0.1), cfg, *manifold, factory.xi_at_zero(0),
                            ReducedNoiseMode::StationaryEta);
      errs.push_back((full.paths[0].y - reduced.paths[0].y).cwiseAbs().sum() * cfg.dt);
    }
    return oracles::median(errs);
  };
  const double e4 = median_err(0.04);
  const double e2 = median_err(0.02);
  const double e1 = median_err(0.01);
  CHECK(e2 <= e4);
  CHECK(e1 <= e2);
}

TEST_CASE("trajectory table carries t, fast and slow columns") {
  const ModelSpec model = example_model();
  IntegratorConfig cfg{2e-3, 0.1, 0.01, 0, 1e6};
  StableNoiseSpec noise{1.8, 0.05, 1};
  const auto set = integrate_full(model, 1.0, scalar(0.0), scalar(1.0), cfg, noise, {3, 0});
  const auto table = trajectory_table(set, 0);
  CHECK(table.rows() == cfg.grid_size());
  CHECK(table.cols() == 3);
  CHECK(table(0, 0) == 0.0);
  CHECK(table(0, 1) == 0.0);
  CHECK(table(0, 2) == 1.0);
}

TEST_CASE("lambda outside Lambda is rejected") {
  const ModelSpec model = example_model();
  IntegratorConfig cfg{2e-3, 0.1, 0.01, 0, 1e6};
  StableNoiseSpec noise{1.8, 0.05, 1};
  CHECK_THROWS_AS(integrate_full(model, 5.0, scalar(0.0), scalar(1.0), cfg, noise, {3, 0}),
                  std::invalid_argument);
}

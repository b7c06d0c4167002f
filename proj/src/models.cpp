#include "lsm/models.hpp"

#include <cmath>
#include <sstream>

namespace lsm {

namespace {

Mat scalar_mat(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return m;
}

Vec scalar_vec(double v) {
  Vec x(1);
  x[0] = v;
  return x;
}

}  // namespace

ModelSpec example_model() {
  ModelSpec m;
  m.name = "example";
  m.A = scalar_mat(-1.0);
  m.B = scalar_mat(1.0);
  m.f = [](const Vec&, const Vec& y) { return scalar_vec(0.25 * std::cos(y[0])); };
  m.g = [](const Vec& x, const Vec&, double lambda) {
    return scalar_vec(0.25 * std::sin(lambda * x[0]));
  };
  m.f_x = [](const Vec&, const Vec&) { return Mat::Zero(1, 1); };
  m.f_y = [](const Vec&, const Vec& y) { return scalar_mat(-0.25 * std::sin(y[0])); };
  m.g_lambda = [](const Vec& x, const Vec&, double lambda) {
    return scalar_vec(0.25 * x[0] * std::cos(lambda * x[0]));
  };
  m.L_f = 0.25;
  m.L_g = 0.25;
  m.K = 1.0;
  m.gamma = 1.0;
  m.beta = 1.0;
  m.lambda_range = Interval{0.2, 3.0};
  m.lambda_ref = 1.0;
  return m;
}

ModelSpec example_model_g0() {
  ModelSpec m = example_model();
  m.name = "example_g0";
  m.g = [](const Vec&, const Vec&, double) { return Vec::Zero(1); };
  m.g_lambda = [](const Vec&, const Vec&, double) { return Vec::Zero(1); };
  m.L_g = 0.0;
  return m;
}

const HypothesisCheck* HypothesisReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

namespace {

Vec random_box_vec(int dim, std::mt19937_64& rng) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = 2.0 * uniform_open(rng) - 1.0;
  return v;
}

std::string point_str(const Vec& v) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ")";
  return os.str();
}

}  // namespace

HypothesisReport check_hypotheses(const ModelSpec& spec, int sample_count,
                                  const SeededStream& stream) {
  if (sample_count < 1) throw std::invalid_argument("check_hypotheses: sample_count must be >= 1");
  auto rng = make_rng(stream);
  const int n = spec.fast_dim();
  const int m = spec.slow_dim();
  HypothesisReport report;
  auto add = [&report](std::string name, bool pass, std::string witness) {
    report.checks.push_back({std::move(name), pass, std::move(witness)});
    report.all_pass = report.all_pass && report.checks.back().pass;
  };

  // (H2) is exact arithmetic on the declared constants.
  {
    const bool ok = spec.gamma > spec.K * spec.L_f;
    std::ostringstream w;
    if (!ok) w << "gamma=" << spec.gamma << " <= K*L_f=" << spec.K * spec.L_f;
    add("H2", ok, w.str());
  }

  const double slack = 1e-9;
  // (H1), fast block: |e^{At} x| <= K e^{-gamma t} |x| for t >= 0.
  {
    bool ok = true;
    std::string witness;
    for (int s = 0; s < sample_count && ok; ++s) {
      const double t = 5.0 / spec.gamma * uniform_open(rng);
      const Vec x = random_box_vec(n, rng);
      const double lhs = (mat_exp(spec.A, t) * x).norm();
      const double rhs = spec.K * std::exp(-spec.gamma * t) * x.norm();
      if (lhs > rhs * (1.0 + slack) + 1e-12) {
        ok = false;
        std::ostringstream w;
        w << "t=" << t << " x=" << point_str(x) << " |e^{At}x|=" << lhs << " bound=" << rhs;
        witness = w.str();
      }
    }
    add("H1_fast_decay", ok, witness);
  }
  // (H1), slow block: |e^{Bt} y| <= K e^{beta t} |y| for t <= 0.
  {
    bool ok = true;
    std::string witness;
    for (int s = 0; s < sample_count && ok; ++s) {
      const double t = -5.0 / spec.beta * uniform_open(rng);
      const Vec y = random_box_vec(m, rng);
      const double lhs = (mat_exp(spec.B, t) * y).norm();
      const double rhs = spec.K * std::exp(spec.beta * t) * y.norm();
      if (lhs > rhs * (1.0 + slack) + 1e-12) {
        ok = false;
        std::ostringstream w;
        w << "t=" << t << " y=" << point_str(y) << " |e^{Bt}y|=" << lhs << " bound=" << rhs;
        witness = w.str();
      }
    }
    add("H1_slow_growth", ok, witness);
  }

  const double lip_slack = 1e-6;
  // Declared L_f must dominate joint (x,y) difference quotients on the box.
  {
    bool ok = true;
    std::string witness;
    for (int s = 0; s < sample_count && ok; ++s) {
      const Vec x1 = random_box_vec(n, rng), x2 = random_box_vec(n, rng);
      const Vec y1 = random_box_vec(m, rng), y2 = random_box_vec(m, rng);
      const double dist = std::sqrt((x1 - x2).squaredNorm() + (y1 - y2).squaredNorm());
      if (dist < 1e-12) continue;
      const double quot = (spec.f(x1, y1) - spec.f(x2, y2)).norm() / dist;
      if (quot > spec.L_f * (1.0 + lip_slack) + 1e-12) {
        ok = false;
        std::ostringstream w;
        w << "quotient " << quot << " > L_f=" << spec.L_f << " at x=" << point_str(x1) << ","
          << point_str(x2) << " y=" << point_str(y1) << "," << point_str(y2);
        witness = w.str();
      }
    }
    add("lipschitz_f", ok, witness);
  }
  // g: state quotient at the operating parameter lambda_ref plus the
  // lambda quotient over Lambda at fixed state.
  {
    bool ok = true;
    std::string witness;
    for (int s = 0; s < sample_count && ok; ++s) {
      const Vec x1 = random_box_vec(n, rng), x2 = random_box_vec(n, rng);
      const Vec y1 = random_box_vec(m, rng), y2 = random_box_vec(m, rng);
      const double dist = std::sqrt((x1 - x2).squaredNorm() + (y1 - y2).squaredNorm());
      if (dist >= 1e-12) {
        const double quot =
            (spec.g(x1, y1, spec.lambda_ref) - spec.g(x2, y2, spec.lambda_ref)).norm() / dist;
        if (quot > spec.L_g * (1.0 + lip_slack) + 1e-12) {
          ok = false;
          std::ostringstream w;
          w << "state quotient " << quot << " > L_g=" << spec.L_g << " at lambda_ref="
            << spec.lambda_ref << " x=" << point_str(x1) << "," << point_str(x2);
          witness = w.str();
          break;
        }
      }
      const double l1 = spec.lambda_range.lo + spec.lambda_range.width() * uniform_open(rng);
      const double l2 = spec.lambda_range.lo + spec.lambda_range.width() * uniform_open(rng);
      if (std::abs(l1 - l2) < 1e-12) continue;
      const double lquot = (spec.g(x1, y1, l1) - spec.g(x1, y1, l2)).norm() / std::abs(l1 - l2);
      if (lquot > spec.L_g * (1.0 + lip_slack) + 1e-12) {
        ok = false;
        std::ostringstream w;
        w << "lambda quotient " << lquot << " > L_g=" << spec.L_g << " between lambda=" << l1
          << " and " << l2;
        witness = w.str();
      }
    }
    add("lipschitz_g", ok, witness);
  }
  return report;
}

double derivative_consistency(const ModelSpec& spec, int sample_count,
                              const SeededStream& stream) {
  auto rng = make_rng(stream);
  const int n = spec.fast_dim();
  const int m = spec.slow_dim();
  const double h = 1e-5;
  double worst = 0.0;
  for (int s = 0; s < sample_count; ++s) {
    const Vec x = random_box_vec(n, rng);
    const Vec y = random_box_vec(m, rng);
    const double lambda = spec.lambda_range.lo + spec.lambda_range.width() * uniform_open(rng);
    if (spec.f_y) {
      const Mat fy = spec.f_y(x, y);
      for (int j = 0; j < m; ++j) {
        Vec yp = y, ym = y;
        yp[j] += h;
        ym[j] -= h;
        const Vec fd = (spec.f(x, yp) - spec.f(x, ym)) / (2.0 * h);
        worst = std::max(worst, (Vec(fy.col(j)) - fd).cwiseAbs().maxCoeff());
      }
    }
    if (spec.g_lambda) {
      const Vec gl = spec.g_lambda(x, y, lambda);
      const Vec fd = (spec.g(x, y, lambda + h) - spec.g(x, y, lambda - h)) / (2.0 * h);
      worst = std::max(worst, (gl - fd).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

const ModelRegistry& ModelRegistry::builtin() {
  static const ModelRegistry reg = [] {
    ModelRegistry r;
    r.add({"example",
           example_model(),
           {{"H1", "holds with K = gamma = beta = 1"},
            {"H2", "gamma - K*L_f = 0.75 > 0"},
            {"lipschitz", "L_f = L_g = 1/4 near lambda_ref = 1"}}});
    r.add({"example_g0",
           example_model_g0(),
           {{"H1", "holds with K = gamma = beta = 1"},
            {"H2", "gamma - K*L_f = 0.75 > 0"},
            {"structure", "g = 0: slow flow decouples from the fast block"}}});
    return r;
  }();
  return reg;
}

const ModelRegistryEntry& ModelRegistry::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw std::invalid_argument("unknown model: " + name);
}

bool ModelRegistry::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

void ModelRegistry::add(ModelRegistryEntry entry) {
  if (contains(entry.name)) throw std::invalid_argument("duplicate model name: " + entry.name);
  entries_.push_back(std::move(entry));
}

}  // namespace lsm

#include "dtrci/genmodels.hpp"

#include "dtrci/design.hpp"
#include "dtrci/errors.hpp"
#include "dtrci/qlearn.hpp"
#include "dtrci/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <random>

namespace dtrci {

namespace {

struct Row {
  const char* label;
  std::vector<double> effects;
  std::array<double, 2> delta;
};

const std::vector<Row>& binary_rows() {
  static const std::vector<Row> rows = {
      {"ex1", {0, 0, 0, 0, 0, 0, 0}, {0.5, 0.5}},
      {"ex2", {0, 0, 0, 0, 0.01, 0, 0}, {0.5, 0.5}},
      {"ex3", {0, 0, -0.5, 0, 0.5, 0, 0.5}, {0.5, 0.5}},
      {"ex4", {0, 0, -0.5, 0, 0.5, 0, 0.49}, {0.5, 0.5}},
      {"ex5", {0, 0, -0.5, 0, 1.0, 0.5, 0.5}, {1.0, 0.0}},
      {"ex6", {0, 0, -0.5, 0, 0.25, 0.5, 0.5}, {0.1, 0.1}},
      {"exA", {0, 0, -0.25, 0, 0.75, 0.5, 0.5}, {0.1, 0.1}},
      {"exB", {0, 0, 0, 0, 0.25, 0, 0.25}, {0.0, 0.0}},
      {"exC", {0, 0, 0, 0, 0.25, 0, 0.24}, {0.0, 0.0}},
  };
  return rows;
}

const std::vector<Row>& ternary_rows() {
  static const std::vector<Row> rows = {
      {"ex1", {0, 0, 0, 0, 0, 0, 0, 0, 0, 0}, {0.5, 0.5}},
      {"ex2", {0, 0, 0, 0, 0.01, 0.01, 0, 0, 0, 0}, {0.5, 0.5}},
      {"ex3", {0, 0, -0.5, 0, 0.5, 0.5, 0, 0, 0.5, 0.5}, {0.5, 0.5}},
      {"ex4", {0, 0, -0.5, 0, 0.5, 0.5, 0, 0, 0.49, 0.49}, {0.5, 0.5}},
      {"ex5", {0, 0, -0.5, 0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.5}, {1.0, 0.0}},
      {"ex6", {0, 0, -0.5, 0, 0.25, 0.25, 0.5, 0.5, 0.5, 0.5}, {0.1, 0.1}},
      {"exA", {0, 0, -0.25, 0, 0.75, 0.75, 0.5, 0.5, 0.5, 0.5}, {0.1, 0.1}},
      {"exB", {0, 0, 0, 0, 0.25, 0.25, 0, 0, 0.25, 0.25}, {0.0, 0.0}},
      {"exC", {0, 0, 0, 0, 0.25, 0.25, 0, 0, 0.24, 0.24}, {0.0, 0.0}},
  };
  return rows;
}

const std::vector<Row>& three_stage_rows() {
  static const std::vector<Row> rows = {
      {"ex1", {0, 0, 0, 0, 0, 0, 0, 0, 0, 0}, {0.5, 0.5}},
      {"ex2", {0, 0, 0, 0, 0.01, 0, 0, 0.01, 0, 0}, {0.5, 0.5}},
      {"ex3", {0, 0, -0.5, 0, 0, 0, 0.5, 0.5, 0, 0.5}, {0.5, 0.5}},
      {"ex4", {0, 0, -0.5, 0, 0, 0, 0.49, 0.5, 0, 0.49}, {0.5, 0.5}},
      {"ex5", {0, 0, -0.5, 0, 0.5, 0.5, 0.5, 1.0, 0.5, 0.5}, {1.0, 0.0}},
      {"ex6", {0, 0, -0.5, 0, 0.12, 0.48, 0.50, 0.25, 0.5, 0.5}, {0.1, 0.1}},
      {"exA", {0, 0, -0.25, 0, 0.36, 0.49, 0.50, 0.75, 0.5, 0.5}, {0.1, 0.1}},
      {"exB", {0, 0, 0, 0, 0, 0, 0.25, 0.25, 0, 0.25}, {0.0, 0.0}},
      {"exC", {0, 0, 0, 0, 0, 0, 0.24, 0.25, 0, 0.24}, {0.0, 0.0}},
  };
  return rows;
}

const std::vector<Row>& rows_of(Suite s) {
  switch (s) {
    case Suite::two_stage_binary: return binary_rows();
    case Suite::two_stage_ternary: return ternary_rows();
    case Suite::three_stage_binary: return three_stage_rows();
  }
  return binary_rows();
}

std::size_t effect_count(Suite s) { return s == Suite::two_stage_binary ? 7 : 10; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

// Binary actions: code 1 <-> +1, code 2 <-> -1.
double pm(int code) { return code == 1 ? 1.0 : -1.0; }

const Eigen::MatrixXd& coding_of(const GenModelSpec& spec, Eigen::MatrixXd& storage) {
  storage = spec.ternary_coding.size() ? spec.ternary_coding : default_ternary_coding();
  return storage;
}

// Conditional mean of the final reward.
double mean_reward(const GenModelSpec& spec, const std::vector<double>& x, const std::vector<int>& codes) {
  const auto& e = spec.effects;
  const double x1 = x[0], a1 = pm(codes[0]), x2 = x[1];
  double m = e[0] + e[1] * x1 + e[2] * a1 + e[3] * x1 * a1;
  switch (spec.suite) {
    case Suite::two_stage_binary: {
      const double a2 = pm(codes[1]);
      m += e[4] * a2 + e[5] * x2 * a2 + e[6] * a1 * a2;
      break;
    }
    case Suite::two_stage_ternary: {
      Eigen::MatrixXd store;
      const Eigen::MatrixXd& C = coding_of(spec, store);
      const double u = C(codes[1] - 1, 0), v = C(codes[1] - 1, 1);
      m += e[4] * u + e[5] * v + x2 * (e[6] * u + e[7] * v) + a1 * (e[8] * u + e[9] * v);
      break;
    }
    case Suite::three_stage_binary: {
      const double a2 = pm(codes[1]), x3 = x[2], a3 = pm(codes[2]);
      m += e[4] * a2 + e[5] * x2 * a2 + e[6] * a1 * a2 + e[7] * a3 + e[8] * x3 * a3 + e[9] * a2 * a3;
      break;
    }
  }
  return m;
}

Trajectory make_trajectory(const GenModelSpec& spec, const std::vector<double>& x, const std::vector<int>& codes,
                           double final_reward) {
  Trajectory tr;
  const int T = spec.n_stages();
  tr.stages.resize(T);
  for (int t = 0; t < T; ++t) {
    tr.stages[t].covariates = {x[t]};
    tr.stages[t].action = codes[t];
    tr.stages[t].reward = t == T - 1 ? final_reward : 0.0;
  }
  return tr;
}

int n_codes(const GenModelSpec& spec, int t) { return spec.suite == Suite::two_stage_ternary && t == 2 ? 3 : 2; }

void check_spec(const GenModelSpec& spec) {
  if (spec.effects.size() != effect_count(spec.suite))
    throw ConfigError("model " + spec.name() + " needs " + std::to_string(effect_count(spec.suite)) + " effects");
  if (spec.ternary_coding.size() && (spec.ternary_coding.rows() != 3 || spec.ternary_coding.cols() != 2))
    throw ConfigError("ternary coding must be 3 x 2");
}

}  // namespace

std::string suite_name(Suite s) {
  switch (s) {
    case Suite::two_stage_binary: return "binary";
    case Suite::two_stage_ternary: return "ternary";
    case Suite::three_stage_binary: return "three_stage";
  }
  return "binary";
}

Suite parse_suite(std::string_view text) {
  const std::string t = lower(text);
  if (t == "binary" || t == "two_stage_binary") return Suite::two_stage_binary;
  if (t == "ternary" || t == "two_stage_ternary") return Suite::two_stage_ternary;
  if (t == "three_stage" || t == "three_stage_binary") return Suite::three_stage_binary;
  throw ConfigError("unknown model suite '" + std::string(text) + "'");
}

std::string GenModelSpec::name() const { return suite_name(suite) + ":" + label; }

Eigen::MatrixXd default_ternary_coding() {
  Eigen::MatrixXd C(3, 2);
  C << 0.0, -1.0, -1.0, 0.5, 1.0, 0.5;
  return C;
}

std::vector<GenModelSpec> suite_models(Suite s) {
  std::vector<GenModelSpec> out;
  for (const auto& r : rows_of(s)) out.push_back(GenModelSpec{s, r.label, r.effects, r.delta, {}});
  return out;
}

GenModelSpec model_by_name(std::string_view name) {
  Suite suite = Suite::two_stage_binary;
  std::string_view label = name;
  if (auto colon = name.find(':'); colon != std::string_view::npos) {
    suite = parse_suite(name.substr(0, colon));
    label = name.substr(colon + 1);
  }
  const std::string want = lower(label);
  for (auto& m : suite_models(suite))
    if (lower(m.label) == want) return m;
  throw ConfigError("unknown model '" + std::string(name) + "'");
}

DesignSpec analysis_design(const GenModelSpec& spec) {
  auto terms = [](std::initializer_list<const char*> names) {
    std::vector<FeatureTerm> out;
    for (const char* n : names) out.push_back(FeatureTerm::parse(n));
    return out;
  };
  DesignSpec d;
  StageSpec s1{terms({"1", "X1"}), terms({"1", "X1"}), ActionCoding::contrast(), 1, false};
  StageSpec s2{terms({"1", "X1", "A1", "X1*A1", "X2"}), terms({"1", "X2", "A1"}), ActionCoding::contrast(), 1, false};
  if (spec.suite == Suite::two_stage_ternary) {
    Eigen::MatrixXd store;
    s2.coding = ActionCoding::custom(coding_of(spec, store));
  }
  d.stages = {s1, s2};
  if (spec.suite == Suite::three_stage_binary) {
    StageSpec s3{terms({"1", "X1", "A1", "X1*A1", "X2", "A2", "X2*A2", "A1*A2", "X3"}), terms({"1", "X3", "A2"}),
                 ActionCoding::contrast(), 1, false};
    d.stages.push_back(s3);
  }
  return d;
}

double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Dataset simulate(const GenModelSpec& spec, int n, std::uint64_t seed) {
  check_spec(spec);
  if (n < 1) throw ConfigError("sample size must be positive");
  Dataset ds;
  ds.spec = analysis_design(spec);
  const int T = spec.n_stages();
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  ds.trajectories.reserve(n);
  std::vector<double> x(T);
  std::vector<int> codes(T);
  for (int i = 0; i < n; ++i) {
    x[0] = unif(rng) < 0.5 ? 1.0 : -1.0;
    for (int t = 1; t <= T; ++t) {
      const int K = n_codes(spec, t);
      codes[t - 1] = std::min(K, 1 + static_cast<int>(unif(rng) * K));
      if (t < T) {
        const double a = pm(codes[t - 1]);
        x[t] = unif(rng) < expit(spec.delta[0] * x[t - 1] + spec.delta[1] * a) ? 1.0 : -1.0;
      }
    }
    ds.trajectories.push_back(make_trajectory(spec, x, codes, mean_reward(spec, x, codes) + noise(rng)));
  }
  return ds;
}

std::vector<SupportPoint> support(const GenModelSpec& spec) {
  check_spec(spec);
  const int T = spec.n_stages();
  std::vector<SupportPoint> out;
  std::vector<double> x(T);
  std::vector<int> codes(T);
  // depth-first over X1, A1, X2, A2, ...
  auto rec = [&](auto&& self, int t, double prob) -> void {
    if (t > T) {
      out.push_back({make_trajectory(spec, x, codes, mean_reward(spec, x, codes)), prob});
      return;
    }
    const int K = n_codes(spec, t);
    for (int a = 1; a <= K; ++a) {
      codes[t - 1] = a;
      const double pa = prob / K;
      if (t == T) {
        self(self, t + 1, pa);
        continue;
      }
      const double p1 = expit(spec.delta[0] * x[t - 1] + spec.delta[1] * pm(a));
      for (double xv : {1.0, -1.0}) {
        x[t] = xv;
        self(self, t + 1, pa * (xv > 0 ? p1 : 1.0 - p1));
      }
    }
  };
  for (double x1 : {1.0, -1.0}) {
    x[0] = x1;
    rec(rec, 1, 0.5);
  }
  return out;
}

std::vector<Eigen::VectorXd> population_coefficients(const GenModelSpec& spec) {
  const auto pts = support(spec);
  Dataset ds;
  ds.spec = analysis_design(spec);
  Eigen::VectorXd w(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ds.trajectories.push_back(pts[i].trajectory);
    w[i] = pts[i].probability;
  }
  const Design d = Design::build(ds);
  const int T = d.n_stages();
  std::vector<Eigen::VectorXd> beta(T);
  for (int t = T; t >= 1; --t) {
    const StageMatrices& sm = d.stage(t);
    const Eigen::VectorXd y = t == T ? sm.y : pseudo_outcome(d, t, beta[t]);
    const Eigen::MatrixXd BtW = sm.B.transpose() * w.asDiagonal();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(BtW * sm.B);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw NumericalError("population design is singular at stage " + std::to_string(t));
    beta[t - 1] = ldlt.solve(BtW * y);
  }
  return beta;
}

RegularityMeasures stage_regularity(const GenModelSpec& spec, int t) {
  if (t < 2 || t > spec.n_stages()) throw ConfigError("regularity is defined for stages 2..T");
  const auto pts = support(spec);
  const auto beta = population_coefficients(spec);
  const DesignSpec design = analysis_design(spec);
  double p = 0.0, m1 = 0.0;
  std::vector<double> effect(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Eigen::VectorXd q = code_rows(design, pts[i].trajectory, t) * beta[t - 1];
    effect[i] = q.size() == 2 ? 0.5 * (q[0] - q[1]) : q[2] - q[1];
    if (q.maxCoeff() - q.minCoeff() <= 1e-12) p += pts[i].probability;
    m1 += pts[i].probability * effect[i];
  }
  double var = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) var += pts[i].probability * (effect[i] - m1) * (effect[i] - m1);
  const double sd = std::sqrt(var);
  RegularityMeasures r;
  r.p = p;
  if (sd <= 1e-12) {
    r.phi = std::abs(m1) <= 1e-12 ? std::numeric_limits<double>::quiet_NaN()
                                  : std::copysign(std::numeric_limits<double>::infinity(), m1);
  } else {
    r.phi = m1 / sd;
  }
  return r;
}

RegularityMeasures regularity_measures(const GenModelSpec& spec) { return stage_regularity(spec, spec.n_stages()); }

}  // namespace dtrci

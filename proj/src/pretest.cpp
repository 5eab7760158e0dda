#include "dtrci/pretest.hpp"

#include "dtrci/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

namespace dtrci {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// n * diff^2 / var with 0/0 := 0; a negative variance is a numerical failure.
double standardized_square(double diff, double var, double n) {
  if (var < 0.0) {
    // tiny negative values are rounding noise of an exact zero
    if (var > -1e-14 * (1.0 + std::abs(diff))) var = 0.0;
    else throw NumericalError("negative variance in pretest");
  }
  const double num = n * diff * diff;
  if (var == 0.0) return num == 0.0 ? 0.0 : kInf;
  return num / var;
}

std::vector<int> accept_or_best(std::span<const double> stats, const Eigen::VectorXd& effects, double lambda,
                                bool& accepted) {
  const double min_stat = *std::min_element(stats.begin(), stats.end());
  std::vector<int> codes;
  accepted = stats.size() > 1 && min_stat <= lambda;
  if (accepted) {
    for (std::size_t i = 0; i < stats.size(); ++i)
      if (stats[i] <= lambda) codes.push_back(static_cast<int>(i) + 1);
  } else {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < effects.size(); ++a)
      if (effects[a] > effects[best]) best = a;
    codes.push_back(static_cast<int>(best) + 1);
  }
  return codes;
}
}  // namespace

LambdaRule LambdaRule::parse(std::string_view text) {
  if (text == "sqrt_loglog") return LambdaRule(Kind::sqrt_loglog);
  if (text == "loglog") return LambdaRule(Kind::loglog);
  if (text == "log") return LambdaRule(Kind::log);
  if (text == "sqrt_n") return LambdaRule(Kind::sqrt_n);
  if (text == "n") return LambdaRule(Kind::linear_n);
  if (text.starts_with("fixed:")) {
    std::string_view v = text.substr(6);
    double x = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size() || !(x >= 0.0) || !std::isfinite(x))
      throw ConfigError("bad fixed lambda '" + std::string(text) + "'");
    return LambdaRule(Kind::fixed, x);
  }
  throw ConfigError("unknown lambda rule '" + std::string(text) + "'");
}

std::string LambdaRule::name() const {
  switch (kind_) {
    case Kind::sqrt_loglog: return "sqrt_loglog";
    case Kind::loglog: return "loglog";
    case Kind::log: return "log";
    case Kind::sqrt_n: return "sqrt_n";
    case Kind::linear_n: return "n";
    case Kind::fixed: {
      char buf[64];
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, fixed_);
      return "fixed:" + std::string(buf, p);
    }
  }
  return "loglog";
}

double LambdaRule::value(double n) const {
  switch (kind_) {
    case Kind::sqrt_loglog:
    case Kind::loglog:
    case Kind::log:
      if (n < 3.0) throw ConfigError("logarithmic lambda rules need n >= 3");
      break;
    default:
      if (n <= 0.0) throw ConfigError("lambda rules need n > 0");
  }
  switch (kind_) {
    case Kind::sqrt_loglog: return std::sqrt(std::log(std::log(n)));
    case Kind::loglog: return std::log(std::log(n));
    case Kind::log: return std::log(n);
    case Kind::sqrt_n: return std::sqrt(n);
    case Kind::linear_n: return n;
    case Kind::fixed: return fixed_;
  }
  return 0.0;
}

double lambda_value(const LambdaRule& rule, double n) { return rule.value(n); }

double pretest_binary(const Eigen::VectorXd& h, const Eigen::VectorXd& beta, const Eigen::MatrixXd& cov_scaled,
                      double n) {
  if (h.size() != beta.size() || cov_scaled.rows() != h.size() || cov_scaled.cols() != h.size())
    throw ConfigError("pretest dimensions disagree");
  return standardized_square(h.dot(beta), h.dot(cov_scaled * h), n);
}

std::vector<double> pretest_multi(const Eigen::VectorXd& h, const std::vector<Eigen::VectorXd>& betas,
                                  const PairwiseCovProvider& pairwise, double n) {
  const int K = static_cast<int>(betas.size());
  if (K == 0) throw ConfigError("pretest needs at least one treatment");
  std::vector<double> stats(K, kInf);
  if (K == 1) return stats;
  Eigen::VectorXd eff(K);
  for (int i = 0; i < K; ++i) eff[i] = h.dot(betas[i]);
  for (int i = 0; i < K; ++i) {
    int k = -1;
    for (int j = 0; j < K; ++j)
      if (j != i && (k < 0 || eff[j] > eff[k])) k = j;
    const Eigen::MatrixXd zeta = pairwise(i, k);
    stats[i] = standardized_square(eff[i] - eff[k], h.dot(zeta * h), n);
  }
  return stats;
}

TreatSet treat_set(const Eigen::VectorXd& h, const std::vector<Eigen::VectorXd>& betas, std::span<const double> stats,
                   double lambda) {
  if (stats.size() != betas.size() || betas.empty()) throw ConfigError("treat_set sizes disagree");
  Eigen::VectorXd eff(static_cast<Eigen::Index>(betas.size()));
  for (std::size_t i = 0; i < betas.size(); ++i) eff[i] = h.dot(betas[i]);
  TreatSet ts;
  ts.codes = accept_or_best(stats, eff, lambda, ts.accepted);
  return ts;
}

std::vector<double> pretest_rows(const Eigen::MatrixXd& rows, const Eigen::VectorXd& beta,
                                 const Eigen::MatrixXd& cov_scaled, double n) {
  const int K = static_cast<int>(rows.rows());
  if (K == 2) {
    const double s = pretest_binary((rows.row(0) - rows.row(1)).transpose(), beta, cov_scaled, n);
    return {s, s};
  }
  // Each code as a one-dimensional "treatment block" holding its effect.
  std::vector<Eigen::VectorXd> effects(K, Eigen::VectorXd(1));
  for (int a = 0; a < K; ++a) effects[a][0] = rows.row(a).dot(beta);
  PairwiseCovProvider zeta = [&](int i, int k) {
    Eigen::VectorXd d = (rows.row(i) - rows.row(k)).transpose();
    return Eigen::MatrixXd::Constant(1, 1, d.dot(cov_scaled * d));
  };
  return pretest_multi(Eigen::VectorXd::Ones(1), effects, zeta, n);
}

TreatSet treat_set_rows(const Eigen::MatrixXd& rows, const Eigen::VectorXd& beta, std::span<const double> stats,
                        double lambda) {
  if (static_cast<Eigen::Index>(stats.size()) != rows.rows()) throw ConfigError("treat_set sizes disagree");
  TreatSet ts;
  ts.codes = accept_or_best(stats, rows * beta, lambda, ts.accepted);
  return ts;
}

}  // namespace dtrci

#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dtrci {

class LambdaRule {
 public:
  enum class Kind { sqrt_loglog, loglog, log, sqrt_n, linear_n, fixed };

  LambdaRule() = default;
  explicit LambdaRule(Kind kind, double fixed_value = 0.0) : kind_(kind), fixed_(fixed_value) {}
  // "sqrt_loglog", "loglog", "log", "sqrt_n", "n", or "fixed:<value>".
  static LambdaRule parse(std::string_view text);

  Kind kind() const { return kind_; }
  std::string name() const;
  double value(double n) const;

 private:
  Kind kind_ = Kind::loglog;
  double fixed_ = 0.0;
};

// Logarithmic rules need n >= 3.
double lambda_value(const LambdaRule& rule, double n);

// n (h'beta)^2 / (h' cov h), with 0/0 read as 0.
double pretest_binary(const Eigen::VectorXd& h, const Eigen::VectorXd& beta, const Eigen::MatrixXd& cov_scaled,
                      double n);

// Scaled covariance of beta_i - beta_k for 0-based treatment blocks i, k.
using PairwiseCovProvider = std::function<Eigen::MatrixXd(int i, int k)>;

// T_i = n (h'beta_i - max_{j != i} h'beta_j)^2 / (h' zeta_{i,k} h), k the
// maximising competitor (lowest index on ties). A single treatment gives +inf.
std::vector<double> pretest_multi(const Eigen::VectorXd& h, const std::vector<Eigen::VectorXd>& betas,
                                  const PairwiseCovProvider& pairwise, double n);

// Accepted treatments (1-based codes). If min T <= lambda, every code with
// T_i <= lambda; otherwise the single best code by h'beta_i.
struct TreatSet {
  std::vector<int> codes;
  bool accepted = false;  // min T <= lambda
};
TreatSet treat_set(const Eigen::VectorXd& h, const std::vector<Eigen::VectorXd>& betas, std::span<const double> stats,
                   double lambda);

// Pretest in terms of full design rows: row a-1 of `rows` is B(h, a), so the
// effect of code a is rows(a-1,:) . beta and the variance of a difference is
// d' cov d / n. Two codes use the binary statistic on rows(0) - rows(1).
std::vector<double> pretest_rows(const Eigen::MatrixXd& rows, const Eigen::VectorXd& beta,
                                 const Eigen::MatrixXd& cov_scaled, double n);
TreatSet treat_set_rows(const Eigen::MatrixXd& rows, const Eigen::VectorXd& beta, std::span<const double> stats,
                        double lambda);

}  // namespace dtrci

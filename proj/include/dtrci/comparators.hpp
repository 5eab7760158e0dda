#pragma once

#include "dtrci/bounds.hpp"
#include "dtrci/design.hpp"
#include "dtrci/pretest.hpp"
#include "dtrci/qlearn.hpp"
#include "dtrci/resample.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dtrci {

// Pretest-and-plug-in statistic: the bound process evaluated at a zero
// nuisance parameter, so accepted units contribute max over the treat set
// of the centred effect.
double ppe_statistic(const Design& d, const QFit& fit, const Reference& center, double lambda,
                     const Eigen::VectorXd& c, int t = 1);
Interval ppe_interval(const Design& d, const QFit& fit, const Eigen::VectorXd& c, int t, const LambdaRule& rule,
                      const BootstrapPlan& plan, double alpha);

// Shrinkage of |x| in the soft-thresholded max, x the half difference of the
// two codes' fitted values and v = n Var(x):
//   printed: (1 - 3 v / (n |x|))_+    squared: (1 - 3 v / (n x^2))_+
enum class StVariant { printed, squared };
StVariant parse_st_variant(std::string_view text);
std::string to_string(StVariant v);

// Stage-1 pseudo-outcome with the soft-thresholded stage-2 maximum. Needs
// T = 2 and two codes at stage 2.
Eigen::VectorXd st_pseudo_outcome(const Design& d, const OlsFit& stage2, StVariant variant);
Eigen::VectorXd st_stage1_coefficients(const Design& d, const QFit& fit, StVariant variant);
Interval st_interval(const Design& d, const Eigen::VectorXd& c, StVariant variant, const BootstrapPlan& plan,
                     double alpha);

// Estimators of max(mu1, mu2) from X_i ~ N(mu_i, 1), d = x1 - x2.
struct ToyEstimates {
  double mle = 0.0;
  double soft = 0.0;
  double hard = 0.0;
};
ToyEstimates toy_estimates(double x1, double x2, double lambda);

struct ToyCell {
  std::string method;
  double mu_diff = 0.0;
  double lambda = 0.0;  // the estimator ignores it for method "mle"
  double bias = 0.0;
  double mse = 0.0;
  int reps = 0;
  double mc_se = 0.0;  // standard error of the bias
};

// mu1 = mu_diff, mu2 = 0. One row per (mu_diff, lambda, method), methods in
// the order mle, soft, hard. Draws are shared across lambdas and methods
// within one mu_diff; cell m uses the seed derived from (seed, m).
std::vector<ToyCell> toy_sweep(const std::vector<double>& mu_diff, const std::vector<double>& lambdas, int reps,
                               std::uint64_t seed, int threads = 1);
void write_toy_csv(std::ostream& out, const std::vector<ToyCell>& cells);

}  // namespace dtrci

#include "dtrci/comparators.hpp"

#include "dtrci/errors.hpp"
#include "dtrci/parallel.hpp"
#include "dtrci/rng.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace dtrci {

double ppe_statistic(const Design& d, const QFit& fit, const Reference& center, double lambda,
                     const Eigen::VectorXd& c, int t) {
  Eigen::Index len = 0;
  for (int s = t + 1; s <= fit.n_stages(); ++s) len += fit.beta(s).size();
  BoundProcess proc(d, fit, center, t);
  return proc.evaluate(lambda, c, {Eigen::VectorXd::Zero(len)}).upper;
}

Interval ppe_interval(const Design& d, const QFit& fit, const Eigen::VectorXd& c, int t, const LambdaRule& rule,
                      const BootstrapPlan& plan, double alpha) {
  if (t < 1 || t >= fit.n_stages()) throw UnsupportedMethodError("PPE targets stages before the last");
  const double lambda = lambda_value(rule, d.n());
  const Reference center = fit.coefficients();
  std::vector<double> stat(plan.n_boot);
  const int redraws = run_bootstrap(d, plan, [&](const Replicate& rep) {
    stat[rep.index] = ppe_statistic(*rep.design, *rep.fit, center, lambda, c, t);
  });
  Interval iv = aci_from_bounds(contrast_value(fit, t, c), d.n(), stat, stat, alpha);
  iv.method = "PPE";
  iv.redraws = redraws;
  return iv;
}

StVariant parse_st_variant(std::string_view text) {
  if (text == "printed") return StVariant::printed;
  if (text == "squared") return StVariant::squared;
  throw ConfigError("unknown soft-thresholding variant '" + std::string(text) + "'");
}

std::string to_string(StVariant v) { return v == StVariant::printed ? "printed" : "squared"; }

Eigen::VectorXd st_pseudo_outcome(const Design& d, const OlsFit& stage2, StVariant variant) {
  if (d.n_stages() != 2) throw UnsupportedMethodError("soft thresholding is implemented for two stages only");
  const StageMatrices& s1 = d.stage(1);
  const StageMatrices& s2 = d.stage(2);
  if (s2.K != 2) throw UnsupportedMethodError("soft thresholding needs two treatments at stage 2");
  const double n = static_cast<double>(stage2.n);
  const Eigen::VectorXd& beta = stage2.beta;
  Eigen::VectorXd out = s1.y;
  for (int r = 0; r < s1.rows(); ++r) {
    const int nr = s1.next_row[r];
    if (nr < 0) continue;
    auto rows = s2.codes(nr);
    const double q1 = rows.row(0).dot(beta);
    const double q2 = rows.row(1).dot(beta);
    const double x = 0.5 * (q1 - q2);
    const Eigen::VectorXd diff = 0.5 * (rows.row(0) - rows.row(1)).transpose();
    const double v = diff.dot(stage2.cov_beta_scaled * diff);
    const double ax = std::abs(x);
    double factor = 0.0;
    if (ax > 0.0) {
      const double denom = variant == StVariant::printed ? n * ax : n * x * x;
      factor = std::max(0.0, 1.0 - 3.0 * v / denom);
    }
    out[r] += 0.5 * (q1 + q2) + ax * factor;
  }
  return out;
}

Eigen::VectorXd st_stage1_coefficients(const Design& d, const QFit& fit, StVariant variant) {
  return fit_ols(d.stage(1).B, st_pseudo_outcome(d, fit.stage(2).ols, variant)).beta;
}

Interval st_interval(const Design& d, const Eigen::VectorXd& c, StVariant variant, const BootstrapPlan& plan,
                     double alpha) {
  auto stat = [&](const Design& dd, const QFit& f) { return c.dot(st_stage1_coefficients(dd, f, variant)); };
  Interval iv = cpb_interval(d, stat, plan, alpha);
  iv.method = "ST";
  return iv;
}

ToyEstimates toy_estimates(double x1, double x2, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("threshold must be non-negative");
  const double mean = 0.5 * (x1 + x2);
  const double ad = std::abs(x1 - x2);
  ToyEstimates e;
  e.mle = mean + 0.5 * ad;
  e.soft = mean + (ad > 0.0 ? std::max(0.0, 1.0 - lambda / ad) : 0.0) * 0.5 * ad;
  e.hard = mean + (ad >= lambda ? 0.5 * ad : 0.0);
  return e;
}

std::vector<ToyCell> toy_sweep(const std::vector<double>& mu_diff, const std::vector<double>& lambdas, int reps,
                               std::uint64_t seed, int threads) {
  if (reps < 2) throw ConfigError("toy sweep needs at least two replications");
  for (double l : lambdas)
    if (!(l >= 0.0)) throw ConfigError("toy thresholds must be non-negative");
  if (lambdas.empty()) throw ConfigError("toy sweep needs at least one threshold");
  const std::size_t per_mu = 3 * lambdas.size();
  std::vector<ToyCell> cells(mu_diff.size() * per_mu);
  parallel_for(mu_diff.size(), threads, [&](std::size_t m) {
    const double mu = mu_diff[m];
    const double theta = std::max(mu, 0.0);
    Rng rng(derive_seed(seed, m));
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> x1(reps), x2(reps);
    for (int r = 0; r < reps; ++r) {
      x1[r] = mu + z(rng);
      x2[r] = z(rng);
    }
    // one pass per threshold accumulates all three estimators on the same draws
    std::size_t k = m * per_mu;
    for (double lambda : lambdas) {
      double sum[3] = {0, 0, 0}, sum2[3] = {0, 0, 0};
      for (int r = 0; r < reps; ++r) {
        const ToyEstimates e = toy_estimates(x1[r], x2[r], lambda);
        const double err[3] = {e.mle - theta, e.soft - theta, e.hard - theta};
        for (int j = 0; j < 3; ++j) {
          sum[j] += err[j];
          sum2[j] += err[j] * err[j];
        }
      }
      static const char* names[3] = {"mle", "soft", "hard"};
      for (int j = 0; j < 3; ++j) {
        const double mean = sum[j] / reps;
        const double var = std::max(0.0, (sum2[j] - reps * mean * mean) / (reps - 1));
        cells[k++] = ToyCell{names[j], mu, lambda, mean, sum2[j] / reps, reps, std::sqrt(var / reps)};
      }
    }
  });
  return cells;
}

void write_toy_csv(std::ostream& out, const std::vector<ToyCell>& cells) {
  out << "method,mu_diff,lambda,bias,mse,reps,mc_se\n";
  out << std::setprecision(10);
  for (const auto& c : cells) {
    out << c.method << ',' << c.mu_diff << ',' << c.lambda << ',' << c.bias << ',' << c.mse << ',' << c.reps << ',' << c.mc_se << '\n';
  }
}

}  // namespace dtrci

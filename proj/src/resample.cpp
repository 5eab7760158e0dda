#include "dtrci/resample.hpp"

#include "dtrci/errors.hpp"
#include "dtrci/parallel.hpp"
#include "dtrci/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace dtrci {

namespace {
void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
}
}  // namespace

std::vector<int> resample_indices(int n, std::uint64_t seed) {
  if (n < 1) throw DataError("cannot resample an empty dataset");
  Rng rng(seed);
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::vector<int> idx(n);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

Dataset resample(const Dataset& ds, std::uint64_t seed) {
  Dataset out;
  out.spec = ds.spec;
  for (int i : resample_indices(ds.n(), seed)) out.trajectories.push_back(ds.trajectories[i]);
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw NumericalError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("quantile level outside [0, 1]");
  const auto B = static_cast<long>(values.size());
  // the small offset keeps q*B = 975.0000000001 at 975
  long k = static_cast<long>(std::ceil(q * static_cast<double>(B) - 1e-9));
  k = std::clamp(k, 1L, B);
  auto it = values.begin() + (k - 1);
  std::nth_element(values.begin(), it, values.end());
  return *it;
}

int run_bootstrap(const Design& d, const BootstrapPlan& plan, const std::function<void(const Replicate&)>& visit) {
  if (plan.n_boot < 1) throw ConfigError("n_boot must be positive");
  if (plan.max_redraws < 0) throw ConfigError("max_redraws must be non-negative");
  std::atomic<int> redraws{0};
  parallel_for(static_cast<std::size_t>(plan.n_boot), plan.threads, [&](std::size_t b) {
    const std::uint64_t rep_seed = derive_seed(plan.seed, b);
    for (int attempt = 0;; ++attempt) {
      const std::uint64_t draw_seed = attempt == 0 ? rep_seed : derive_seed(rep_seed, Stream::redraw, attempt);
      auto idx = resample_indices(d.n(), draw_seed);
      Design rd = d.select(idx);
      std::optional<QFit> fit;
      try {
        fit = fit_qlearning(rd);
      } catch (const SingularDesignError&) {
        if (attempt >= plan.max_redraws)
          throw NumericalError("bootstrap replicate " + std::to_string(b) + " singular after " +
                               std::to_string(attempt + 1) + " draws");
        ++redraws;
        continue;
      }
      visit(Replicate{static_cast<int>(b), rep_seed, &rd, &*fit});
      return;
    }
  });
  return redraws.load();
}

Interval aci_from_bounds(double estimate, double n, const std::vector<double>& upper,
                         const std::vector<double>& lower, double alpha) {
  check_alpha(alpha);
  const double rn = std::sqrt(n);
  const double u = quantile(upper, 1.0 - alpha / 2.0);
  const double l = quantile(lower, alpha / 2.0);
  return Interval{estimate - u / rn, estimate - l / rn, 1.0 - alpha, "ACI"};
}

Interval cpb_from_draws(double estimate, const std::vector<double>& draws, double alpha) {
  check_alpha(alpha);
  std::vector<double> centred(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) centred[i] = draws[i] - estimate;
  const double hi_q = quantile(centred, 1.0 - alpha / 2.0);
  const double lo_q = quantile(centred, alpha / 2.0);
  return Interval{estimate - hi_q, estimate - lo_q, 1.0 - alpha, "CPB"};
}

BoundProcess::BoundProcess(const Design& d, const QFit& fit, const Reference& center, int t) {
  if (fit.n_stages() == 2 && t == 1 && fit.stage(2).n_treatments == 2) two_.emplace(d, fit, center);
  else general_.emplace(d, fit, center, t);
}

BoundsResult BoundProcess::evaluate(double lambda, const Eigen::VectorXd& c,
                                    const std::vector<Eigen::VectorXd>& candidates) const {
  return two_ ? two_->evaluate(lambda, c, candidates) : general_->evaluate(lambda, c, candidates);
}

Interval aci_interval(const Design& d, const QFit& fit, const Eigen::VectorXd& c, int t, const LambdaRule& rule,
                      const GammaSearch& search, const BootstrapPlan& plan, double alpha) {
  check_alpha(alpha);
  if (t < 1 || t >= fit.n_stages())
    throw UnsupportedMethodError("the adaptive interval targets stages before the last; use CPB at the last stage");
  const double estimate = contrast_value(fit, t, c);
  const double lambda = lambda_value(rule, d.n());
  const Reference center = fit.coefficients();
  std::vector<double> upper(plan.n_boot), lower(plan.n_boot);
  const int redraws = run_bootstrap(d, plan, [&](const Replicate& rep) {
    GammaSearch gs = search;
    gs.rng_seed = derive_seed(rep.seed, Stream::gamma, search.rng_seed);
    BoundProcess proc(*rep.design, *rep.fit, center, t);
    BoundsResult r = proc.evaluate(lambda, c, gamma_candidates(*rep.fit, center, t, gs));
    upper[rep.index] = r.upper;
    lower[rep.index] = r.lower;
  });
  Interval iv = aci_from_bounds(estimate, d.n(), upper, lower, alpha);
  iv.redraws = redraws;
  return iv;
}

Interval aci_interval(const Dataset& ds, const QFit& fit, const Eigen::VectorXd& c, const LambdaRule& rule,
                      const GammaSearch& search, const BootstrapPlan& plan, double alpha) {
  return aci_interval(Design::build(ds), fit, c, 1, rule, search, plan, alpha);
}

Interval cpb_interval(const Design& d, const std::function<double(const Design&, const QFit&)>& statistic,
                      const BootstrapPlan& plan, double alpha) {
  check_alpha(alpha);
  const double estimate = statistic(d, fit_qlearning(d));
  std::vector<double> draws(plan.n_boot);
  const int redraws =
      run_bootstrap(d, plan, [&](const Replicate& rep) { draws[rep.index] = statistic(*rep.design, *rep.fit); });
  Interval iv = cpb_from_draws(estimate, draws, alpha);
  iv.redraws = redraws;
  return iv;
}

Interval cpb_interval(const Dataset& ds, const std::function<double(const Design&, const QFit&)>& statistic,
                      const BootstrapPlan& plan, double alpha) {
  return cpb_interval(Design::build(ds), statistic, plan, alpha);
}

}  // namespace dtrci

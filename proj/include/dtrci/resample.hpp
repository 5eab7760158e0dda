#pragma once

#include "dtrci/bounds.hpp"
#include "dtrci/dataio.hpp"
#include "dtrci/design.hpp"
#include "dtrci/pretest.hpp"
#include "dtrci/qlearn.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dtrci {

struct BootstrapPlan {
  int n_boot = 1000;
  std::uint64_t seed = 0;
  int max_redraws = 25;  // per replicate, for resamples with a singular fit
  int threads = 1;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double nominal = 0.95;
  std::string method;
  int redraws = 0;  // singular resamples that were redrawn

  double width() const { return hi - lo; }
  bool contains(double x) const { return lo <= x && x <= hi; }
};

// n indices drawn uniformly with replacement.
std::vector<int> resample_indices(int n, std::uint64_t seed);
Dataset resample(const Dataset& ds, std::uint64_t seed);

// Order statistic ceil(q * B) (1-based) of the values; q in [0, 1].
double quantile(std::vector<double> values, double q);

// One bootstrap replicate: the resampled design and its Q-learning fit.
struct Replicate {
  int index = 0;
  std::uint64_t seed = 0;  // seed of the accepted draw's replicate stream
  const Design* design = nullptr;
  const QFit* fit = nullptr;
};

// Draws plan.n_boot replicates of `d` and calls visit(rep) for each. A
// resample whose fit is singular is redrawn from a derived seed; more than
// plan.max_redraws failures for one replicate throws NumericalError. Visits
// may run concurrently when plan.threads > 1; visit must write only to the
// slot of rep.index. Returns the number of redraws.
int run_bootstrap(const Design& d, const BootstrapPlan& plan, const std::function<void(const Replicate&)>& visit);

// [c'b - u/sqrt(n), c'b - l/sqrt(n)] from bootstrap bounds U, L centred at
// the original estimates. Targets before the last stage only.
Interval aci_interval(const Design& d, const QFit& fit, const Eigen::VectorXd& c, int t, const LambdaRule& rule,
                      const GammaSearch& search, const BootstrapPlan& plan, double alpha);
Interval aci_interval(const Dataset& ds, const QFit& fit, const Eigen::VectorXd& c, const LambdaRule& rule,
                      const GammaSearch& search, const BootstrapPlan& plan, double alpha);

// Centred percentile interval [est - q_hi, est - q_lo] of (stat* - est).
Interval cpb_from_draws(double estimate, const std::vector<double>& draws, double alpha);
Interval cpb_interval(const Design& d, const std::function<double(const Design&, const QFit&)>& statistic,
                      const BootstrapPlan& plan, double alpha);
Interval cpb_interval(const Dataset& ds, const std::function<double(const Design&, const QFit&)>& statistic,
                      const BootstrapPlan& plan, double alpha);

// Interval from bootstrap bounds (upper, lower) on sqrt(n)(estimate - truth).
Interval aci_from_bounds(double estimate, double n, const std::vector<double>& upper,
                         const std::vector<double>& lower, double alpha);

// The bound process for target stage t: the two-stage form when T = 2 and
// the last stage has two codes, the general recursion otherwise.
class BoundProcess {
 public:
  BoundProcess(const Design& d, const QFit& fit, const Reference& center, int t);
  BoundsResult evaluate(double lambda, const Eigen::VectorXd& c, const std::vector<Eigen::VectorXd>& candidates) const;

 private:
  std::optional<TwoStageBounds> two_;
  std::optional<GeneralBounds> general_;
};

}  // namespace dtrci

#pragma once

#include "dtrci/bounds.hpp"
#include "dtrci/comparators.hpp"
#include "dtrci/genmodels.hpp"
#include "dtrci/pretest.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace dtrci {

enum class Method { aci, cpb, ppe, st };
std::string to_string(Method m);
Method parse_method(std::string_view text);

// A linear combination c' beta_t of the stage-t coefficients.
struct Target {
  std::string name;
  int stage = 1;
  Eigen::VectorXd c;
};

// "beta111" (stage-1 treatment effect), "beta101" (stage-1 intercept), or
// "stage<t>:<j>" for the j-th (1-based) coefficient of stage t.
Target target_by_name(std::string_view name, const DesignSpec& design);

// c' beta*_t from the population fit of the working model.
double true_parameter(const GenModelSpec& spec, int t, const Eigen::VectorXd& c);

struct ExperimentConfig {
  std::vector<GenModelSpec> models;
  std::vector<Method> methods{Method::aci, Method::cpb};
  std::vector<std::string> targets{"beta111"};
  int n = 150;
  int mc_reps = 200;
  int n_boot = 500;
  std::uint64_t seed = 1;
  std::vector<LambdaRule> lambda_rules{LambdaRule(LambdaRule::Kind::loglog)};
  double alpha = 0.05;
  GammaSearch search;
  StVariant st_variant = StVariant::printed;
  int max_redraws = 25;
  int threads = 1;
  double failure_budget = 0.01;  // tolerated share of failed Monte Carlo replications

  void validate() const;
};

// "desk": 200 replications x 500 resamples; "paper": 1000 x 1000.
void apply_preset(ExperimentConfig& cfg, std::string_view preset);

struct CellResult {
  std::string model;
  std::string method;
  std::string target;
  std::string lambda_rule;  // "-" for methods without a pretest
  double truth = 0.0;
  double coverage = 0.0;
  double width = 0.0;
  double mc_se = 0.0;
  bool flag = false;  // coverage significantly below nominal
  int reps = 0;       // successful replications
  int failed = 0;
};

struct RepRecord {
  std::string model;
  int rep = 0;
  std::uint64_t seed = 0;
  std::string method;
  std::string target;
  std::string lambda_rule;
  double lo = 0.0;
  double hi = 0.0;
  bool covered = false;
  int redraws = 0;
  std::string error;  // non-empty for a failed replication
};

struct ExperimentReport {
  std::vector<CellResult> cells;
  std::vector<RepRecord> reps;
  bool budget_exceeded = false;
  double seconds = 0.0;
};

using ProgressFn = std::function<void(int done, int total)>;

// Replications run on cfg.threads workers; every stream is derived from
// (seed, model name, replication), so results do not depend on threads.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {});

// One-sided exact binomial test of H0: coverage >= nominal at `level`.
bool flag_significance(double coverage, int reps, double nominal, double level = 0.05);

void write_aggregate_csv(std::ostream& out, const ExperimentReport& report, const ExperimentConfig& cfg);
void write_rep_log(std::ostream& out, const ExperimentReport& report);
// Coverage (and width) table with one row per model; '*' marks flagged cells.
void write_table(std::ostream& out, const ExperimentReport& report);

}  // namespace dtrci

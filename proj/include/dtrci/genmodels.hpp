#pragma once

#include "dtrci/dataio.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dtrci {

// Binary covariates and treatments coded +-1 (code 1 is +1). X1 is uniform;
// P(X_{s+1} = 1) = expit(delta_1 X_s + delta_2 A_s); only the last stage
// has a non-zero reward, with N(0, 1) noise.
//   two_stage_binary:   Y2 = g1 + g2 X1 + g3 A1 + g4 X1 A1 + g5 A2 + g6 X2 A2 + g7 A1 A2
//   two_stage_ternary:  Y2 = x1 + x2 X1 + x3 A1 + x4 X1 A1 + (x5, x6).a2 + X2 (x7, x8).a2
//                            + A1 (x9, x10).a2,  a2 a row of the 3 x 2 stage-2 coding
//   three_stage_binary: Y3 = x1 + x2 X1 + x3 A1 + x4 X1 A1 + x5 A2 + x6 X2 A2 + x7 A1 A2
//                            + x8 A3 + x9 X3 A3 + x10 A2 A3
enum class Suite { two_stage_binary, two_stage_ternary, three_stage_binary };

std::string suite_name(Suite s);
Suite parse_suite(std::string_view text);

struct GenModelSpec {
  Suite suite = Suite::two_stage_binary;
  std::string label;  // "ex1" .. "ex6", "exA", "exB", "exC", or user supplied
  std::vector<double> effects;
  std::array<double, 2> delta{0.5, 0.5};
  Eigen::MatrixXd ternary_coding;  // 3 x 2; empty means the default

  int n_stages() const { return suite == Suite::three_stage_binary ? 3 : 2; }
  std::string name() const;  // "<suite>:<label>"
};

// Default stage-2 coding of the ternary suite: rows (0,-1), (-1,.5), (1,.5).
Eigen::MatrixXd default_ternary_coding();

// Built-in examples of a suite, in table order.
std::vector<GenModelSpec> suite_models(Suite s);
// "ex3", "binary:exA", "ternary:ex1", "three_stage:exC" (label case-insensitive).
GenModelSpec model_by_name(std::string_view name);

// Working model used for estimation, with contrast coding for binary stages.
DesignSpec analysis_design(const GenModelSpec& spec);

double expit(double x);

Dataset simulate(const GenModelSpec& spec, int n, std::uint64_t seed);

// Every (X, A) history with its probability; rewards hold conditional means.
struct SupportPoint {
  Trajectory trajectory;
  double probability = 0.0;
};
std::vector<SupportPoint> support(const GenModelSpec& spec);

// Population Q-learning coefficients of the working model, stage by stage.
std::vector<Eigen::VectorXd> population_coefficients(const GenModelSpec& spec);

// p: probability that all codes have the same population Q-value at the
// stage; phi: mean over standard deviation of the treatment effect (half the
// code-1 minus code-2 difference for two codes, code 3 minus code 2 for
// three). phi is NaN for 0/0 and +-inf for a degenerate non-zero effect.
struct RegularityMeasures {
  double p = 0.0;
  double phi = 0.0;
};
RegularityMeasures regularity_measures(const GenModelSpec& spec);  // last stage
RegularityMeasures stage_regularity(const GenModelSpec& spec, int t);

}  // namespace dtrci

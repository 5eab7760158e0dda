#pragma once

#include "dtrci/design.hpp"
#include "dtrci/qlearn.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace dtrci {

// Candidates for the nuisance parameter of every downstream stage, drawn
// uniformly in a box centred at sqrt(n) * centre with half-width
// multiplier * sqrt(diag(cov_beta_scaled)) on interaction coordinates.
// Main-effect coordinates of a candidate are always zero.
struct GammaSearch {
  int n_gamma = 1000;
  double box_halfwidth_multiplier = 5.0;
  bool include_center = true;  // first candidate is the exact centre
  std::uint64_t rng_seed = 0;
};

// Reference (centring) coefficients for every stage, 0-based by stage.
using Reference = std::vector<Eigen::VectorXd>;

struct BoundsResult {
  double upper = 0.0;
  double lower = 0.0;
  Eigen::VectorXd gamma_at_sup;
  Eigen::VectorXd gamma_at_inf;
  double accept_fraction = 0.0;  // share of downstream unit-stages in the non-regular branch
  double smooth_part = 0.0;
  double plug_part = 0.0;  // rejected-unit contribution at the supremum
};

// Concatenated candidates (gamma_{t+1}, ..., gamma_T); length sum of p_s.
std::vector<Eigen::VectorXd> gamma_candidates(const QFit& fit, const Reference& center, int t,
                                              const GammaSearch& search);

// c' W_n for the two-stage bound: the smooth part centred at `center`.
double smooth_term(const Design& d, const QFit& fit, const Reference& center, const Eigen::VectorXd& c);

// Two-stage bound on c' sqrt(n)(beta_1 - center_1). Units are accepted when
// min pretest <= lambda; the kernel takes the max over all codes.
class TwoStageBounds {
 public:
  TwoStageBounds(const Design& d, const QFit& fit, const Reference& center);
  BoundsResult evaluate(double lambda, const Eigen::VectorXd& c, const std::vector<Eigen::VectorXd>& candidates) const;
  const Eigen::VectorXd& smooth() const { return W_; }

 private:
  struct Group {
    Eigen::MatrixXd G;   // interaction block of the code rows, K x q
    Eigen::VectorXd M;   // Sigma_1^{-1} sum B_1 / n_1
    Eigen::VectorXd GV;  // G V
    std::vector<double> stats;
    double U = 0.0;
    int count = 0;
  };
  Eigen::VectorXd W_;
  std::vector<Group> groups_;
  Eigen::Index main_dim_ = 0;
  Eigen::Index dim_ = 0;
};

// Recursive bound for target stage t < T <= 3 with the accepted branch
// restricted to the pretest set plus the centre's optimal codes.
class GeneralBounds {
 public:
  GeneralBounds(const Design& d, const QFit& fit, const Reference& center, int t);
  BoundsResult evaluate(double lambda, const Eigen::VectorXd& c, const std::vector<Eigen::VectorXd>& candidates) const;
  int target() const { return t_; }

 private:
  struct Group {
    Eigen::MatrixXd R;  // full code rows at the downstream stage
    Eigen::VectorXd M;  // Sigma_{s-1}^{-1} sum B_{s-1} / n_{s-1}
    Eigen::VectorXd RV;
    std::vector<double> stats;
    std::vector<char> optimal_at_center;
    double U = 0.0;
    int best = 0;  // 0-based fitted argmax
    int count = 0;
  };
  struct Level {
    int s = 0;                 // downstream stage
    Eigen::VectorXd V;         // sqrt(n)(beta_s - center_s)
    Eigen::VectorXd W;         // W'_{s-1}
    Eigen::Index offset = 0;   // position of gamma_s in a candidate
    std::vector<Group> groups;
  };
  int t_ = 1;
  std::vector<Level> levels_;  // levels_[0] is stage t+1
};

BoundsResult bounds_two_stage(const Design& d, const QFit& fit, const Reference& center, double lambda,
                              const Eigen::VectorXd& c, const GammaSearch& search);
BoundsResult bounds_two_stage(const Design& d, const QFit& fit, const Reference& center, double lambda,
                              const Eigen::VectorXd& c, const std::vector<Eigen::VectorXd>& candidates);

BoundsResult bounds_general(const Design& d, const QFit& fit, const Reference& center, double lambda,
                            const Eigen::VectorXd& c, int t, const GammaSearch& search);
BoundsResult bounds_general(const Design& d, const QFit& fit, const Reference& center, double lambda,
                            const Eigen::VectorXd& c, int t, const std::vector<Eigen::VectorXd>& candidates);

}  // namespace dtrci

#pragma once

#include <Eigen/Dense>

namespace dtrci {

inline constexpr double kMaxCondition = 1e10;

// Least-squares fit of y on B. With n rows:
//   gram = B'B / n,  sigma2 = RSS / n,  cov_beta_scaled = sigma2 * gram^{-1},
// so cov_beta_scaled / n estimates Cov(beta).
struct OlsFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd gram;
  Eigen::MatrixXd gram_inv;
  Eigen::MatrixXd cov_beta_scaled;
  double sigma2 = 0.0;
  double condition = 1.0;
  Eigen::Index n = 0;

  Eigen::Index dim() const { return beta.size(); }
};

// Throws SingularDesignError when cond(B) exceeds max_condition or n < p.
OlsFit fit_ols(const Eigen::MatrixXd& B, const Eigen::VectorXd& y, double max_condition = kMaxCondition);

struct Block {
  Eigen::Index start = 0;
  Eigen::Index size = 0;
};

Eigen::MatrixXd interaction_cov(const OlsFit& fit, Block block);

// Scaled covariance of (beta_i - beta_k) for two equally sized blocks:
// S_ii - S_ik - S_ki + S_kk.
Eigen::MatrixXd pairwise_cov(const OlsFit& fit, Block i, Block k);

}  // namespace dtrci

#include "dtrci/linreg.hpp"

#include "dtrci/errors.hpp"

#include <limits>
#include <string>

namespace dtrci {

OlsFit fit_ols(const Eigen::MatrixXd& B, const Eigen::VectorXd& y, double max_condition) {
  const Eigen::Index n = B.rows();
  const Eigen::Index p = B.cols();
  if (y.size() != n) throw DataError("design and response lengths differ");
  if (n < p || p == 0)
    throw SingularDesignError("design has " + std::to_string(n) + " rows for " + std::to_string(p) + " columns",
                              std::numeric_limits<double>::infinity());
  if (!B.allFinite() || !y.allFinite()) throw NumericalError("non-finite design or response");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B);
  // cond(B) = cond(R); R is only p x p
  Eigen::MatrixXd R = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(R);
  const auto& s = svd.singularValues();
  const double cond = s[p - 1] > 0.0 ? s[0] / s[p - 1] : std::numeric_limits<double>::infinity();
  if (!(cond <= max_condition))
    throw SingularDesignError("design condition number " + std::to_string(cond) + " exceeds limit", cond);

  OlsFit fit;
  fit.n = n;
  fit.condition = cond;
  fit.beta = qr.solve(y);
  const double nd = static_cast<double>(n);
  fit.sigma2 = (y - B * fit.beta).squaredNorm() / nd;
  fit.gram = B.transpose() * B / nd;
  // gram^{-1} = n (R'R)^{-1} in the permuted basis
  Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd inv_perm = Rinv * Rinv.transpose() * nd;
  const auto& P = qr.colsPermutation();
  fit.gram_inv = P * inv_perm * P.transpose();
  fit.gram_inv = 0.5 * (fit.gram_inv + fit.gram_inv.transpose());
  fit.cov_beta_scaled = fit.sigma2 * fit.gram_inv;
  return fit;
}

Eigen::MatrixXd interaction_cov(const OlsFit& fit, Block block) {
  if (block.start < 0 || block.start + block.size > fit.dim()) throw ConfigError("block outside coefficient range");
  return fit.cov_beta_scaled.block(block.start, block.start, block.size, block.size);
}

Eigen::MatrixXd pairwise_cov(const OlsFit& fit, Block i, Block k) {
  if (i.size != k.size) throw ConfigError("pairwise blocks differ in size");
  if (i.start < 0 || k.start < 0 || i.start + i.size > fit.dim() || k.start + k.size > fit.dim())
    throw ConfigError("block outside coefficient range");
  const auto& S = fit.cov_beta_scaled;
  return S.block(i.start, i.start, i.size, i.size) - S.block(i.start, k.start, i.size, k.size) -
         S.block(k.start, i.start, k.size, i.size) + S.block(k.start, k.start, k.size, k.size);
}

}  // namespace dtrci

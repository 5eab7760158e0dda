#include "dtrci/qlearn.hpp"

#include "dtrci/errors.hpp"

#include <string>

namespace dtrci {

std::vector<Eigen::VectorXd> QFit::coefficients() const {
  std::vector<Eigen::VectorXd> out;
  for (const auto& s : stages_) out.push_back(s.ols.beta);
  return out;
}

double max_value(const Eigen::Ref<const Eigen::MatrixXd>& rows, const Eigen::VectorXd& beta) {
  return (rows * beta).maxCoeff();
}

int argmax_code(const Eigen::Ref<const Eigen::MatrixXd>& rows, const Eigen::VectorXd& beta) {
  Eigen::VectorXd q = rows * beta;
  int best = 0;
  for (int a = 1; a < q.size(); ++a)
    if (q[a] > q[best]) best = a;
  return best + 1;
}

Eigen::VectorXd pseudo_outcome(const Design& d, int t, const Eigen::VectorXd& beta_next) {
  const StageMatrices& cur = d.stage(t);
  Eigen::VectorXd out = cur.y;
  if (t == d.n_stages()) return out;
  const StageMatrices& nxt = d.stage(t + 1);
  for (int r = 0; r < cur.rows(); ++r) {
    const int nr = cur.next_row[r];
    if (nr >= 0) out[r] += max_value(nxt.codes(nr), beta_next);
  }
  return out;
}

QFit fit_qlearning(const Design& d) {
  const int T = d.n_stages();
  std::vector<FittedStage> stages(T);
  for (int t = T; t >= 1; --t) {
    FittedStage& fs = stages[t - 1];
    const StageMatrices& sm = d.stage(t);
    fs.n_treatments = sm.K;
    fs.main_dim = sm.main_dim;
    fs.response = t == T ? sm.y : pseudo_outcome(d, t, stages[t].ols.beta);
    try {
      fs.ols = fit_ols(sm.B, fs.response);
    } catch (const SingularDesignError& e) {
      throw SingularDesignError("stage " + std::to_string(t) + ": " + e.what(), e.condition());
    }
  }
  return QFit(d.spec(), std::move(stages), d.n());
}

QFit fit_qlearning(const Dataset& ds) { return fit_qlearning(Design::build(ds)); }

int Regime::action(int t, const Trajectory& tr) const {
  return argmax_code(code_rows(spec_, tr, t), beta(t));
}

Regime extract_regime(const QFit& fit) { return Regime(fit.spec(), fit.coefficients()); }

double contrast_value(const QFit& fit, int t, const Eigen::VectorXd& c) {
  const auto& beta = fit.beta(t);
  if (c.size() != beta.size())
    throw ConfigError("contrast has length " + std::to_string(c.size()) + ", stage " + std::to_string(t) +
                      " has " + std::to_string(beta.size()) + " coefficients");
  return c.dot(beta);
}

}  // namespace dtrci

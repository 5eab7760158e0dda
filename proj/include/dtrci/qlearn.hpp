#pragma once

#include "dtrci/dataio.hpp"
#include "dtrci/design.hpp"
#include "dtrci/linreg.hpp"

#include <Eigen/Dense>

#include <vector>

namespace dtrci {

struct FittedStage {
  OlsFit ols;
  Eigen::VectorXd response;  // observed reward at the last stage, pseudo-outcome before it
  int n_treatments = 1;
  int main_dim = 0;
};

class QFit {
 public:
  QFit() = default;
  QFit(DesignSpec spec, std::vector<FittedStage> stages, int n)
      : spec_(std::move(spec)), stages_(std::move(stages)), n_(n) {}

  int n_stages() const { return static_cast<int>(stages_.size()); }
  int n() const { return n_; }
  const FittedStage& stage(int t) const { return stages_.at(t - 1); }
  const Eigen::VectorXd& beta(int t) const { return stage(t).ols.beta; }
  const DesignSpec& spec() const { return spec_; }
  // Coefficient vectors of all stages, the usual bootstrap centre.
  std::vector<Eigen::VectorXd> coefficients() const;

 private:
  DesignSpec spec_;
  std::vector<FittedStage> stages_;
  int n_ = 0;
};

// max_a rows(a, :) . beta
double max_value(const Eigen::Ref<const Eigen::MatrixXd>& rows, const Eigen::VectorXd& beta);
// 1-based code attaining the maximum; ties go to the lowest code.
int argmax_code(const Eigen::Ref<const Eigen::MatrixXd>& rows, const Eigen::VectorXd& beta);

// Y_t + max_a Q_{t+1}(H_{t+1}, a; beta_next) for every stage-t row; units
// without stage t+1 keep Y_t.
Eigen::VectorXd pseudo_outcome(const Design& d, int t, const Eigen::VectorXd& beta_next);

// Backward recursion from stage T to 1. Throws SingularDesignError.
QFit fit_qlearning(const Design& d);
QFit fit_qlearning(const Dataset& ds);

class Regime {
 public:
  Regime(DesignSpec spec, std::vector<Eigen::VectorXd> betas) : spec_(std::move(spec)), betas_(std::move(betas)) {}
  // Recommended code at stage t given the history in `tr`.
  int action(int t, const Trajectory& tr) const;
  const Eigen::VectorXd& beta(int t) const { return betas_.at(t - 1); }

 private:
  DesignSpec spec_;
  std::vector<Eigen::VectorXd> betas_;
};

Regime extract_regime(const QFit& fit);

// c' beta_t
double contrast_value(const QFit& fit, int t, const Eigen::VectorXd& c);

}  // namespace dtrci

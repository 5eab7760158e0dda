#include "dtrci/bounds.hpp"

#include "dtrci/errors.hpp"
#include "dtrci/pretest.hpp"
#include "dtrci/rng.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace dtrci {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_reference(const QFit& fit, const Reference& center) {
  if (static_cast<int>(center.size()) != fit.n_stages()) throw ConfigError("reference has wrong number of stages");
  for (int s = 1; s <= fit.n_stages(); ++s)
    if (center[s - 1].size() != fit.beta(s).size())
      throw ConfigError("reference for stage " + std::to_string(s) + " has wrong length");
}

void check_contrast(const Eigen::VectorXd& c, const QFit& fit, int t) {
  if (c.size() != fit.beta(t).size())
    throw ConfigError("contrast length " + std::to_string(c.size()) + " does not match stage " + std::to_string(t) +
                      " dimension " + std::to_string(fit.beta(t).size()));
}

std::vector<double> key_of(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  std::vector<double> k(static_cast<std::size_t>(m.size()));
  Eigen::Map<Eigen::MatrixXd>(k.data(), m.rows(), m.cols()) = m;
  return k;
}

// max over the codes flagged in `mask` of x.
double masked_max(const Eigen::VectorXd& x, const std::vector<char>& mask) {
  double m = -kInf;
  for (Eigen::Index a = 0; a < x.size(); ++a)
    if (mask[a] && x[a] > m) m = x[a];
  return m;
}

struct Tracker {
  double upper = -kInf, lower = kInf;
  Eigen::Index arg_upper = -1, arg_lower = -1;
  double plug_at_upper = 0.0;
  void update(double v, Eigen::Index i, double plug) {
    if (v > upper) {
      upper = v;
      arg_upper = i;
      plug_at_upper = plug;
    }
    if (v < lower) {
      lower = v;
      arg_lower = i;
    }
  }
};

void finish(BoundsResult& out, const Tracker& tr, const std::vector<Eigen::VectorXd>& candidates) {
  if (!std::isfinite(tr.upper) || !std::isfinite(tr.lower)) throw NumericalError("non-finite bound");
  out.upper = tr.upper;
  out.lower = tr.lower;
  out.plug_part = tr.plug_at_upper;
  out.gamma_at_sup = candidates[tr.arg_upper];
  out.gamma_at_inf = candidates[tr.arg_lower];
}

}  // namespace

std::vector<Eigen::VectorXd> gamma_candidates(const QFit& fit, const Reference& center, int t,
                                              const GammaSearch& search) {
  check_reference(fit, center);
  const int T = fit.n_stages();
  if (t < 1 || t >= T) throw ConfigError("target stage must precede the last stage");
  if (search.n_gamma < 1) throw ConfigError("n_gamma must be positive");
  if (!(search.box_halfwidth_multiplier > 0.0)) throw ConfigError("box multiplier must be positive");
  const double rn = std::sqrt(static_cast<double>(fit.n()));
  Eigen::Index len = 0;
  for (int s = t + 1; s <= T; ++s) len += fit.beta(s).size();
  Eigen::VectorXd mid = Eigen::VectorXd::Zero(len), half = Eigen::VectorXd::Zero(len);
  Eigen::Index off = 0;
  for (int s = t + 1; s <= T; ++s) {
    const FittedStage& fs = fit.stage(s);
    for (Eigen::Index j = fs.main_dim; j < fs.ols.dim(); ++j) {
      mid[off + j] = rn * center[s - 1][j];
      half[off + j] = search.box_halfwidth_multiplier * std::sqrt(std::max(0.0, fs.ols.cov_beta_scaled(j, j)));
    }
    off += fs.ols.dim();
  }
  Rng rng(search.rng_seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<Eigen::VectorXd> out;
  out.reserve(search.n_gamma);
  if (search.include_center) out.push_back(mid);
  while (static_cast<int>(out.size()) < search.n_gamma) {
    Eigen::VectorXd g = mid;
    for (Eigen::Index j = 0; j < len; ++j)
      if (half[j] > 0.0) g[j] += half[j] * unif(rng);
    out.push_back(std::move(g));
  }
  return out;
}

TwoStageBounds::TwoStageBounds(const Design& d, const QFit& fit, const Reference& center) {
  if (fit.n_stages() != 2 || d.n_stages() != 2) throw UnsupportedMethodError("two-stage bound needs T = 2");
  check_reference(fit, center);
  const StageMatrices& s1 = d.stage(1);
  const StageMatrices& s2 = d.stage(2);
  const FittedStage& f1 = fit.stage(1);
  const FittedStage& f2 = fit.stage(2);
  const double n = static_cast<double>(d.n());
  const double rn = std::sqrt(n);
  const double n1 = static_cast<double>(s1.rows());
  main_dim_ = s2.main_dim;
  dim_ = s2.dim();
  const Eigen::Index q = dim_ - main_dim_;
  const Eigen::VectorXd& b2 = f2.ols.beta;
  const Eigen::VectorXd& c1 = center[0];
  const Eigen::VectorXd& c2 = center[1];
  const Eigen::VectorXd b2_int = b2.tail(q);
  const Eigen::VectorXd c2_int = c2.tail(q);
  const Eigen::VectorXd V = rn * (b2_int - c2_int);

  Eigen::VectorXd acc = Eigen::VectorXd::Zero(s1.dim());
  std::map<std::vector<double>, int> index;
  for (int r = 0; r < s1.rows(); ++r) {
    double e = s1.y[r] - s1.B.row(r).dot(c1);
    const int nr = s1.next_row[r];
    if (nr >= 0) {
      auto rows = s2.codes(nr);
      // main part enters at the fitted value, interaction part at the centre
      e += rows.row(0).head(main_dim_).dot(b2.head(main_dim_)) + (rows.rightCols(q) * c2_int).maxCoeff();
      auto key = key_of(rows.rightCols(q));
      auto [it, fresh] = index.try_emplace(key, static_cast<int>(groups_.size()));
      if (fresh) {
        Group g;
        g.G = rows.rightCols(q);
        g.M = Eigen::VectorXd::Zero(s1.dim());
        g.GV = g.G * V;
        g.U = rn * ((g.G * b2_int).maxCoeff() - (g.G * c2_int).maxCoeff());
        Eigen::MatrixXd full = Eigen::MatrixXd::Zero(g.G.rows(), dim_);
        full.rightCols(q) = g.G;
        g.stats = g.G.rows() >= 2 ? pretest_rows(full, b2, f2.ols.cov_beta_scaled, static_cast<double>(f2.ols.n))
                                  : std::vector<double>(g.G.rows(), kInf);
        groups_.push_back(std::move(g));
      }
      Group& g = groups_[it->second];
      g.M += s1.B.row(r).transpose();
      ++g.count;
    }
    acc += s1.B.row(r).transpose() * e;
  }
  W_ = f1.ols.gram_inv * acc * (rn / n1);
  for (auto& g : groups_) g.M = f1.ols.gram_inv * g.M / n1;
}

BoundsResult TwoStageBounds::evaluate(double lambda, const Eigen::VectorXd& c,
                                      const std::vector<Eigen::VectorXd>& candidates) const {
  if (c.size() != W_.size()) throw ConfigError("contrast length does not match stage 1");
  if (candidates.empty()) throw ConfigError("no gamma candidates");
  BoundsResult out;
  out.smooth_part = c.dot(W_);
  double plug = 0.0;
  int accepted = 0, total = 0;
  std::vector<std::pair<double, const Group*>> acc;
  for (const auto& g : groups_) {
    const double w = c.dot(g.M);
    total += g.count;
    const bool accept = g.stats.size() >= 2 && *std::min_element(g.stats.begin(), g.stats.end()) <= lambda;
    if (accept) {
      accepted += g.count;
      acc.emplace_back(w, &g);
    } else {
      plug += w * g.U;
    }
  }
  out.accept_fraction = total ? static_cast<double>(accepted) / total : 0.0;
  const Eigen::Index q = dim_ - main_dim_;
  Tracker tr;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].size() != dim_) throw ConfigError("gamma candidate has wrong length");
    const auto gamma = candidates[i].tail(q);
    double kern = 0.0;
    for (const auto& [w, g] : acc) {
      Eigen::VectorXd Gg = g->G * gamma;
      kern += w * ((g->GV + Gg).maxCoeff() - Gg.maxCoeff());
    }
    tr.update(out.smooth_part + plug + kern, static_cast<Eigen::Index>(i), plug);
  }
  finish(out, tr, candidates);
  return out;
}

double smooth_term(const Design& d, const QFit& fit, const Reference& center, const Eigen::VectorXd& c) {
  TwoStageBounds b(d, fit, center);
  if (c.size() != b.smooth().size()) throw ConfigError("contrast length does not match stage 1");
  return c.dot(b.smooth());
}

GeneralBounds::GeneralBounds(const Design& d, const QFit& fit, const Reference& center, int t) : t_(t) {
  const int T = fit.n_stages();
  if (T > 3) throw UnsupportedMethodError("bounds are implemented for at most three stages");
  if (t < 1 || t >= T) throw ConfigError("target stage must precede the last stage");
  if (d.n_stages() != T) throw ConfigError("design and fit disagree on the number of stages");
  check_reference(fit, center);
  const double n = static_cast<double>(d.n());
  const double rn = std::sqrt(n);
  Eigen::Index offset = 0;
  for (int s = t + 1; s <= T; ++s) {
    Level lv;
    lv.s = s;
    lv.offset = offset;
    offset += fit.beta(s).size();
    const StageMatrices& par = d.stage(s - 1);
    const StageMatrices& cur = d.stage(s);
    const FittedStage& fp = fit.stage(s - 1);
    const FittedStage& fs = fit.stage(s);
    const Eigen::VectorXd& bs = fs.ols.beta;
    const Eigen::VectorXd& cs = center[s - 1];
    const Eigen::VectorXd& cp = center[s - 2];
    const double np = static_cast<double>(par.rows());
    lv.V = rn * (bs - cs);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(par.dim());
    std::map<std::vector<double>, int> index;
    for (int r = 0; r < par.rows(); ++r) {
      double e = par.y[r] - par.B.row(r).dot(cp);
      const int nr = par.next_row[r];
      if (nr >= 0) {
        auto rows = cur.codes(nr);
        Eigen::VectorXd qc = rows * cs;
        e += qc.maxCoeff();
        auto [it, fresh] = index.try_emplace(key_of(rows), static_cast<int>(lv.groups.size()));
        if (fresh) {
          Group g;
          g.R = rows;
          g.M = Eigen::VectorXd::Zero(par.dim());
          g.RV = g.R * lv.V;
          g.U = rn * ((g.R * bs).maxCoeff() - qc.maxCoeff());
          g.best = argmax_code(g.R, bs) - 1;
          g.stats = g.R.rows() >= 2 ? pretest_rows(g.R, bs, fs.ols.cov_beta_scaled, static_cast<double>(fs.ols.n))
                                    : std::vector<double>(g.R.rows(), kInf);
          const double m = qc.maxCoeff();
          const double tol = 1e-12 * (1.0 + std::abs(m));
          g.optimal_at_center.resize(g.R.rows());
          for (Eigen::Index a = 0; a < g.R.rows(); ++a) g.optimal_at_center[a] = qc[a] >= m - tol;
          lv.groups.push_back(std::move(g));
        }
        Group& g = lv.groups[it->second];
        g.M += par.B.row(r).transpose();
        ++g.count;
      }
      acc += par.B.row(r).transpose() * e;
    }
    lv.W = fp.ols.gram_inv * acc * (rn / np);
    for (auto& g : lv.groups) g.M = fp.ols.gram_inv * g.M / np;
    levels_.push_back(std::move(lv));
  }
}

BoundsResult GeneralBounds::evaluate(double lambda, const Eigen::VectorXd& c,
                                     const std::vector<Eigen::VectorXd>& candidates) const {
  if (candidates.empty()) throw ConfigError("no gamma candidates");
  if (c.size() != levels_.front().W.size()) throw ConfigError("contrast length does not match the target stage");
  Eigen::Index len = 0;
  for (const auto& lv : levels_) len += lv.V.size();

  struct Branch {
    const Group* g;
    bool accepted;
    int code;                // rejected: 0-based code
    std::vector<char> mask;  // accepted: pretest set plus codes optimal at the centre
    double w;                // c' M at the target level
  };
  const std::size_t L = levels_.size();
  std::vector<std::vector<Branch>> branches(L);
  int accepted_units = 0, total_units = 0;
  for (std::size_t l = 0; l < L; ++l) {
    for (const auto& g : levels_[l].groups) {
      Branch br{&g, false, g.best, {}, l == 0 ? c.dot(g.M) : 0.0};
      const Eigen::Index K = g.R.rows();
      std::vector<int> set;
      if (K >= 2 && *std::min_element(g.stats.begin(), g.stats.end()) <= lambda)
        for (Eigen::Index a = 0; a < K; ++a)
          if (g.stats[a] <= lambda) set.push_back(static_cast<int>(a));
      if (set.size() > 1) {
        br.accepted = true;
        br.mask = g.optimal_at_center;
        for (int a : set) br.mask[a] = 1;
      } else if (set.size() == 1) {
        br.code = set[0];
      }
      total_units += g.count;
      if (br.accepted) accepted_units += g.count;
      branches[l].push_back(std::move(br));
    }
  }

  // Rejected groups at the deepest level do not depend on the candidate.
  const Level& deep = levels_[L - 1];
  Eigen::VectorXd deep_const = deep.W;
  double deep_plug = 0.0;
  for (const auto& br : branches[L - 1])
    if (!br.accepted) {
      deep_const += br.g->M * br.g->U;
      if (L == 1) deep_plug += br.w * br.g->U;
    }

  BoundsResult out;
  out.accept_fraction = total_units ? static_cast<double>(accepted_units) / total_units : 0.0;
  out.smooth_part = c.dot(levels_.front().W);
  Tracker tr;
  Eigen::VectorXd vt, next;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Eigen::VectorXd& cand = candidates[i];
    if (cand.size() != len) throw ConfigError("gamma candidate has wrong length");
    double value = 0.0, plug = 0.0;
    for (std::size_t l = L; l-- > 0;) {
      const Level& lv = levels_[l];
      const bool deepest = l == L - 1;
      const auto gamma = cand.segment(lv.offset, lv.V.size());
      if (l == 0) {
        value = deepest ? c.dot(deep_const) : out.smooth_part;
        plug = deepest ? deep_plug : 0.0;
      } else {
        next = deepest ? deep_const : lv.W;
      }
      for (const auto& br : branches[l]) {
        const Group& g = *br.g;
        double kappa;
        if (!br.accepted) {
          if (deepest) continue;
          kappa = g.R.row(br.code).dot(vt) - g.RV[br.code] + g.U;
          if (l == 0) plug += br.w * kappa;
        } else {
          const Eigen::VectorXd Rg = g.R * gamma;
          const Eigen::VectorXd x = deepest ? Eigen::VectorXd(g.RV + Rg) : Eigen::VectorXd(g.R * vt + Rg);
          kappa = masked_max(x, br.mask) - masked_max(Rg, br.mask);
        }
        if (l == 0) value += br.w * kappa;
        else next += g.M * kappa;
      }
      if (l > 0) vt = next;
    }
    tr.update(value, static_cast<Eigen::Index>(i), plug);
  }
  finish(out, tr, candidates);
  return out;
}

BoundsResult bounds_two_stage(const Design& d, const QFit& fit, const Reference& center, double lambda,
                              const Eigen::VectorXd& c, const std::vector<Eigen::VectorXd>& candidates) {
  check_contrast(c, fit, 1);
  return TwoStageBounds(d, fit, center).evaluate(lambda, c, candidates);
}

BoundsResult bounds_two_stage(const Design& d, const QFit& fit, const Reference& center, double lambda,
                              const Eigen::VectorXd& c, const GammaSearch& search) {
  return bounds_two_stage(d, fit, center, lambda, c, gamma_candidates(fit, center, 1, search));
}

BoundsResult bounds_general(const Design& d, const QFit& fit, const Reference& center, double lambda,
                            const Eigen::VectorXd& c, int t, const std::vector<Eigen::VectorXd>& candidates) {
  GeneralBounds b(d, fit, center, t);
  check_contrast(c, fit, t);
  return b.evaluate(lambda, c, candidates);
}

BoundsResult bounds_general(const Design& d, const QFit& fit, const Reference& center, double lambda,
                            const Eigen::VectorXd& c, int t, const GammaSearch& search) {
  GeneralBounds b(d, fit, center, t);
  check_contrast(c, fit, t);
  return b.evaluate(lambda, c, gamma_candidates(fit, center, t, search));
}

}  // namespace dtrci

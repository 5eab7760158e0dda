#include "dtrci/fitreport.hpp"

#include "dtrci/bounds.hpp"
#include "dtrci/design.hpp"
#include "dtrci/errors.hpp"
#include "dtrci/rng.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace dtrci {

namespace {

struct Pending {
  ReportRow* row;
  Eigen::VectorXd c;
};

std::string percent(double p) {
  std::ostringstream os;
  os << std::setprecision(4) << 100.0 * p << '%';
  return os.str();
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string history_label(const StageSpec& st, const Eigen::VectorXd& h) {
  std::string label;
  for (int j = 0; j < st.interact_dim(); ++j) {
    if (st.interact[j].factors.empty()) continue;
    if (!label.empty()) label += ", ";
    std::ostringstream os;
    os << st.interact[j].label << '=' << h[j];
    label += os.str();
  }
  return label.empty() ? "all" : label;
}

}  // namespace

std::string lower_label(double alpha) { return percent(alpha / 2.0); }
std::string upper_label(double alpha) { return percent(1.0 - alpha / 2.0); }

FitReport fit_report(const Dataset& ds, const FitConfig& cfg, int threads) {
  const Design d = Design::build(ds);
  FitReport rep;
  rep.fit = fit_qlearning(d);
  rep.n = d.n();
  rep.alpha = cfg.alpha;
  rep.lambda_rule = cfg.lambda_rule.name();
  const int T = rep.fit.n_stages();
  const DesignSpec& spec = d.spec();

  rep.coefficients.resize(T);
  for (int t = 1; t <= T; ++t) {
    const auto names = spec.column_names(t);
    for (std::size_t j = 0; j < names.size(); ++j)
      rep.coefficients[t - 1].push_back({t, names[j], rep.fit.beta(t)[j], {}});
  }
  // distinct histories of each two-treatment stage, in order of appearance;
  // under contrast coding the contrast is (0, h)
  constexpr std::size_t kMaxHistories = 64;
  std::vector<Eigen::VectorXd> evidence_c;
  if (cfg.evidence_table) {
    for (int t = 1; t <= T; ++t) {
      const StageSpec& st = spec.stage(t);
      const StageMatrices& sm = d.stage(t);
      if (st.coding.n_columns() != 1) continue;
      const Eigen::Index q = st.interact_dim();
      std::map<std::vector<double>, int> seen;
      std::vector<Eigen::VectorXd> rows;
      const double gap = st.coding.value(1, 0) - st.coding.value(2, 0);
      for (int r = 0; r < sm.rows() && rows.size() <= kMaxHistories; ++r) {
        const auto codes = sm.codes(r);
        Eigen::VectorXd h = (codes.row(0) - codes.row(1)).tail(q).transpose() / gap;
        if (seen.emplace(std::vector<double>(h.data(), h.data() + q), 0).second) rows.push_back(h);
      }
      if (rows.size() > kMaxHistories) continue;  // too many to tabulate
      for (const auto& h : rows) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(st.dim());
        c.tail(q) = 0.5 * gap * h;
        rep.evidence.push_back({t, history_label(st, h), c.dot(rep.fit.beta(t)), {}});
        evidence_c.push_back(c);
      }
    }
  }
  for (const auto& cs : cfg.contrasts) {
    if (cs.stage < 1 || cs.stage > T || cs.c.size() != rep.fit.beta(cs.stage).size())
      throw ConfigError("contrast '" + cs.name + "' does not match the design");
    rep.contrasts.push_back({cs.stage, cs.name, cs.c.dot(rep.fit.beta(cs.stage)), {}});
  }

  // every target grouped by stage
  std::vector<std::vector<Pending>> todo(T);
  for (int t = 1; t <= T; ++t)
    for (std::size_t j = 0; j < rep.coefficients[t - 1].size(); ++j)
      todo[t - 1].push_back({&rep.coefficients[t - 1][j], Eigen::VectorXd::Unit(rep.fit.beta(t).size(), j)});
  for (std::size_t i = 0; i < rep.evidence.size(); ++i)
    todo[rep.evidence[i].stage - 1].push_back({&rep.evidence[i], evidence_c[i]});
  for (std::size_t i = 0; i < rep.contrasts.size(); ++i)
    todo[rep.contrasts[i].stage - 1].push_back({&rep.contrasts[i], cfg.contrasts[i].c});

  const Reference center = rep.fit.coefficients();
  const double lambda = lambda_value(cfg.lambda_rule, d.n());
  const int B = cfg.n_boot;
  // upper[t][k][b], lower likewise; the last stage stores c' beta* in upper
  std::vector<std::vector<std::vector<double>>> upper(T), lower(T);
  for (int t = 0; t < T; ++t) {
    upper[t].assign(todo[t].size(), std::vector<double>(B));
    lower[t].assign(todo[t].size(), std::vector<double>(B));
  }
  const BootstrapPlan plan{B, cfg.seed, cfg.max_redraws, threads};
  rep.redraws = run_bootstrap(d, plan, [&](const Replicate& r) {
    for (int t = 1; t < T; ++t) {
      GammaSearch gs = cfg.search;
      gs.rng_seed = derive_seed(r.seed, Stream::gamma, cfg.search.rng_seed);
      const BoundProcess proc(*r.design, *r.fit, center, t);
      const auto cand = gamma_candidates(*r.fit, center, t, gs);
      for (std::size_t k = 0; k < todo[t - 1].size(); ++k) {
        const BoundsResult b = proc.evaluate(lambda, todo[t - 1][k].c, cand);
        upper[t - 1][k][r.index] = b.upper;
        lower[t - 1][k][r.index] = b.lower;
      }
    }
    for (std::size_t k = 0; k < todo[T - 1].size(); ++k)
      upper[T - 1][k][r.index] = todo[T - 1][k].c.dot(r.fit->beta(T));
  });
  for (int t = 1; t <= T; ++t)
    for (std::size_t k = 0; k < todo[t - 1].size(); ++k) {
      ReportRow& row = *todo[t - 1][k].row;
      row.interval = t < T ? aci_from_bounds(row.estimate, d.n(), upper[t - 1][k], lower[t - 1][k], cfg.alpha)
                           : cpb_from_draws(row.estimate, upper[t - 1][k], cfg.alpha);
      row.interval.redraws = rep.redraws;
    }
  return rep;
}

void write_fit_report(std::ostream& out, const FitReport& report) {
  const int T = report.fit.n_stages();
  const std::string lo = lower_label(report.alpha), hi = upper_label(report.alpha);
  out << "Q-learning fit: n = " << report.n << ", " << T << " stages, "
      << percent(1.0 - report.alpha) << " intervals, lambda rule " << report.lambda_rule << '\n';
  for (int t = 1; t <= T; ++t) {
    out << "\nStage " << t << " coefficients (" << (t < T ? "ACI" : "CPB") << ")\n";
    out << std::left << std::setw(22) << "term" << std::right << std::setw(11) << "estimate" << std::setw(11) << lo
        << std::setw(11) << hi << '\n';
    for (const auto& row : report.coefficients[t - 1])
      out << std::left << std::setw(22) << row.label << std::right << std::setw(11) << fixed(row.estimate)
          << std::setw(11) << fixed(row.interval.lo) << std::setw(11) << fixed(row.interval.hi) << '\n';
  }
  auto table = [&](const char* title, const char* key, const std::vector<ReportRow>& rows) {
    if (rows.empty()) return;
    out << '\n' << title << '\n';
    out << std::left << std::setw(6) << "stage" << std::setw(30) << key << std::right << std::setw(11)
        << "estimate" << std::setw(11) << lo << std::setw(11) << hi << "  " << std::left << "evidence" << '\n';
    for (const auto& row : rows)
      out << std::left << std::setw(6) << row.stage << std::setw(30) << row.label << std::right << std::setw(11)
          << fixed(row.estimate) << std::setw(11) << fixed(row.interval.lo) << std::setw(11)
          << fixed(row.interval.hi) << "  " << std::left
          << (row.sufficient() ? "Sufficient evidence" : "Insufficient evidence") << '\n';
  };
  table("Treatment effect by history (half the difference between codes 1 and 2)", "history", report.evidence);
  table("Contrasts", "contrast", report.contrasts);
  if (report.redraws > 0) out << "\nsingular resamples redrawn: " << report.redraws << '\n';
}

}  // namespace dtrci

#include "dtrci/harness.hpp"

#include "dtrci/design.hpp"
#include "dtrci/errors.hpp"
#include "dtrci/parallel.hpp"
#include "dtrci/qlearn.hpp"
#include "dtrci/resample.hpp"
#include "dtrci/rng.hpp"

#include <boost/math/distributions/binomial.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace dtrci {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool uses_pretest(Method m) { return m == Method::aci || m == Method::ppe; }

struct Job {
  const GenModelSpec* model;
  int rep;
};

// Statistic slots of one replication: one per (method, target, lambda).
struct Slot {
  Method method;
  int target;  // index into the resolved targets
  int lambda;  // index into lambda rules, -1 if unused
};

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::aci: return "ACI";
    case Method::cpb: return "CPB";
    case Method::ppe: return "PPE";
    case Method::st: return "ST";
  }
  return "ACI";
}

Method parse_method(std::string_view text) {
  std::string t(text);
  for (auto& ch : t) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (t == "aci") return Method::aci;
  if (t == "cpb") return Method::cpb;
  if (t == "ppe") return Method::ppe;
  if (t == "st") return Method::st;
  throw ConfigError("unknown method '" + std::string(text) + "'");
}

Target target_by_name(std::string_view name, const DesignSpec& design) {
  auto unit = [&](int t, int j) {
    const int p = design.stage(t).dim();
    if (j < 1 || j > p) throw ConfigError("target '" + std::string(name) + "' outside stage " + std::to_string(t));
    Target tg{std::string(name), t, Eigen::VectorXd::Zero(p)};
    tg.c[j - 1] = 1.0;
    return tg;
  };
  if (name == "beta111" || name == "beta101") {
    const StageSpec& s1 = design.stage(1);
    // stage-1 layout (H10, A1 * H11): the treatment effect is the first
    // interaction coefficient, the intercept the first main coefficient
    if (s1.main_dim() < 1 || s1.interact_dim() < 1 || s1.coding.n_columns() != 1)
      throw ConfigError("target '" + std::string(name) + "' needs a binary stage 1 with intercepts");
    return unit(1, name == "beta111" ? s1.main_dim() + 1 : 1);
  }
  if (name.starts_with("stage")) {
    auto colon = name.find(':');
    if (colon != std::string_view::npos) {
      try {
        const int t = std::stoi(std::string(name.substr(5, colon - 5)));
        const int j = std::stoi(std::string(name.substr(colon + 1)));
        if (t >= 1 && t <= design.n_stages()) return unit(t, j);
      } catch (const std::logic_error&) {
      }
    }
  }
  throw ConfigError("unknown target '" + std::string(name) + "'");
}

double true_parameter(const GenModelSpec& spec, int t, const Eigen::VectorXd& c) {
  const auto beta = population_coefficients(spec);
  if (t < 1 || t > static_cast<int>(beta.size())) throw ConfigError("stage out of range");
  if (c.size() != beta[t - 1].size()) throw ConfigError("contrast length does not match the stage");
  return c.dot(beta[t - 1]);
}

void ExperimentConfig::validate() const {
  if (models.empty()) throw ConfigError("no models selected");
  if (methods.empty()) throw ConfigError("no methods selected");
  if (targets.empty()) throw ConfigError("no targets selected");
  if (n < 3) throw ConfigError("n must be at least 3");
  if (mc_reps < 1) throw ConfigError("mc_reps must be positive");
  if (n_boot < 1) throw ConfigError("n_boot must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (lambda_rules.empty()) throw ConfigError("no lambda rules selected");
  if (search.n_gamma < 1) throw ConfigError("n_gamma must be positive");
  if (!(search.box_halfwidth_multiplier > 0.0)) throw ConfigError("gamma box multiplier must be positive");
  if (max_redraws < 0) throw ConfigError("max_redraws must be non-negative");
  if (!(failure_budget >= 0.0 && failure_budget < 1.0)) throw ConfigError("failure budget must lie in [0, 1)");
  for (const auto& rule : lambda_rules) rule.value(n);
  for (const auto& m : models) {
    const DesignSpec design = analysis_design(m);
    const int T = design.n_stages();
    for (const auto& name : targets) {
      const Target tg = target_by_name(name, design);
      for (Method meth : methods) {
        if (uses_pretest(meth) && tg.stage >= T)
          throw UnsupportedMethodError(to_string(meth) + " targets stages before the last; use CPB for '" + name +
                                       "'");
        if (meth == Method::st && (T != 2 || design.stage(2).n_treatments() != 2 || tg.stage != 1))
          throw UnsupportedMethodError("ST needs two stages, two stage-2 treatments and a stage-1 target (model " +
                                       m.name() + ")");
      }
    }
  }
}

void apply_preset(ExperimentConfig& cfg, std::string_view preset) {
  if (preset == "desk") {
    cfg.mc_reps = 200;
    cfg.n_boot = 500;
  } else if (preset == "paper") {
    cfg.mc_reps = 1000;
    cfg.n_boot = 1000;
  } else {
    throw ConfigError("unknown preset '" + std::string(preset) + "'");
  }
}

bool flag_significance(double coverage, int reps, double nominal, double level) {
  if (reps < 1) throw ConfigError("significance flag needs at least one replication");
  if (!(nominal > 0.0 && nominal < 1.0)) throw ConfigError("nominal level must lie in (0, 1)");
  const double x = std::round(coverage * reps);
  boost::math::binomial_distribution<double> dist(reps, nominal);
  return boost::math::cdf(dist, x) < level;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const double nominal = 1.0 - cfg.alpha;

  std::vector<Slot> slots;
  for (Method m : cfg.methods)
    for (int k = 0; k < static_cast<int>(cfg.targets.size()); ++k) {
      if (uses_pretest(m))
        for (int l = 0; l < static_cast<int>(cfg.lambda_rules.size()); ++l) slots.push_back({m, k, l});
      else
        slots.push_back({m, k, -1});
    }

  // truth per (model, target)
  std::map<std::pair<std::string, std::string>, double> truth;
  for (const auto& m : cfg.models) {
    const DesignSpec design = analysis_design(m);
    for (const auto& name : cfg.targets) {
      const Target tg = target_by_name(name, design);
      truth[{m.name(), name}] = true_parameter(m, tg.stage, tg.c);
    }
  }

  std::vector<Job> jobs;
  for (const auto& m : cfg.models)
    for (int r = 0; r < cfg.mc_reps; ++r) jobs.push_back({&m, r});

  std::vector<std::vector<RepRecord>> results(jobs.size());
  std::atomic<int> done{0};
  parallel_for(jobs.size(), cfg.threads, [&](std::size_t j) {
    const GenModelSpec& model = *jobs[j].model;
    const int rep = jobs[j].rep;
    const std::uint64_t rep_seed = derive_seed(derive_seed(cfg.seed, fnv1a(model.name())), rep);
    const DesignSpec design = analysis_design(model);
    std::vector<Target> targets;
    for (const auto& name : cfg.targets) targets.push_back(target_by_name(name, design));
    auto& out = results[j];
    auto record = [&](const Slot& s) {
      RepRecord r;
      r.model = model.name();
      r.rep = rep;
      r.seed = rep_seed;
      r.method = to_string(s.method);
      r.target = targets[s.target].name;
      r.lambda_rule = s.lambda >= 0 ? cfg.lambda_rules[s.lambda].name() : "-";
      return r;
    };
    try {
      const Design d = Design::build(simulate(model, cfg.n, derive_seed(rep_seed, 0)));
      const QFit fit = fit_qlearning(d);
      const Reference center = fit.coefficients();
      std::vector<double> lambdas;
      for (const auto& rule : cfg.lambda_rules) lambdas.push_back(rule.value(cfg.n));
      std::vector<double> estimate(slots.size());
      for (std::size_t s = 0; s < slots.size(); ++s) {
        const Target& tg = targets[slots[s].target];
        estimate[s] = slots[s].method == Method::st
                          ? tg.c.dot(st_stage1_coefficients(d, fit, cfg.st_variant))
                          : contrast_value(fit, tg.stage, tg.c);
      }
      // draws[s] holds CPB/ST statistics or PPE values; upper/lower hold ACI bounds
      std::vector<std::vector<double>> draws(slots.size(), std::vector<double>(cfg.n_boot));
      std::vector<std::vector<double>> lower(slots.size(), std::vector<double>(cfg.n_boot));
      bool need_st = false, need_bounds = false;
      for (const auto& s : slots) {
        need_st |= s.method == Method::st;
        need_bounds |= uses_pretest(s.method);
      }
      BootstrapPlan plan{cfg.n_boot, derive_seed(rep_seed, 1), cfg.max_redraws, 1};
      const int redraws = run_bootstrap(d, plan, [&](const Replicate& b) {
        std::map<int, BoundProcess> procs;
        std::map<int, std::vector<Eigen::VectorXd>> cands;
        std::map<int, std::vector<Eigen::VectorXd>> zero;
        if (need_bounds)
          for (const auto& tg : targets) {
            if (tg.stage >= fit.n_stages() || procs.count(tg.stage)) continue;
            procs.emplace(tg.stage, BoundProcess(*b.design, *b.fit, center, tg.stage));
            GammaSearch gs = cfg.search;
            gs.rng_seed = derive_seed(b.seed, Stream::gamma, cfg.search.rng_seed);
            cands[tg.stage] = gamma_candidates(*b.fit, center, tg.stage, gs);
            zero[tg.stage] = {Eigen::VectorXd::Zero(cands[tg.stage].front().size())};
          }
        Eigen::VectorXd st_beta;
        if (need_st) st_beta = st_stage1_coefficients(*b.design, *b.fit, cfg.st_variant);
        for (std::size_t s = 0; s < slots.size(); ++s) {
          const Slot& sl = slots[s];
          const Target& tg = targets[sl.target];
          switch (sl.method) {
            case Method::cpb: draws[s][b.index] = contrast_value(*b.fit, tg.stage, tg.c); break;
            case Method::st: draws[s][b.index] = tg.c.dot(st_beta); break;
            case Method::ppe:
              draws[s][b.index] = procs.at(tg.stage).evaluate(lambdas[sl.lambda], tg.c, zero.at(tg.stage)).upper;
              break;
            case Method::aci: {
              const BoundsResult r = procs.at(tg.stage).evaluate(lambdas[sl.lambda], tg.c, cands.at(tg.stage));
              draws[s][b.index] = r.upper;
              lower[s][b.index] = r.lower;
              break;
            }
          }
        }
      });
      for (std::size_t s = 0; s < slots.size(); ++s) {
        const Slot& sl = slots[s];
        const Target& tg = targets[sl.target];
        Interval iv;
        switch (sl.method) {
          case Method::cpb:
          case Method::st: iv = cpb_from_draws(estimate[s], draws[s], cfg.alpha); break;
          case Method::ppe: iv = aci_from_bounds(estimate[s], cfg.n, draws[s], draws[s], cfg.alpha); break;
          case Method::aci: iv = aci_from_bounds(estimate[s], cfg.n, draws[s], lower[s], cfg.alpha); break;
        }
        RepRecord r = record(sl);
        r.lo = iv.lo;
        r.hi = iv.hi;
        r.covered = iv.contains(truth.at({model.name(), tg.name}));
        r.redraws = redraws;
        out.push_back(std::move(r));
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      out.clear();
      for (const auto& s : slots) {
        RepRecord r = record(s);
        r.error = e.what();
        out.push_back(std::move(r));
      }
    }
    const int k = ++done;
    if (progress) progress(k, static_cast<int>(jobs.size()));
  });

  ExperimentReport report;
  std::map<std::tuple<std::string, std::string, std::string, std::string>, std::size_t> index;
  for (const auto& m : cfg.models)
    for (const auto& s : slots) {
      CellResult c;
      c.model = m.name();
      c.method = to_string(s.method);
      c.target = cfg.targets[s.target];
      c.lambda_rule = s.lambda >= 0 ? cfg.lambda_rules[s.lambda].name() : "-";
      c.truth = truth[{c.model, c.target}];
      index[{c.model, c.method, c.target, c.lambda_rule}] = report.cells.size();
      report.cells.push_back(c);
    }
  std::vector<double> covered(report.cells.size(), 0.0), width(report.cells.size(), 0.0);
  for (const auto& per_job : results)
    for (const auto& r : per_job) {
      const std::size_t i = index.at({r.model, r.method, r.target, r.lambda_rule});
      CellResult& c = report.cells[i];
      if (!r.error.empty()) {
        ++c.failed;
        continue;
      }
      ++c.reps;
      covered[i] += r.covered ? 1.0 : 0.0;
      width[i] += r.hi - r.lo;
      report.reps.push_back(r);
    }
  for (const auto& per_job : results)
    for (const auto& r : per_job)
      if (!r.error.empty()) report.reps.push_back(r);
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    CellResult& c = report.cells[i];
    if (c.failed > cfg.failure_budget * cfg.mc_reps) report.budget_exceeded = true;
    if (c.reps == 0) {
      c.coverage = c.width = c.mc_se = std::nan("");
      continue;
    }
    c.coverage = covered[i] / c.reps;
    c.width = width[i] / c.reps;
    c.mc_se = std::sqrt(c.coverage * (1.0 - c.coverage) / c.reps);
    c.flag = flag_significance(c.coverage, c.reps, nominal);
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

void write_aggregate_csv(std::ostream& out, const ExperimentReport& report, const ExperimentConfig& cfg) {
  out << "model,method,target,coverage,width,mc_se,flag,reps,n_boot,lambda_rule,seed\n";
  out << std::setprecision(6);
  for (const auto& c : report.cells)
    out << c.model << ',' << c.method << ',' << c.target << ',' << c.coverage << ',' << c.width << ',' << c.mc_se
        << ',' << (c.flag ? 1 : 0) << ',' << c.reps << ',' << cfg.n_boot << ',' << c.lambda_rule << ',' << cfg.seed
        << '\n';
}

void write_rep_log(std::ostream& out, const ExperimentReport& report) {
  out << "model,rep,seed,method,target,lambda_rule,lo,hi,covered,redraws,error\n";
  out << std::setprecision(10);
  for (const auto& r : report.reps) {
    std::string err = r.error;
    for (auto& ch : err)
      if (ch == ',' || ch == '\n') ch = ';';
    out << r.model << ',' << r.rep << ',' << r.seed << ',' << r.method << ',' << r.target << ',' << r.lambda_rule
        << ',' << r.lo << ',' << r.hi << ',' << (r.covered ? 1 : 0) << ',' << r.redraws << ',' << err << '\n';
  }
}

void write_table(std::ostream& out, const ExperimentReport& report) {
  // columns: method[/lambda] per target
  std::vector<std::string> cols;
  std::vector<std::string> models;
  std::map<std::pair<std::string, std::string>, const CellResult*> at;
  for (const auto& c : report.cells) {
    std::string col = c.method + (c.lambda_rule == "-" ? "" : "/" + c.lambda_rule) + " " + c.target;
    if (std::find(cols.begin(), cols.end(), col) == cols.end()) cols.push_back(col);
    if (std::find(models.begin(), models.end(), c.model) == models.end()) models.push_back(c.model);
    at[{c.model, col}] = &c;
  }
  auto print = [&](const char* title, auto value) {
    out << title << '\n' << std::left << std::setw(18) << "model";
    for (const auto& col : cols) out << std::setw(22) << col;
    out << '\n';
    for (const auto& m : models) {
      out << std::setw(18) << m;
      for (const auto& col : cols) {
        auto it = at.find({m, col});
        out << std::setw(22) << (it == at.end() ? std::string("") : value(*it->second));
      }
      out << '\n';
    }
  };
  auto fmt = [](double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3) << v;
    return os.str();
  };
  print("Coverage ('*' = significantly below nominal)",
        [&](const CellResult& c) { return fmt(c.coverage) + (c.flag ? "*" : ""); });
  out << '\n';
  print("Mean width", [&](const CellResult& c) { return fmt(c.width); });
}

}  // namespace dtrci

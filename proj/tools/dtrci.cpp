// dtrci: command-line front end.
//
//   dtrci fit         --config fit.json
//   dtrci experiment  --config exp.json [--preset desk|paper] [--models ex1 ex6] [--methods aci cpb]
//   dtrci toy         [--config toy.json]
//   dtrci simulate    --model ex3 --n 150 --seed 1
//   dtrci true-params [--models ex1 ternary:ex3]
//
// Flags override the config file. Exit codes: 0 success, 2 configuration
// error, 3 data error, 4 numerical failure or exhausted failure budget.

#include "dtrci/config.hpp"
#include "dtrci/errors.hpp"
#include "dtrci/fitreport.hpp"
#include "dtrci/genmodels.hpp"
#include "dtrci/harness.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

using namespace dtrci;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNumerical = 4 };

struct Options {
  std::string config;
  bool validate_only = false;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_boot;
  std::string out;
  std::string preset;
  std::vector<std::string> models;
  std::vector<std::string> methods;
  std::string data;
  std::string model;
  std::optional<int> n;
  int reps = 0;
};

// Opens `path` for writing, or returns std::cout for an empty path.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (path.empty()) return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw ConfigError("cannot write '" + path + "'");
  }
  std::ostream& get() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

// A relative data path in a config file is read from the config's directory.
std::string relative_to_config(const std::string& path, const std::string& config) {
  const std::filesystem::path p(path);
  if (p.is_absolute() || config.empty()) return path;
  return (std::filesystem::path(config).parent_path() / p).string();
}

AppConfig load(const Options& o) { return o.config.empty() ? AppConfig{} : load_config(o.config); }

int thread_count(const Options& o, const AppConfig& app) {
  if (o.threads) {
    if (*o.threads < 1) throw ConfigError("--threads must be positive");
    return *o.threads;
  }
  if (app.threads > 0) return app.threads;
  if (const char* env = std::getenv("DTRCI_THREADS")) {
    try {
      const int t = std::stoi(env);
      if (t >= 1) return t;
    } catch (const std::logic_error&) {
    }
    throw ConfigError("DTRCI_THREADS must be a positive integer");
  }
  return 1;
}

int cmd_fit(const Options& o) {
  AppConfig app = load(o);
  if (!app.fit) throw ConfigError("the config has no 'fit' section");
  FitConfig cfg = *app.fit;
  if (!o.data.empty()) cfg.data = o.data;
  else cfg.data = relative_to_config(cfg.data, o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.n_boot) cfg.n_boot = *o.n_boot;
  if (!o.out.empty()) cfg.output = o.out;
  const Dataset ds = load_csv(cfg.data, cfg.design);
  if (o.validate_only) {
    std::cout << "fit config OK: " << ds.n() << " trajectories, " << cfg.design.n_stages() << " stages\n";
    return kOk;
  }
  const FitReport report = fit_report(ds, cfg, thread_count(o, app));
  Sink sink(cfg.output);
  write_fit_report(sink.get(), report);
  return kOk;
}

int cmd_experiment(const Options& o) {
  AppConfig app = load(o);
  ExperimentSection sec;
  if (app.experiment) sec = *app.experiment;
  ExperimentConfig& cfg = sec.config;
  if (!o.preset.empty()) apply_preset(cfg, o.preset);
  if (!o.models.empty()) {
    cfg.models.clear();
    for (const auto& m : o.models) cfg.models.push_back(model_by_name(m));
  }
  if (!o.methods.empty()) {
    cfg.methods.clear();
    for (const auto& m : o.methods) cfg.methods.push_back(parse_method(m));
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.n_boot) cfg.n_boot = *o.n_boot;
  if (o.n) cfg.n = *o.n;
  if (o.reps > 0) cfg.mc_reps = o.reps;
  if (!o.out.empty()) sec.output = o.out;
  cfg.threads = thread_count(o, app);
  cfg.validate();
  if (o.validate_only) {
    std::cout << "experiment config OK: " << cfg.models.size() << " models, " << cfg.mc_reps << " x " << cfg.n_boot
              << '\n';
    return kOk;
  }
  const ExperimentReport report = run_experiment(cfg, [](int done, int total) {
    if (done == total || done % 25 == 0) std::cerr << "\r" << done << "/" << total << " replications" << std::flush;
  });
  std::cerr << '\n';
  write_table(std::cout, report);
  if (!sec.output.empty()) {
    Sink s(sec.output);
    write_aggregate_csv(s.get(), report, cfg);
  }
  if (!sec.rep_log.empty()) {
    Sink s(sec.rep_log);
    write_rep_log(s.get(), report);
  }
  if (!sec.table.empty()) {
    Sink s(sec.table);
    write_table(s.get(), report);
  }
  std::cerr << std::fixed << std::setprecision(1) << "wall time " << report.seconds << " s\n";
  if (report.budget_exceeded) {
    std::cerr << "error: failed replications exceed the budget in at least one cell\n";
    return kNumerical;
  }
  return kOk;
}

int cmd_toy(const Options& o) {
  AppConfig app = load(o);
  ToyConfig cfg = app.toy ? *app.toy : ToyConfig{};
  if (o.seed) cfg.seed = *o.seed;
  if (o.reps > 0) cfg.reps = o.reps;
  if (!o.out.empty()) cfg.output = o.out;
  if (o.validate_only) {
    std::cout << "toy config OK\n";
    return kOk;
  }
  const auto cells = toy_sweep(cfg.mu_grid, cfg.lambda_grid, cfg.reps, cfg.seed, thread_count(o, app));
  Sink sink(cfg.output);
  write_toy_csv(sink.get(), cells);
  return kOk;
}

int cmd_simulate(const Options& o) {
  AppConfig app = load(o);
  SimulateConfig cfg;
  if (app.simulate) cfg = *app.simulate;
  else if (o.model.empty()) throw ConfigError("simulate needs --model or a 'simulate' config section");
  if (!o.model.empty()) cfg.model = model_by_name(o.model);
  if (o.n) cfg.n = *o.n;
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.output = o.out;
  if (cfg.n < 1) throw ConfigError("n must be positive");
  if (o.validate_only) {
    std::cout << "simulate config OK\n";
    return kOk;
  }
  const Dataset ds = simulate(cfg.model, cfg.n, cfg.seed);
  Sink sink(cfg.output);
  write_csv(sink.get(), ds);
  return kOk;
}

int cmd_true_params(const Options& o) {
  AppConfig app = load(o);
  TrueParamsConfig cfg;
  if (app.true_params) cfg = *app.true_params;
  if (!o.models.empty()) {
    cfg.models.clear();
    for (const auto& m : o.models) cfg.models.push_back(model_by_name(m));
  }
  if (cfg.models.empty())
    for (Suite s : {Suite::two_stage_binary, Suite::two_stage_ternary, Suite::three_stage_binary})
      for (const auto& m : suite_models(s)) cfg.models.push_back(m);
  if (!o.out.empty()) cfg.output = o.out;
  if (o.validate_only) {
    std::cout << "true-params config OK\n";
    return kOk;
  }
  Sink sink(cfg.output);
  std::ostream& out = sink.get();
  out << "model,stage,term,value\n" << std::setprecision(12);
  for (const auto& m : cfg.models) {
    const DesignSpec design = analysis_design(m);
    const auto beta = population_coefficients(m);
    for (int t = 1; t <= design.n_stages(); ++t) {
      const auto names = design.column_names(t);
      for (std::size_t j = 0; j < names.size(); ++j)
        out << m.name() << ',' << t << ',' << names[j] << ',' << beta[t - 1][j] << '\n';
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Q-learning with adaptive confidence intervals"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_flag("--validate", o.validate_only, "check the config (and data) without computing");
    sub->add_option("-t,--threads", o.threads, "worker threads (default: config, then $DTRCI_THREADS, then 1)");
    sub->add_option("-o,--out", o.out, "output path (default: config, then stdout)");
  };

  CLI::App* fit = app.add_subcommand("fit", "fit a dataset and report coefficient and contrast intervals");
  common(fit);
  fit->add_option("--data", o.data, "dataset CSV (overrides fit.data)");
  fit->add_option("--seed", o.seed, "bootstrap seed");
  fit->add_option("--n-boot", o.n_boot, "bootstrap resamples");

  CLI::App* exp = app.add_subcommand("experiment", "Monte Carlo coverage and width study");
  common(exp);
  exp->add_option("--preset", o.preset, "desk (200 x 500) or paper (1000 x 1000)")
      ->check(CLI::IsMember({"desk", "paper"}));
  exp->add_option("--models", o.models, "model names, e.g. ex1 ternary:ex3 three_stage:exB");
  exp->add_option("--methods", o.methods, "aci cpb ppe st");
  exp->add_option("--seed", o.seed, "master seed");
  exp->add_option("--n-boot", o.n_boot, "bootstrap resamples per replication");
  exp->add_option("--reps", o.reps, "Monte Carlo replications");
  exp->add_option("--n", o.n, "sample size");

  CLI::App* toy = app.add_subcommand("toy", "bias and MSE of max(mu1, mu2) estimators");
  common(toy);
  toy->add_option("--seed", o.seed, "seed");
  toy->add_option("--reps", o.reps, "replications per cell");

  CLI::App* sim = app.add_subcommand("simulate", "write a dataset drawn from a generative model");
  common(sim);
  sim->add_option("--model", o.model, "model name");
  sim->add_option("--n", o.n, "sample size");
  sim->add_option("--seed", o.seed, "seed");

  CLI::App* truth = app.add_subcommand("true-params", "population coefficients of the working models");
  common(truth);
  truth->add_option("--models", o.models, "model names (default: all built-in models)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (fit->parsed()) {
      if (o.config.empty()) throw ConfigError("fit needs --config");
      return cmd_fit(o);
    }
    if (exp->parsed()) return cmd_experiment(o);
    if (toy->parsed()) return cmd_toy(o);
    if (sim->parsed()) return cmd_simulate(o);
    if (truth->parsed()) return cmd_true_params(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}

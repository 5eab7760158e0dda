// Python module _dtrci. Wraps the C++ core with plain types: models by name,
// datasets as opaque handles, configs as JSON text, results as dicts.

#include "dtrci/config.hpp"
#include "dtrci/errors.hpp"
#include "dtrci/fitreport.hpp"
#include "dtrci/genmodels.hpp"
#include "dtrci/harness.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include <sstream>

namespace py = pybind11;
using namespace dtrci;

namespace {

BootstrapPlan plan_of(int n_boot, std::uint64_t seed, int threads) {
  BootstrapPlan p;
  p.n_boot = n_boot;
  p.seed = seed;
  p.threads = threads;
  return p;
}

std::string csv_text(const Dataset& ds) {
  std::ostringstream os;
  write_csv(os, ds);
  return os.str();
}

nlohmann::json parse_json(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
}

py::dict interval_dict(const Interval& iv) {
  py::dict d;
  d["lo"] = iv.lo;
  d["hi"] = iv.hi;
  d["method"] = iv.method;
  d["redraws"] = iv.redraws;
  return d;
}

}  // namespace

PYBIND11_MODULE(_dtrci, m) {
  m.doc() = "Q-learning with adaptive confidence intervals";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<DataError> data_error(m, "DataError", PyExc_ValueError);
  static py::exception<NumericalError> numerical_error(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const DataError& e) {
      py::set_error(data_error, e.what());
    } catch (const NumericalError& e) {
      py::set_error(numerical_error, e.what());
    }
  });

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("n", &Dataset::n)
      .def_property_readonly("n_stages", [](const Dataset& ds) { return ds.spec.n_stages(); })
      .def_property_readonly("design", [](const Dataset& ds) { return design_to_json(ds.spec).dump(); },
                             "working model as JSON text")
      .def("to_csv", &csv_text)
      .def("__len__", &Dataset::n);

  m.def(
      "read_csv",
      [](const std::string& text, const std::string& design_json) {
        std::istringstream in(text);
        return read_csv(in, design_from_json(parse_json(design_json)));
      },
      py::arg("text"), py::arg("design"), "parse CSV text under a working model given as JSON");

  m.def("model_names", [] {
    std::vector<std::string> names;
    for (Suite s : {Suite::two_stage_binary, Suite::two_stage_ternary, Suite::three_stage_binary})
      for (const auto& spec : suite_models(s)) names.push_back(spec.name());
    return names;
  });

  m.def(
      "simulate", [](const std::string& model, int n, std::uint64_t seed) { return simulate(model_by_name(model), n, seed); },
      py::arg("model"), py::arg("n"), py::arg("seed"));

  m.def(
      "analysis_design", [](const std::string& model) { return design_to_json(analysis_design(model_by_name(model))).dump(); },
      py::arg("model"));

  m.def(
      "fit",
      [](const Dataset& ds) {
        const QFit f = fit_qlearning(ds);
        std::vector<Eigen::VectorXd> out;
        for (int t = 1; t <= f.n_stages(); ++t) out.push_back(f.beta(t));
        return out;
      },
      py::arg("dataset"), "stage coefficients, first stage first");

  m.def(
      "aci_interval",
      [](const Dataset& ds, const Eigen::VectorXd& c, double alpha, int n_boot, std::uint64_t seed,
         const std::string& lambda_rule, int n_gamma, int threads) {
        GammaSearch search;
        search.n_gamma = n_gamma;
        const QFit f = fit_qlearning(ds);
        return interval_dict(
            aci_interval(ds, f, c, LambdaRule::parse(lambda_rule), search, plan_of(n_boot, seed, threads), alpha));
      },
      py::arg("dataset"), py::arg("c"), py::arg("alpha") = 0.05, py::arg("n_boot") = 1000, py::arg("seed") = 1,
      py::arg("lambda_rule") = "loglog", py::arg("n_gamma") = 1000, py::arg("threads") = 1,
      "adaptive interval for c' beta_1");

  m.def(
      "cpb_interval",
      [](const Dataset& ds, const Eigen::VectorXd& c, int stage, double alpha, int n_boot, std::uint64_t seed,
         int threads) {
        if (stage < 1 || stage > ds.spec.n_stages()) throw ConfigError("stage out of range");
        auto stat = [&](const Design&, const QFit& f) { return c.dot(f.beta(stage)); };
        return interval_dict(cpb_interval(ds, stat, plan_of(n_boot, seed, threads), alpha));
      },
      py::arg("dataset"), py::arg("c"), py::arg("stage") = 1, py::arg("alpha") = 0.05, py::arg("n_boot") = 1000,
      py::arg("seed") = 1, py::arg("threads") = 1, "centred percentile interval for c' beta_stage");

  m.def(
      "fit_report",
      [](const Dataset& ds, double alpha, int n_boot, std::uint64_t seed, const std::string& lambda_rule, int threads) {
        FitConfig cfg;
        cfg.design = ds.spec;
        cfg.alpha = alpha;
        cfg.n_boot = n_boot;
        cfg.seed = seed;
        cfg.lambda_rule = LambdaRule::parse(lambda_rule);
        std::ostringstream os;
        write_fit_report(os, fit_report(ds, cfg, threads));
        return os.str();
      },
      py::arg("dataset"), py::arg("alpha") = 0.05, py::arg("n_boot") = 1000, py::arg("seed") = 1,
      py::arg("lambda_rule") = "loglog", py::arg("threads") = 1, "the text report printed by `dtrci fit`");

  m.def(
      "true_parameter",
      [](const std::string& model, int stage, const Eigen::VectorXd& c) {
        return true_parameter(model_by_name(model), stage, c);
      },
      py::arg("model"), py::arg("stage"), py::arg("c"));

  m.def(
      "regularity",
      [](const std::string& model) {
        const RegularityMeasures r = regularity_measures(model_by_name(model));
        return py::make_tuple(r.p, r.phi);
      },
      py::arg("model"), "(p, phi) of the last stage");

  m.def(
      "toy_sweep",
      [](const std::vector<double>& mu, const std::vector<double>& lambdas, int reps, std::uint64_t seed,
         int threads) {
        py::list rows;
        for (const auto& c : toy_sweep(mu, lambdas, reps, seed, threads)) {
          py::dict d;
          d["method"] = c.method;
          d["mu_diff"] = c.mu_diff;
          d["lambda"] = c.lambda;
          d["bias"] = c.bias;
          d["mse"] = c.mse;
          d["mc_se"] = c.mc_se;
          rows.append(d);
        }
        return rows;
      },
      py::arg("mu_diff"), py::arg("lambdas"), py::arg("reps"), py::arg("seed") = 1, py::arg("threads") = 1);

  m.def(
      "run_experiment",
      [](const std::string& experiment_json) {
        nlohmann::json root;
        root["experiment"] = parse_json(experiment_json);
        const AppConfig app = parse_config(root);
        const ExperimentConfig& cfg = app.experiment->config;
        cfg.validate();
        ExperimentReport rep;
        {
          py::gil_scoped_release release;
          rep = run_experiment(cfg);
        }
        py::list cells;
        for (const auto& c : rep.cells) {
          py::dict d;
          d["model"] = c.model;
          d["method"] = c.method;
          d["target"] = c.target;
          d["lambda_rule"] = c.lambda_rule;
          d["truth"] = c.truth;
          d["coverage"] = c.coverage;
          d["width"] = c.width;
          d["mc_se"] = c.mc_se;
          d["flag"] = c.flag;
          d["reps"] = c.reps;
          d["failed"] = c.failed;
          cells.append(d);
        }
        return cells;
      },
      py::arg("config"), "run the Monte Carlo study for an 'experiment' section given as JSON text");
}

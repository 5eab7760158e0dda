#pragma once

#include "dtrci/bounds.hpp"
#include "dtrci/dataio.hpp"
#include "dtrci/genmodels.hpp"
#include "dtrci/harness.hpp"
#include "dtrci/pretest.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace dtrci {

// Every parser rejects unknown keys and wrong types with ConfigError.

// {"stages": [{"n_covariates": 2, "main": ["1", "X1"], "interact": ["1"],
//              "coding": "contrast" | {"kind": "indicator", "n_treatments": 3}
//                        | {"kind": "custom", "rows": [[...], ...]},
//              "optional": false}, ...]}
DesignSpec design_from_json(const nlohmann::json& j);
nlohmann::json design_to_json(const DesignSpec& spec);

// A built-in name such as "ternary:ex3", or
// {"suite": "binary", "label": "mine", "effects": [...], "delta": [d1, d2]}.
GenModelSpec model_from_json(const nlohmann::json& j);

struct ContrastSpec {
  std::string name;
  int stage = 1;
  Eigen::VectorXd c;
};

struct FitConfig {
  std::string data;
  DesignSpec design;
  double alpha = 0.05;
  int n_boot = 1000;
  std::uint64_t seed = 1;
  int max_redraws = 25;
  LambdaRule lambda_rule;
  GammaSearch search;
  std::vector<ContrastSpec> contrasts;  // extra rows for the evidence table
  bool evidence_table = true;           // one row per distinct history per stage
  std::string output;                   // empty: stdout
};

struct ToyConfig {
  std::vector<double> mu_grid{0.0, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0};
  std::vector<double> lambda_grid{0.0, 0.5, 1.0, 1.5, 2.0};
  int reps = 10000;
  std::uint64_t seed = 1;
  std::string output;
};

struct SimulateConfig {
  GenModelSpec model;
  int n = 150;
  std::uint64_t seed = 1;
  std::string output;
};

struct ExperimentSection {
  ExperimentConfig config;
  std::string output;   // aggregate CSV
  std::string rep_log;  // per-replication CSV
  std::string table;    // text table
};

struct TrueParamsConfig {
  std::vector<GenModelSpec> models;
  std::string output;
};

struct AppConfig {
  std::optional<FitConfig> fit;
  std::optional<ExperimentSection> experiment;
  std::optional<ToyConfig> toy;
  std::optional<SimulateConfig> simulate;
  std::optional<TrueParamsConfig> true_params;
  int threads = 0;  // 0: not set
};

AppConfig parse_config(const nlohmann::json& j);
AppConfig load_config(const std::string& path);

}  // namespace dtrci

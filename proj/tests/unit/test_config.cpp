#include <doctest.h>

#include "dtrci/config.hpp"
#include "dtrci/errors.hpp"

#include <cstdio>
#include <fstream>
#include <string>

using namespace dtrci;
using nlohmann::json;

namespace {

json ex3_design() {
  return json::parse(R"({"stages": [
    {"main": ["1", "X1_1"], "interact": ["1", "X1_1"]},
    {"main": ["1", "X1_1", "A1", "X1_1*A1"], "interact": ["1", "X2_1", "A1"]}
  ]})");
}

json full_config() {
  return json::parse(R"({
    "threads": 2,
    "fit": {"data": "x.csv", "alpha": 0.1, "n_boot": 200, "seed": 9, "lambda_rule": "log",
            "n_gamma": 50, "gamma_box_mult": 3.0, "include_center": false, "gamma_seed": 4,
            "contrasts": [{"name": "effect", "stage": 1, "c": [0, 0, 1, 0]}],
            "evidence_table": false, "output": "fit.txt"},
    "experiment": {"preset": "desk", "models": ["ex1", "ternary:ex6"], "methods": ["aci", "CPB"],
                   "targets": "beta101", "n": 100, "seed": 3, "lambda_rules": ["loglog", "sqrt_n"],
                   "st_variant": "squared", "failure_budget": 0.02, "output": "a.csv", "rep_log": "r.csv",
                   "table": "t.txt"},
    "toy": {"mu_grid": [0, 1], "lambda_grid": [0.5], "reps": 100, "seed": 5, "output": "toy.csv"},
    "simulate": {"model": {"suite": "binary", "label": "mine", "effects": [0, 0, 0, 0, 1, 0, 0]}, "n": 30},
    "true_params": {"models": "three_stage:exa"}
  })");
}

}  // namespace

TEST_CASE("a full config parses with every key applied") {
  json j = full_config();
  j["fit"]["design"] = ex3_design();
  const AppConfig app = parse_config(j);
  CHECK(app.threads == 2);
  REQUIRE(app.fit);
  CHECK(app.fit->alpha == 0.1);
  CHECK(app.fit->n_boot == 200);
  CHECK(app.fit->seed == 9);
  CHECK(app.fit->search.n_gamma == 50);
  CHECK_FALSE(app.fit->search.include_center);
  CHECK(app.fit->search.rng_seed == 4);
  CHECK(app.fit->contrasts.size() == 1);
  CHECK_FALSE(app.fit->evidence_table);
  CHECK(app.fit->design.stage(2).dim() == 7);

  REQUIRE(app.experiment);
  const ExperimentConfig& e = app.experiment->config;
  CHECK(e.mc_reps == 200);  // from the preset
  CHECK(e.n_boot == 500);
  CHECK(e.models.size() == 2);
  CHECK(e.models[1].suite == Suite::two_stage_ternary);
  CHECK(e.methods == std::vector<Method>{Method::aci, Method::cpb});
  CHECK(e.targets == std::vector<std::string>{"beta101"});
  CHECK(e.lambda_rules.size() == 2);
  CHECK(e.st_variant == StVariant::squared);
  CHECK(app.experiment->rep_log == "r.csv");

  REQUIRE(app.toy);
  CHECK(app.toy->mu_grid.size() == 2);
  CHECK(app.toy->reps == 100);
  REQUIRE(app.simulate);
  CHECK(app.simulate->model.label == "mine");
  CHECK(app.simulate->n == 30);
  REQUIRE(app.true_params);
  CHECK(app.true_params->models.front().suite == Suite::three_stage_binary);
}

TEST_CASE("explicit values override the preset") {
  const auto app = parse_config(json::parse(R"({"experiment": {"preset": "paper", "models": "ex2", "n_boot": 40}})"));
  CHECK(app.experiment->config.mc_reps == 1000);
  CHECK(app.experiment->config.n_boot == 40);
}

TEST_CASE("unknown keys are rejected at every level") {
  const std::vector<std::vector<std::string>> paths = {
      {}, {"fit"}, {"experiment"}, {"toy"}, {"simulate"}, {"true_params"}};
  for (const auto& path : paths) {
    json j = full_config();
    j["fit"]["design"] = ex3_design();
    json* at = &j;
    for (const auto& p : path) at = &(*at)[p];
    (*at)["bogus"] = 1;
    CAPTURE(path.empty() ? std::string("top") : path.front());
    CHECK_THROWS_AS(parse_config(j), ConfigError);
  }
  json j = full_config();
  j["fit"]["design"] = ex3_design();
  j["fit"]["design"]["stages"][0]["extra"] = true;
  CHECK_THROWS_AS(parse_config(j), ConfigError);
  j = full_config();
  j["fit"]["design"] = ex3_design();
  j["fit"]["contrasts"][0]["weight"] = 2;
  CHECK_THROWS_AS(parse_config(j), ConfigError);
  j = full_config();
  j["fit"]["design"] = ex3_design();
  j["simulate"]["model"]["colour"] = "red";
  CHECK_THROWS_AS(parse_config(j), ConfigError);
}

TEST_CASE("type and range errors") {
  auto bad = [](const char* text) {
    CAPTURE(std::string(text));
    CHECK_THROWS_AS(parse_config(json::parse(text)), ConfigError);
  };
  bad(R"({"threads": "many"})");
  bad(R"({"threads": 0})");
  bad(R"({"toy": {"reps": 0}})");
  bad(R"({"toy": {"mu_grid": []}})");
  bad(R"({"toy": {"mu_grid": ["a"]}})");
  bad(R"({"toy": {"seed": -1}})");
  bad(R"({"experiment": {"methods": ["aci"]}})");
  bad(R"({"experiment": {"models": "ex9"}})");
  bad(R"({"experiment": {"models": "ex1", "methods": ["bogus"]}})");
  bad(R"({"experiment": {"models": "ex1", "lambda_rules": ["often"]}})");
  bad(R"({"experiment": {"models": "ex1", "preset": "enormous"}})");
  bad(R"({"experiment": {"models": "ex1", "n": 1.5}})");
  bad(R"({"simulate": {"n": 10}})");
  bad(R"({"simulate": {"model": {"suite": "binary", "effects": [1, 2]}}})");
  bad(R"({"simulate": {"model": {"suite": "binary"}}})");
  bad(R"({"simulate": {"model": {"suite": "quaternary", "effects": [1]}}})");
  bad(R"({"fit": {"data": "x.csv"}})");
  bad(R"({"fit": {"design": {"stages": []}}})");
  bad(R"([1, 2])");
}

TEST_CASE("fit contrasts must match the design") {
  json j = full_config();
  j["fit"]["design"] = ex3_design();
  j["fit"]["contrasts"][0]["c"] = {1, 0};
  CHECK_THROWS_AS(parse_config(j), ConfigError);
  j["fit"]["contrasts"][0]["c"] = {1, 0, 0, 0};
  j["fit"]["contrasts"][0]["stage"] = 3;
  CHECK_THROWS_AS(parse_config(j), ConfigError);
  j["fit"]["alpha"] = 1.0;
  j["fit"]["contrasts"][0]["stage"] = 1;
  CHECK_THROWS_AS(parse_config(j), ConfigError);
}

TEST_CASE("design JSON: default covariate counts and round trip") {
  const DesignSpec d = design_from_json(ex3_design());
  CHECK(d.stage(1).n_covariates == 1);
  CHECK(d.stage(2).n_covariates == 1);
  CHECK(d.stage(1).dim() == 4);

  json j = json::parse(R"({"stages": [
    {"n_covariates": 3, "main": ["1", "X1_2"], "interact": ["1"],
     "coding": {"kind": "indicator", "n_treatments": 3}},
    {"main": ["1", "Y1"], "interact": ["1", "X2_2"], "optional": true,
     "coding": {"kind": "custom", "rows": [[0, -1], [-1, 0.5], [1, 0.5]]}}
  ]})");
  const DesignSpec e = design_from_json(j);
  CHECK(e.stage(1).n_covariates == 3);
  CHECK(e.stage(2).n_covariates == 2);
  CHECK(e.stage(2).optional);
  CHECK(e.stage(1).dim() == 2 + 2);
  CHECK(e.stage(2).dim() == 2 + 2 * 2);
  const json once = design_to_json(e);
  CHECK(design_to_json(design_from_json(once)) == once);
  CHECK(design_to_json(design_from_json(design_to_json(d))) == design_to_json(d));

  CHECK_THROWS_AS(design_from_json(json::parse(R"({"stages": [{"coding": "indicator"}]})")), ConfigError);
  CHECK_THROWS_AS(design_from_json(json::parse(R"({"stages": [{"coding": {"kind": "odd"}}]})")), ConfigError);
  CHECK_THROWS_AS(design_from_json(json::parse(R"({"stages": [{"main": "1"}]})")), ConfigError);
  CHECK_THROWS_AS(design_from_json(json::parse(R"({"stages": [{"main": [1]}]})")), ConfigError);
  CHECK_THROWS_AS(design_from_json(json::parse(R"({"stages": [{"coding": {"kind": "custom", "rows": [[1, 2], [3]]}}]})")),
                  ConfigError);
}

TEST_CASE("model JSON") {
  CHECK(model_from_json("ternary:EX3").name() == "ternary:ex3");
  const GenModelSpec m = model_from_json(json::parse(
      R"({"suite": "ternary", "label": "t", "effects": [0,0,0,0,1,0,0,0,0,0], "delta": [0.1, 0.2],
          "ternary_coding": [[1, 0], [0, 1], [-1, -1]]})"));
  CHECK(m.delta[1] == 0.2);
  CHECK(m.ternary_coding(2, 1) == -1.0);
  CHECK_THROWS_AS(model_from_json(json::parse(R"({"suite": "ternary", "effects": [0,0,0,0,0,0,0,0,0,0],
                                                  "ternary_coding": [[1, 2], [2, 4], [3, 6]]})")),
                  ConfigError);
  CHECK_THROWS_AS(model_from_json(json::parse(R"({"suite": "binary", "effects": [0,0,0,0,0,0,0], "delta": [1]})")),
                  ConfigError);
}

TEST_CASE("load_config reports unreadable files as config errors") {
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
  const std::string path = "dtrci_test_config.json";
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_config(path), ConfigError);
  {
    std::ofstream out(path);
    out << R"({"toy": {"reps": 10}})";
  }
  CHECK(load_config(path).toy->reps == 10);
  std::remove(path.c_str());
}

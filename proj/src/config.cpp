#include "dtrci/config.hpp"

#include "dtrci/errors.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <type_traits>

namespace dtrci {

using nlohmann::json;

namespace {

void expect_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
}

void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  expect_object(j, where);
  for (const auto& [k, v] : j.items()) {
    (void)v;
    if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
      throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  // json silently truncates 1.5 to an int
  if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>)
    if (j.contains(key) && !j.at(key).is_number_integer())
      throw ConfigError(where + "." + key + " must be an integer");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (j.contains(key)) out = get<T>(j, key, where);
}

std::uint64_t read_seed(const json& j, const char* key, std::uint64_t fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_unsigned()) throw ConfigError(where + "." + key + " must be a non-negative integer");
  return j.at(key).get<std::uint64_t>();
}

int positive(const json& j, const char* key, int fallback, const std::string& where) {
  int v = fallback;
  read(j, key, v, where);
  if (v < 1) throw ConfigError(where + "." + key + " must be positive");
  return v;
}

Eigen::MatrixXd matrix_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + " must be a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Eigen::MatrixXd m(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ConfigError(where + " rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw ConfigError(where + " entries must be numbers");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

ActionCoding coding_from(const json& j, const std::string& where) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "contrast") return ActionCoding::contrast();
    throw ConfigError(where + ": coding '" + s + "' needs an object with n_treatments");
  }
  allow_keys(j, {"kind", "n_treatments", "rows"}, where);
  const auto kind = get<std::string>(j, "kind", where);
  if (kind == "contrast") return ActionCoding::contrast();
  if (kind == "custom") return ActionCoding::custom(matrix_from(j.at("rows"), where + ".rows"));
  const int k = positive(j, "n_treatments", 0, where);
  if (kind == "indicator") return ActionCoding::indicator(k);
  if (kind == "indicator_full") return ActionCoding::indicator_full(k);
  throw ConfigError(where + ": unknown coding kind '" + kind + "'");
}

std::vector<FeatureTerm> terms_from(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + " must be an array of strings");
  std::vector<FeatureTerm> out;
  for (const auto& t : j) {
    if (!t.is_string()) throw ConfigError(where + " must be an array of strings");
    out.push_back(FeatureTerm::parse(t.get<std::string>()));
  }
  return out;
}

std::vector<std::string> strings_from(const json& j, const std::string& where) {
  if (j.is_string()) return {j.get<std::string>()};
  if (!j.is_array()) throw ConfigError(where + " must be a string or an array of strings");
  std::vector<std::string> out;
  for (const auto& s : j) {
    if (!s.is_string()) throw ConfigError(where + " must contain strings");
    out.push_back(s.get<std::string>());
  }
  return out;
}

std::vector<double> doubles_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + " must be a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw ConfigError(where + " must contain numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

GammaSearch search_from(const json& j, const std::string& where, GammaSearch gs) {
  if (j.contains("n_gamma")) gs.n_gamma = positive(j, "n_gamma", gs.n_gamma, where);
  read(j, "gamma_box_mult", gs.box_halfwidth_multiplier, where);
  read(j, "include_center", gs.include_center, where);
  gs.rng_seed = read_seed(j, "gamma_seed", gs.rng_seed, where);
  if (!(gs.box_halfwidth_multiplier > 0.0)) throw ConfigError(where + ".gamma_box_mult must be positive");
  return gs;
}

FitConfig fit_from(const json& j) {
  const std::string w = "fit";
  allow_keys(j,
             {"data", "design", "alpha", "n_boot", "seed", "max_redraws", "lambda_rule", "n_gamma", "gamma_box_mult",
              "include_center", "gamma_seed", "contrasts", "evidence_table", "output"},
             w);
  FitConfig f;
  f.data = get<std::string>(j, "data", w);
  if (!j.contains("design")) throw ConfigError("fit.design is required");
  f.design = design_from_json(j.at("design"));
  read(j, "alpha", f.alpha, w);
  if (!(f.alpha > 0.0 && f.alpha < 1.0)) throw ConfigError("fit.alpha must lie in (0, 1)");
  f.n_boot = positive(j, "n_boot", f.n_boot, w);
  f.seed = read_seed(j, "seed", f.seed, w);
  read(j, "max_redraws", f.max_redraws, w);
  if (j.contains("lambda_rule")) f.lambda_rule = LambdaRule::parse(get<std::string>(j, "lambda_rule", w));
  f.search = search_from(j, w, f.search);
  read(j, "evidence_table", f.evidence_table, w);
  read(j, "output", f.output, w);
  if (j.contains("contrasts")) {
    if (!j.at("contrasts").is_array()) throw ConfigError("fit.contrasts must be an array");
    for (const auto& c : j.at("contrasts")) {
      allow_keys(c, {"name", "stage", "c"}, "fit.contrasts[]");
      ContrastSpec cs;
      cs.name = get<std::string>(c, "name", "fit.contrasts[]");
      cs.stage = get<int>(c, "stage", "fit.contrasts[]");
      auto v = doubles_from(c.at("c"), "fit.contrasts[].c");
      cs.c = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
      if (cs.stage < 1 || cs.stage > f.design.n_stages()) throw ConfigError("fit.contrasts[].stage out of range");
      if (cs.c.size() != f.design.stage(cs.stage).dim())
        throw ConfigError("contrast '" + cs.name + "' has the wrong length");
      f.contrasts.push_back(cs);
    }
  }
  return f;
}

ExperimentSection experiment_from(const json& j) {
  const std::string w = "experiment";
  allow_keys(j,
             {"preset", "models", "methods", "targets", "n", "mc_reps", "n_boot", "seed", "lambda_rules", "alpha",
              "n_gamma", "gamma_box_mult", "include_center", "gamma_seed", "st_variant", "max_redraws",
              "failure_budget", "output", "rep_log", "table"},
             w);
  ExperimentSection sec;
  ExperimentConfig& c = sec.config;
  if (j.contains("preset")) apply_preset(c, get<std::string>(j, "preset", w));
  if (!j.contains("models")) throw ConfigError("experiment.models is required");
  const json& models = j.at("models");
  if (models.is_array())
    for (const auto& m : models) c.models.push_back(model_from_json(m));
  else
    c.models.push_back(model_from_json(models));
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : strings_from(j.at("methods"), w + ".methods")) c.methods.push_back(parse_method(m));
  }
  if (j.contains("targets")) c.targets = strings_from(j.at("targets"), w + ".targets");
  c.n = positive(j, "n", c.n, w);
  c.mc_reps = positive(j, "mc_reps", c.mc_reps, w);
  c.n_boot = positive(j, "n_boot", c.n_boot, w);
  c.seed = read_seed(j, "seed", c.seed, w);
  if (j.contains("lambda_rules")) {
    c.lambda_rules.clear();
    for (const auto& r : strings_from(j.at("lambda_rules"), w + ".lambda_rules"))
      c.lambda_rules.push_back(LambdaRule::parse(r));
  }
  read(j, "alpha", c.alpha, w);
  c.search = search_from(j, w, c.search);
  if (j.contains("st_variant")) c.st_variant = parse_st_variant(get<std::string>(j, "st_variant", w));
  read(j, "max_redraws", c.max_redraws, w);
  read(j, "failure_budget", c.failure_budget, w);
  read(j, "output", sec.output, w);
  read(j, "rep_log", sec.rep_log, w);
  read(j, "table", sec.table, w);
  return sec;
}

}  // namespace

DesignSpec design_from_json(const json& j) {
  allow_keys(j, {"stages"}, "design");
  if (!j.contains("stages") || !j.at("stages").is_array() || j.at("stages").empty())
    throw ConfigError("design.stages must be a non-empty array");
  DesignSpec spec;
  for (std::size_t i = 0; i < j.at("stages").size(); ++i) {
    const json& s = j.at("stages")[i];
    const std::string w = "design.stages[" + std::to_string(i) + "]";
    allow_keys(s, {"n_covariates", "main", "interact", "coding", "optional"}, w);
    StageSpec st;
    st.main = terms_from(s.contains("main") ? s.at("main") : json::array(), w + ".main");
    st.interact = terms_from(s.contains("interact") ? s.at("interact") : json::array(), w + ".interact");
    st.coding = s.contains("coding") ? coding_from(s.at("coding"), w + ".coding") : ActionCoding::contrast();
    st.n_covariates = -1;
    read(s, "n_covariates", st.n_covariates, w);
    read(s, "optional", st.optional, w);
    spec.stages.push_back(std::move(st));
  }
  // default covariate counts: the largest referenced index per stage
  for (int t = 1; t <= spec.n_stages(); ++t) {
    if (spec.stage(t).n_covariates >= 0) continue;
    int count = 0;
    for (const auto& st : spec.stages)
      for (const auto* terms : {&st.main, &st.interact})
        for (const auto& term : *terms)
          for (const auto& f : term.factors)
            if (f.kind == VariableRef::Kind::covariate && f.stage == t) count = std::max(count, f.index + 1);
    spec.stages[t - 1].n_covariates = count;
  }
  spec.validate();
  return spec;
}

json design_to_json(const DesignSpec& spec) {
  json stages = json::array();
  for (const auto& st : spec.stages) {
    json s;
    s["n_covariates"] = st.n_covariates;
    s["optional"] = st.optional;
    for (const auto& t : st.main) s["main"].push_back(t.label);
    for (const auto& t : st.interact) s["interact"].push_back(t.label);
    if (!s.contains("main")) s["main"] = json::array();
    if (!s.contains("interact")) s["interact"] = json::array();
    json coding;
    coding["kind"] = st.coding.name();
    if (st.coding.kind() == CodingKind::custom) {
      for (Eigen::Index r = 0; r < st.coding.matrix().rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < st.coding.matrix().cols(); ++c) row.push_back(st.coding.matrix()(r, c));
        coding["rows"].push_back(row);
      }
    } else if (st.coding.kind() != CodingKind::contrast) {
      coding["n_treatments"] = st.coding.n_treatments();
    }
    s["coding"] = coding;
    stages.push_back(s);
  }
  return json{{"stages", stages}};
}

GenModelSpec model_from_json(const json& j) {
  if (j.is_string()) return model_by_name(j.get<std::string>());
  const std::string w = "model";
  allow_keys(j, {"suite", "label", "effects", "delta", "ternary_coding"}, w);
  GenModelSpec m;
  m.suite = parse_suite(get<std::string>(j, "suite", w));
  m.label = j.contains("label") ? get<std::string>(j, "label", w) : "custom";
  if (!j.contains("effects")) throw ConfigError("model.effects is required");
  m.effects = doubles_from(j.at("effects"), w + ".effects");
  if (j.contains("delta")) {
    auto d = doubles_from(j.at("delta"), w + ".delta");
    if (d.size() != 2) throw ConfigError("model.delta must have two entries");
    m.delta = {d[0], d[1]};
  }
  if (j.contains("ternary_coding")) {
    m.ternary_coding = matrix_from(j.at("ternary_coding"), w + ".ternary_coding");
    if (m.ternary_coding.rows() != 3 || m.ternary_coding.cols() != 2)
      throw ConfigError("model.ternary_coding must be 3 x 2");
    ActionCoding::custom(m.ternary_coding);
  }
  const std::size_t want = m.suite == Suite::two_stage_binary ? 7 : 10;
  if (m.effects.size() != want) throw ConfigError("model.effects needs " + std::to_string(want) + " entries");
  return m;
}

AppConfig parse_config(const json& j) {
  allow_keys(j, {"fit", "experiment", "toy", "simulate", "true_params", "threads"}, "config");
  AppConfig app;
  if (j.contains("threads")) {
    app.threads = get<int>(j, "threads", "config");
    if (app.threads < 1) throw ConfigError("threads must be positive");
  }
  if (j.contains("fit")) app.fit = fit_from(j.at("fit"));
  if (j.contains("experiment")) app.experiment = experiment_from(j.at("experiment"));
  if (j.contains("toy")) {
    const json& t = j.at("toy");
    allow_keys(t, {"mu_grid", "lambda_grid", "reps", "seed", "output"}, "toy");
    ToyConfig c;
    if (t.contains("mu_grid")) c.mu_grid = doubles_from(t.at("mu_grid"), "toy.mu_grid");
    if (t.contains("lambda_grid")) c.lambda_grid = doubles_from(t.at("lambda_grid"), "toy.lambda_grid");
    c.reps = positive(t, "reps", c.reps, "toy");
    c.seed = read_seed(t, "seed", c.seed, "toy");
    read(t, "output", c.output, "toy");
    app.toy = c;
  }
  if (j.contains("simulate")) {
    const json& s = j.at("simulate");
    allow_keys(s, {"model", "n", "seed", "output"}, "simulate");
    SimulateConfig c;
    if (!s.contains("model")) throw ConfigError("simulate.model is required");
    c.model = model_from_json(s.at("model"));
    c.n = positive(s, "n", c.n, "simulate");
    c.seed = read_seed(s, "seed", c.seed, "simulate");
    read(s, "output", c.output, "simulate");
    app.simulate = c;
  }
  if (j.contains("true_params")) {
    const json& s = j.at("true_params");
    allow_keys(s, {"models", "output"}, "true_params");
    TrueParamsConfig c;
    if (s.contains("models")) {
      const json& models = s.at("models");
      if (models.is_array())
        for (const auto& m : models) c.models.push_back(model_from_json(m));
      else
        c.models.push_back(model_from_json(models));
    }
    read(s, "output", c.output, "true_params");
    app.true_params = c;
  }
  return app;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace dtrci

#include "dtrci/dataio.hpp"

#include "dtrci/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

namespace dtrci {

namespace {

bool same_value(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> parse_double(std::string_view s) {
  // std::from_chars for double is available in libstdc++ 11+
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

// Parses "<letter><stage>[_<index>]".
struct ColumnName {
  char letter;
  int stage;
  std::optional<int> index;
};

std::optional<ColumnName> parse_column_name(std::string_view s) {
  if (s.size() < 2) return std::nullopt;
  ColumnName c{s[0], 0, std::nullopt};
  std::string_view rest = s.substr(1);
  auto us = rest.find('_');
  auto stage = parse_int(rest.substr(0, us));
  if (!stage || *stage < 1) return std::nullopt;
  c.stage = *stage;
  if (us != std::string_view::npos) {
    auto idx = parse_int(rest.substr(us + 1));
    if (!idx || *idx < 1) return std::nullopt;
    c.index = *idx;
  }
  return c;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

bool StageRecord::operator==(const StageRecord& o) const {
  if (action != o.action || !same_value(reward, o.reward)) return false;
  if (covariates.size() != o.covariates.size()) return false;
  for (std::size_t i = 0; i < covariates.size(); ++i)
    if (!same_value(covariates[i], o.covariates[i])) return false;
  return true;
}

ActionCoding ActionCoding::indicator(int k) {
  if (k < 1) throw ConfigError("indicator coding needs at least one treatment");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k, k - 1);
  for (int a = 0; a < k - 1; ++a) m(a, a) = 1.0;
  return ActionCoding(CodingKind::indicator, m);
}

ActionCoding ActionCoding::indicator_full(int k) {
  if (k < 1) throw ConfigError("indicator coding needs at least one treatment");
  return ActionCoding(CodingKind::indicator_full, Eigen::MatrixXd::Identity(k, k));
}

ActionCoding ActionCoding::contrast() {
  Eigen::MatrixXd m(2, 1);
  m << 1.0, -1.0;
  return ActionCoding(CodingKind::contrast, m);
}

ActionCoding ActionCoding::custom(Eigen::MatrixXd rows) {
  if (rows.rows() < 1) throw ConfigError("custom coding needs at least one treatment");
  if (!rows.allFinite()) throw ConfigError("custom coding has non-finite entries");
  if (rows.cols() > 0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(rows);
    if (lu.rank() < rows.cols()) throw ConfigError("custom coding columns are linearly dependent");
  }
  return ActionCoding(CodingKind::custom, std::move(rows));
}

std::string ActionCoding::name() const {
  switch (kind_) {
    case CodingKind::indicator: return "indicator";
    case CodingKind::indicator_full: return "indicator_full";
    case CodingKind::contrast: return "contrast";
    case CodingKind::custom: return "custom";
  }
  return "custom";
}

FeatureTerm FeatureTerm::parse(std::string_view text) {
  FeatureTerm term;
  std::string label;
  for (char ch : text)
    if (ch != ' ' && ch != '\t') label.push_back(ch);
  if (label.empty()) throw ConfigError("empty feature term");
  term.label = label;
  if (label == "1") return term;
  std::string_view rest = label;
  while (!rest.empty()) {
    auto star = rest.find('*');
    std::string_view tok = rest.substr(0, star);
    rest = star == std::string_view::npos ? std::string_view{} : rest.substr(star + 1);
    if (tok == "1") continue;
    auto col = parse_column_name(tok);
    if (!col) throw ConfigError("cannot parse feature factor '" + std::string(tok) + "'");
    VariableRef ref{VariableRef::Kind::covariate, col->stage, col->index.value_or(1) - 1};
    switch (col->letter) {
      case 'X': ref.kind = VariableRef::Kind::covariate; break;
      case 'A': ref.kind = VariableRef::Kind::action; break;
      case 'Y':
        if (col->index) throw ConfigError("reward reference takes no index: " + std::string(tok));
        ref.kind = VariableRef::Kind::reward;
        break;
      default: throw ConfigError("unknown variable '" + std::string(tok) + "'");
    }
    term.factors.push_back(ref);
  }
  return term;
}

void DesignSpec::validate() const {
  if (stages.empty()) throw ConfigError("design has no stages");
  for (int t = 1; t <= n_stages(); ++t) {
    const StageSpec& st = stage(t);
    if (st.n_covariates < 0) throw ConfigError("negative covariate count at stage " + std::to_string(t));
    if (st.optional && t == 1) throw ConfigError("stage 1 cannot be optional");
    auto check = [&](const FeatureTerm& term) {
      for (const auto& f : term.factors) {
        const std::string where = "term '" + term.label + "' at stage " + std::to_string(t);
        if (f.stage < 1 || f.stage > t) throw ConfigError(where + " references a later or unknown stage");
        const StageSpec& ref = stage(f.stage);
        switch (f.kind) {
          case VariableRef::Kind::covariate:
            if (f.index >= ref.n_covariates) throw ConfigError(where + " references a missing covariate");
            break;
          case VariableRef::Kind::action:
            if (f.stage >= t) throw ConfigError(where + " references the current or a later action");
            if (f.index >= ref.coding.n_columns()) throw ConfigError(where + " references a missing coding column");
            break;
          case VariableRef::Kind::reward:
            if (f.stage >= t) throw ConfigError(where + " references the current or a later reward");
            break;
        }
      }
    };
    for (const auto& term : st.main) check(term);
    for (const auto& term : st.interact) check(term);
  }
}

std::vector<std::string> DesignSpec::column_names(int t) const {
  const StageSpec& st = stage(t);
  std::vector<std::string> names;
  for (const auto& term : st.main) names.push_back(term.label);
  const std::string a = "A" + std::to_string(t);
  for (int k = 0; k < st.coding.n_columns(); ++k) {
    std::string prefix = st.coding.n_columns() == 1 ? a : a + "_" + std::to_string(k + 1);
    for (const auto& term : st.interact)
      names.push_back(term.label == "1" ? prefix : prefix + ":" + term.label);
  }
  return names;
}

void Dataset::validate() const {
  spec.validate();
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& tr = trajectories[i];
    const long row = static_cast<long>(i) + 1;
    if (static_cast<int>(tr.stages.size()) != spec.n_stages())
      throw DataError("trajectory has " + std::to_string(tr.stages.size()) + " stages", row);
    bool absent_before = false;
    for (int t = 1; t <= spec.n_stages(); ++t) {
      const StageSpec& st = spec.stage(t);
      const StageRecord& rec = tr.stages[t - 1];
      if (static_cast<int>(rec.covariates.size()) != st.n_covariates)
        throw DataError("stage " + std::to_string(t) + " covariate count mismatch", row);
      if (!std::isfinite(rec.reward)) throw DataError("non-finite reward at stage " + std::to_string(t), row);
      if (!rec.present()) {
        if (!st.optional) throw DataError("missing action at stage " + std::to_string(t), row);
        absent_before = true;
        continue;
      }
      if (absent_before) throw DataError("stage " + std::to_string(t) + " follows an absent stage", row);
      if (*rec.action < 1 || *rec.action > st.n_treatments())
        throw DataError("action code out of range at stage " + std::to_string(t), row);
      for (double x : rec.covariates)
        if (!std::isfinite(x)) throw DataError("non-finite covariate at stage " + std::to_string(t), row);
    }
  }
}

Dataset read_csv(std::istream& in, const DesignSpec& spec) {
  spec.validate();
  const int T = spec.n_stages();
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty input: missing header");

  // Column slot: (letter, stage, covariate index)
  struct Slot {
    char letter;
    int stage;
    int index;
  };
  std::vector<Slot> slots;
  std::map<std::tuple<char, int, int>, int> seen;
  for (auto name : split_commas(line)) {
    auto col = parse_column_name(name);
    if (!col || (col->letter != 'X' && col->letter != 'A' && col->letter != 'Y') || col->stage > T)
      throw DataError("unknown column '" + std::string(name) + "'", 1);
    int index = col->index.value_or(1) - 1;
    if (col->letter != 'X' && col->index) throw DataError("unknown column '" + std::string(name) + "'", 1);
    if (col->letter == 'X' && index >= spec.stage(col->stage).n_covariates)
      throw DataError("unknown column '" + std::string(name) + "'", 1);
    auto key = std::make_tuple(col->letter, col->stage, index);
    if (seen.count(key)) throw DataError("duplicate column '" + std::string(name) + "'", 1);
    seen[key] = static_cast<int>(slots.size());
    slots.push_back({col->letter, col->stage, index});
  }
  for (int t = 1; t <= T; ++t) {
    for (char letter : {'A', 'Y'})
      if (!seen.count({letter, t, 0}))
        throw DataError(std::string("missing column ") + letter + std::to_string(t), 1);
    for (int j = 0; j < spec.stage(t).n_covariates; ++j)
      if (!seen.count({'X', t, j}))
        throw DataError("missing column X" + std::to_string(t) + "_" + std::to_string(j + 1), 1);
  }

  Dataset ds;
  ds.spec = spec;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_commas(line);
    if (cells.size() != slots.size())
      throw DataError("expected " + std::to_string(slots.size()) + " fields, found " + std::to_string(cells.size()),
                      lineno);
    Trajectory tr;
    tr.stages.resize(T);
    for (int t = 1; t <= T; ++t)
      tr.stages[t - 1].covariates.assign(spec.stage(t).n_covariates, std::numeric_limits<double>::quiet_NaN());
    std::vector<bool> reward_given(T, false);
    for (std::size_t k = 0; k < slots.size(); ++k) {
      const Slot& s = slots[k];
      StageRecord& rec = tr.stages[s.stage - 1];
      std::string_view cell = cells[k];
      if (cell.empty()) continue;
      if (s.letter == 'A') {
        auto code = parse_int(cell);
        if (!code) throw DataError("non-integer action '" + std::string(cell) + "'", lineno);
        rec.action = *code;
        continue;
      }
      auto v = parse_double(cell);
      if (!v || !std::isfinite(*v)) throw DataError("non-numeric value '" + std::string(cell) + "'", lineno);
      if (s.letter == 'Y') {
        rec.reward = *v;
        reward_given[s.stage - 1] = true;
      } else {
        rec.covariates[s.index] = *v;
      }
    }
    for (int t = 1; t <= T; ++t) {
      const StageRecord& rec = tr.stages[t - 1];
      if (!rec.present()) {
        if (!spec.stage(t).optional) throw DataError("missing action A" + std::to_string(t), lineno);
        continue;
      }
      if (!reward_given[t - 1]) throw DataError("missing reward Y" + std::to_string(t), lineno);
      for (double x : rec.covariates)
        if (std::isnan(x)) throw DataError("missing covariate at stage " + std::to_string(t), lineno);
    }
    ds.trajectories.push_back(std::move(tr));
    try {
      Dataset probe{{ds.trajectories.back()}, spec};
      probe.validate();
    } catch (const DataError& e) {
      throw DataError(e.what(), lineno);
    }
  }
  return ds;
}

Dataset load_csv(const std::string& path, const DesignSpec& spec) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in, spec);
}

void write_csv(std::ostream& out, const Dataset& ds) {
  const DesignSpec& spec = ds.spec;
  bool first = true;
  auto cell = [&](const std::string& s) {
    if (!first) out << ',';
    out << s;
    first = false;
  };
  for (int t = 1; t <= spec.n_stages(); ++t) {
    for (int j = 1; j <= spec.stage(t).n_covariates; ++j) cell("X" + std::to_string(t) + "_" + std::to_string(j));
    cell("A" + std::to_string(t));
    cell("Y" + std::to_string(t));
  }
  out << '\n';
  for (const auto& tr : ds.trajectories) {
    first = true;
    for (const auto& rec : tr.stages) {
      for (double x : rec.covariates) cell(format_number(x));
      cell(rec.action ? std::to_string(*rec.action) : "");
      cell(format_number(rec.reward));
    }
    out << '\n';
  }
}

void write_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(out, ds);
}

double feature_value(const DesignSpec& spec, const FeatureTerm& term, const Trajectory& tr) {
  double v = 1.0;
  for (const auto& f : term.factors) {
    const StageRecord& rec = tr.stages[f.stage - 1];
    switch (f.kind) {
      case VariableRef::Kind::covariate: v *= rec.covariates[f.index]; break;
      case VariableRef::Kind::reward: v *= rec.reward; break;
      case VariableRef::Kind::action:
        if (!rec.action) throw DataError("term '" + term.label + "' needs an absent action");
        v *= spec.stage(f.stage).coding.value(*rec.action, f.index);
        break;
    }
  }
  return v;
}

Eigen::VectorXd design_row(const DesignSpec& spec, const Trajectory& tr, int t, int code) {
  const StageSpec& st = spec.stage(t);
  Eigen::VectorXd row(st.dim());
  int k = 0;
  for (const auto& term : st.main) row[k++] = feature_value(spec, term, tr);
  const int q = st.interact_dim();
  Eigen::VectorXd h(q);
  for (int j = 0; j < q; ++j) h[j] = feature_value(spec, st.interact[j], tr);
  for (int col = 0; col < st.coding.n_columns(); ++col) {
    row.segment(k, q) = st.coding.value(code, col) * h;
    k += q;
  }
  return row;
}

Eigen::MatrixXd code_rows(const DesignSpec& spec, const Trajectory& tr, int t) {
  const StageSpec& st = spec.stage(t);
  Eigen::MatrixXd rows(st.n_treatments(), st.dim());
  for (int a = 1; a <= st.n_treatments(); ++a) rows.row(a - 1) = design_row(spec, tr, t, a).transpose();
  return rows;
}

StageDesignMatrix build_design(const Dataset& ds, int t) {
  const StageSpec& st = ds.spec.stage(t);
  StageDesignMatrix out{Eigen::MatrixXd(ds.n(), st.dim()), Eigen::VectorXd(ds.n())};
  for (int i = 0; i < ds.n(); ++i) {
    const Trajectory& tr = ds.trajectories[i];
    const StageRecord& rec = tr.stages.at(t - 1);
    if (!rec.action) throw DataError("stage " + std::to_string(t) + " absent", i + 1);
    out.B.row(i) = design_row(ds.spec, tr, t, *rec.action).transpose();
    out.y[i] = rec.reward;
  }
  return out;
}

}  // namespace dtrci

#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dtrci {

// One decision point. An absent stage (optional stages only) has no action;
// its covariates may be NaN and its reward defaults to zero.
struct StageRecord {
  std::vector<double> covariates;
  std::optional<int> action;  // treatment code in 1..K
  double reward = 0.0;

  bool present() const { return action.has_value(); }
  bool operator==(const StageRecord& o) const;
};

struct Trajectory {
  std::vector<StageRecord> stages;
  bool operator==(const Trajectory& o) const = default;
};

enum class CodingKind { indicator, indicator_full, contrast, custom };

// Maps a treatment code a in 1..K to a row of numeric coding columns.
class ActionCoding {
 public:
  ActionCoding() : ActionCoding(contrast()) {}

  // K-1 columns, code K is the reference (all zeros).
  static ActionCoding indicator(int k);
  // K columns, one per code; use without a main-effect intercept.
  static ActionCoding indicator_full(int k);
  // K = 2, code 1 -> +1, code 2 -> -1.
  static ActionCoding contrast();
  // Row a-1 is the coding of code a; columns must be linearly independent.
  static ActionCoding custom(Eigen::MatrixXd rows);

  CodingKind kind() const { return kind_; }
  int n_treatments() const { return static_cast<int>(rows_.rows()); }
  int n_columns() const { return static_cast<int>(rows_.cols()); }
  double value(int code, int column) const { return rows_(code - 1, column); }
  const Eigen::MatrixXd& matrix() const { return rows_; }
  std::string name() const;

 private:
  ActionCoding(CodingKind kind, Eigen::MatrixXd rows) : kind_(kind), rows_(std::move(rows)) {}
  CodingKind kind_;
  Eigen::MatrixXd rows_;
};

// A reference to an observed quantity. `index` is the 0-based covariate
// index for covariates and the 0-based coding column for actions.
struct VariableRef {
  enum class Kind { covariate, action, reward };
  Kind kind;
  int stage;  // 1-based
  int index = 0;
  bool operator==(const VariableRef& o) const = default;
};

// Product of referenced variables; no factors means the constant 1.
// Text form: "1", "X2", "X2_3", "A1", "A1_2", "Y1", joined with '*'.
struct FeatureTerm {
  std::vector<VariableRef> factors;
  std::string label;

  static FeatureTerm parse(std::string_view text);
  const std::string& to_string() const { return label; }
};

struct StageSpec {
  std::vector<FeatureTerm> main;      // H_{t,0}
  std::vector<FeatureTerm> interact;  // H_{t,1}
  ActionCoding coding;
  int n_covariates = 0;
  bool optional = false;

  int main_dim() const { return static_cast<int>(main.size()); }
  int interact_dim() const { return static_cast<int>(interact.size()); }
  int n_treatments() const { return coding.n_treatments(); }
  int dim() const { return main_dim() + coding.n_columns() * interact_dim(); }
};

struct DesignSpec {
  std::vector<StageSpec> stages;

  int n_stages() const { return static_cast<int>(stages.size()); }
  const StageSpec& stage(int t) const { return stages.at(t - 1); }
  // Throws ConfigError when a term references an unknown or future variable.
  void validate() const;
  // Name of each design column at stage t, e.g. "X1" or "A2:X2".
  std::vector<std::string> column_names(int t) const;
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  DesignSpec spec;

  int n() const { return static_cast<int>(trajectories.size()); }
  // Throws DataError if a trajectory does not conform to the spec.
  void validate() const;
};

Dataset read_csv(std::istream& in, const DesignSpec& spec);
Dataset load_csv(const std::string& path, const DesignSpec& spec);
void write_csv(std::ostream& out, const Dataset& ds);
void write_csv(const std::string& path, const Dataset& ds);

// Value of one feature term for trajectory `tr` at stage t.
double feature_value(const DesignSpec& spec, const FeatureTerm& term, const Trajectory& tr);

// Design row B_t(h, a) for treatment code a.
Eigen::VectorXd design_row(const DesignSpec& spec, const Trajectory& tr, int t, int code);
// K x p matrix whose row a-1 is B_t(h, a).
Eigen::MatrixXd code_rows(const DesignSpec& spec, const Trajectory& tr, int t);

// Stage-t design matrix and observed rewards; every trajectory must have
// stage t present.
struct StageDesignMatrix {
  Eigen::MatrixXd B;
  Eigen::VectorXd y;
};
StageDesignMatrix build_design(const Dataset& ds, int t);

}  // namespace dtrci

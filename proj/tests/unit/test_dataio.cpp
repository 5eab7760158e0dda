#include "dtrci/dataio.hpp"
#include "dtrci/errors.hpp"
#include "dtrci/genmodels.hpp"
#include "fixtures.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

using namespace dtrci;

namespace {

DesignSpec two_stage_spec(ActionCoding coding2, bool optional2 = false) {
  DesignSpec spec;
  StageSpec s1;
  s1.n_covariates = 1;
  s1.main = {FeatureTerm::parse("1"), FeatureTerm::parse("X1")};
  s1.interact = {FeatureTerm::parse("1"), FeatureTerm::parse("X1")};
  StageSpec s2;
  s2.n_covariates = 1;
  s2.main = {FeatureTerm::parse("1"), FeatureTerm::parse("X1"), FeatureTerm::parse("A1"), FeatureTerm::parse("X2")};
  s2.interact = {FeatureTerm::parse("1"), FeatureTerm::parse("X2")};
  s2.coding = std::move(coding2);
  s2.optional = optional2;
  spec.stages = {s1, s2};
  return spec;
}

Trajectory traj(double x1, int a1, double y1, double x2, std::optional<int> a2, double y2) {
  Trajectory tr;
  tr.stages.resize(2);
  tr.stages[0] = {{x1}, a1, y1};
  tr.stages[1] = {{x2}, a2, y2};
  return tr;
}

}  // namespace

TEST_CASE("a two-row file parses into two trajectories") {
  std::istringstream in("X1,A1,Y1,X2,A2,Y2\n1,1,0.5,-1,2,3.25\n-1,2,0,1,1,-1\n");
  Dataset ds = read_csv(in, two_stage_spec(ActionCoding::contrast()));
  REQUIRE(ds.n() == 2);
  CHECK(ds.trajectories[0].stages[1].covariates[0] == -1.0);
  CHECK(*ds.trajectories[0].stages[1].action == 2);
  CHECK(ds.trajectories[0].stages[1].reward == 3.25);
  CHECK(*ds.trajectories[1].stages[0].action == 2);
}

TEST_CASE("out-of-range action is reported with its row") {
  std::istringstream in("X1,A1,Y1,X2,A2,Y2\n1,1,0,1,1,0\n1,1,0,1,7,0\n");
  try {
    read_csv(in, two_stage_spec(ActionCoding::contrast()));
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(e.row() == 3);
    CHECK(std::string(e.what()).find("action code out of range") != std::string::npos);
  }
}

TEST_CASE("malformed files raise DataError") {
  auto spec = two_stage_spec(ActionCoding::contrast());
  for (const char* text : {"", "X1,A1,Y1,X2,A2\n", "X1,A1,Y1,X2,A2,Y2,Z9\n", "X1,A1,Y1,X2,A2,Y2\n1,1,0\n",
                           "X1,A1,Y1,X2,A2,Y2\n1,x,0,1,1,0\n", "X1,A1,Y1,X2,A2,Y2\n1,1,0,1,,0\n"}) {
    std::istringstream in(text);
    CHECK_THROWS_AS(read_csv(in, spec), DataError);
  }
}

TEST_CASE("absent optional stage survives a write/read round trip") {
  auto spec = two_stage_spec(ActionCoding::contrast(), true);
  std::istringstream in("X1,A1,Y1,X2,A2,Y2\n1,1,2.5,,,\n-1,2,0.125,1,1,4\n");
  Dataset ds = read_csv(in, spec);
  REQUIRE(ds.n() == 2);
  CHECK_FALSE(ds.trajectories[0].stages[1].present());
  CHECK(ds.trajectories[0].stages[1].reward == 0.0);

  std::ostringstream out;
  write_csv(out, ds);
  std::istringstream back(out.str());
  Dataset again = read_csv(back, spec);
  CHECK(again.trajectories == ds.trajectories);
}

TEST_CASE("simulated data round-trips exactly") {
  auto model = model_by_name("ternary:ex5");
  Dataset ds = simulate(model, 50, 7);
  std::ostringstream out;
  write_csv(out, ds);
  std::istringstream back(out.str());
  CHECK(read_csv(back, ds.spec).trajectories == ds.trajectories);
}

TEST_CASE("design rows follow the coding") {
  DesignSpec spec;
  StageSpec st;
  st.n_covariates = 1;
  st.main = {FeatureTerm::parse("1")};
  st.interact = {FeatureTerm::parse("1")};
  st.coding = ActionCoding::indicator(2);
  spec.stages = {st};
  Trajectory tr;
  tr.stages = {{{0.0}, 1, 0.0}};
  CHECK(design_row(spec, tr, 1, 1) == Eigen::Vector2d(1, 1));
  CHECK(design_row(spec, tr, 1, 2) == Eigen::Vector2d(1, 0));

  spec.stages[0].coding = ActionCoding::contrast();
  spec.stages[0].interact = {FeatureTerm::parse("1"), FeatureTerm::parse("X1")};
  tr.stages[0].covariates = {2.0};
  Eigen::VectorXd row = design_row(spec, tr, 1, 2);  // code 2 is a = -1
  CHECK(row.tail(2) == Eigen::Vector2d(-1, -2));
}

TEST_CASE("three-code Helmert-style coding against a hand expansion") {
  // A2 in {(0,-0.5), (-1,0.5), (1,0.5)}, H21 = (1, X2, A1)
  Eigen::MatrixXd rows(3, 2);
  rows << 0, -0.5, -1, 0.5, 1, 0.5;
  DesignSpec spec = two_stage_spec(ActionCoding::custom(rows));
  spec.stages[1].interact = {FeatureTerm::parse("1"), FeatureTerm::parse("X2"), FeatureTerm::parse("A1")};
  Trajectory tr = traj(1, 2, 0, -1, 3, 0);  // A1 = -1, X2 = -1
  Eigen::MatrixXd got = code_rows(spec, tr, 2);
  const double h[3] = {1, -1, -1};
  const double a[3][2] = {{0, -0.5}, {-1, 0.5}, {1, 0.5}};
  for (int code = 0; code < 3; ++code) {
    // main: 1, X1, A1, X2
    CHECK(got(code, 0) == 1);
    CHECK(got(code, 1) == 1);
    CHECK(got(code, 2) == -1);
    CHECK(got(code, 3) == -1);
    for (int col = 0; col < 2; ++col)
      for (int j = 0; j < 3; ++j) CHECK(got(code, 4 + 3 * col + j) == a[code][col] * h[j]);
  }
  CHECK(spec.column_names(2)[4] == "A2_1");
  CHECK(spec.column_names(2)[8] == "A2_2:X2");
}

TEST_CASE("design dimension follows the spec") {
  CHECK(two_stage_spec(ActionCoding::contrast()).stage(2).dim() == 4 + 2);
  CHECK(two_stage_spec(ActionCoding::indicator(3)).stage(2).dim() == 4 + 2 * 2);
  CHECK(two_stage_spec(ActionCoding::indicator_full(3)).stage(2).dim() == 4 + 3 * 2);

  Dataset ex3 = simulate(model_by_name("ex3"), 30, 1);
  CHECK(build_design(ex3, 1).B.cols() == 4);
  CHECK(build_design(ex3, 2).B.cols() == 8);

  Dataset smart = fixtures::smart_shape_dataset(40, 3);
  smart.validate();
  CHECK(build_design(smart, 1).B.cols() == 6);
  CHECK(smart.spec.stage(2).dim() == 10);
}

TEST_CASE("permuting trajectories permutes design rows") {
  Dataset ds = simulate(model_by_name("ex4"), 25, 11);
  std::vector<int> perm(ds.n());
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::rotate(perm.begin(), perm.begin() + 7, perm.end());
  Dataset shuffled = ds;
  for (int i = 0; i < ds.n(); ++i) shuffled.trajectories[i] = ds.trajectories[perm[i]];
  for (int t = 1; t <= 2; ++t) {
    auto a = build_design(ds, t);
    auto b = build_design(shuffled, t);
    for (int i = 0; i < ds.n(); ++i) {
      CHECK(b.B.row(i) == a.B.row(perm[i]));
      CHECK(b.y[i] == a.y[perm[i]]);
    }
  }
}

TEST_CASE("spec validation rejects future references") {
  DesignSpec spec = two_stage_spec(ActionCoding::contrast());
  spec.stages[0].main.push_back(FeatureTerm::parse("A1"));
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = two_stage_spec(ActionCoding::contrast());
  spec.stages[0].main.push_back(FeatureTerm::parse("X2"));
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  CHECK_THROWS_AS(FeatureTerm::parse("Q1"), ConfigError);
  Eigen::MatrixXd dependent(3, 2);
  dependent << 1, 2, 2, 4, 3, 6;
  CHECK_THROWS_AS(ActionCoding::custom(dependent), ConfigError);
}

TEST_CASE("feature products multiply factors") {
  DesignSpec spec = two_stage_spec(ActionCoding::contrast());
  Trajectory tr = traj(-1, 2, 0.5, 1, 1, 0);
  CHECK(feature_value(spec, FeatureTerm::parse("X1*A1"), tr) == 1.0);
  CHECK(feature_value(spec, FeatureTerm::parse("X1*X2*Y1"), tr) == -0.5);
  CHECK(feature_value(spec, FeatureTerm::parse("1"), tr) == 1.0);
}

#include "dtrci/bounds.hpp"
#include "dtrci/design.hpp"
#include "dtrci/errors.hpp"
#include "dtrci/genmodels.hpp"
#include "dtrci/pretest.hpp"
#include "dtrci/qlearn.hpp"
#include "dtrci/resample.hpp"
#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dtrci;

namespace {

struct Case {
  Dataset ds;
  Design d;
  QFit fit;
  explicit Case(Dataset data) : ds(std::move(data)), d(Design::build(ds)), fit(fit_qlearning(d)) {}
};

Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> z(0.0, scale);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = z(rng);
  return v;
}

// Reference coefficients near the fit so that V is non-zero.
Reference jittered(const QFit& fit, std::mt19937_64& rng, double scale) {
  Reference r = fit.coefficients();
  for (auto& b : r) b += random_vector(b.size(), rng, scale);
  return r;
}

GammaSearch small_search(std::uint64_t seed, int n_gamma = 60) {
  GammaSearch s;
  s.n_gamma = n_gamma;
  s.rng_seed = seed;
  return s;
}

}  // namespace

TEST_CASE("upper bound is at least the lower bound on 100 random fixtures") {
  std::mt19937_64 rng(1);
  const char* extra[] = {"ternary:ex1", "ternary:ex4", "three_stage:ex2", "three_stage:ex5"};
  for (int f = 0; f < 100; ++f) {
    Case k(f % 5 == 4 ? simulate(model_by_name(extra[(f / 5) % 4]), 150, f) : fixtures::random_binary_dataset(f));
    const int t = 1;
    const Reference center = f % 2 ? k.fit.coefficients() : jittered(k.fit, rng, 0.05);
    Eigen::VectorXd c = random_vector(k.fit.beta(t).size(), rng);
    BoundProcess proc(k.d, k.fit, center, t);
    auto cand = gamma_candidates(k.fit, center, t, small_search(f));
    for (double lambda : {0.0, 1.6, 50.0}) {
      BoundsResult r = proc.evaluate(lambda, c, cand);
      CHECK(r.lower <= r.upper);
      if (r.accept_fraction == 0.0) CHECK(r.upper == doctest::Approx(r.lower).epsilon(1e-12));
    }
  }
}

TEST_CASE("adding candidates never tightens the bounds") {
  std::mt19937_64 rng(2);
  for (int f = 0; f < 10; ++f) {
    Case k(f < 7 ? fixtures::random_binary_dataset(100 + f) : simulate(model_by_name("ternary:ex2"), 150, f));
    const Reference center = jittered(k.fit, rng, 0.05);
    Eigen::VectorXd c = random_vector(k.fit.beta(1).size(), rng);
    auto all = gamma_candidates(k.fit, center, 1, small_search(f, 200));
    BoundProcess proc(k.d, k.fit, center, 1);
    double prev_u = -1e300, prev_l = 1e300;
    for (std::size_t m : {1, 5, 20, 80, 200}) {
      std::vector<Eigen::VectorXd> sub(all.begin(), all.begin() + m);
      BoundsResult r = proc.evaluate(1e9, c, sub);
      CHECK(r.upper >= prev_u);
      CHECK(r.lower <= prev_l);
      prev_u = r.upper;
      prev_l = r.lower;
    }
  }
}

TEST_CASE("two-stage and general bounds agree for binary treatments") {
  std::mt19937_64 rng(3);
  for (int f = 0; f < 20; ++f) {
    Case k(fixtures::random_binary_dataset(200 + f));
    const Reference center = f % 3 ? jittered(k.fit, rng, 0.05) : k.fit.coefficients();
    Eigen::VectorXd c = random_vector(k.fit.beta(1).size(), rng);
    auto cand = gamma_candidates(k.fit, center, 1, small_search(f));
    for (double lambda : {0.0, 0.8, 1.6, 4.0, 1e9}) {
      BoundsResult a = bounds_two_stage(k.d, k.fit, center, lambda, c, cand);
      BoundsResult b = bounds_general(k.d, k.fit, center, lambda, c, 1, cand);
      CHECK(a.upper == doctest::Approx(b.upper).epsilon(1e-10));
      CHECK(a.lower == doctest::Approx(b.lower).epsilon(1e-10));
      CHECK(a.accept_fraction == b.accept_fraction);
    }
  }
}

TEST_CASE("the process at the centre equals the centred estimator (sandwich)") {
  // Algebraic identity: at gamma = sqrt(n) * centre every kernel term equals
  // the exact change in the downstream maximum.
  const char* names[] = {"ex1", "ex3", "exB", "ternary:ex1", "ternary:ex5", "three_stage:ex1", "three_stage:ex4"};
  std::uint64_t seed = 10;
  for (const char* name : names) {
    const GenModelSpec model = model_by_name(name);
    const Reference truth = population_coefficients(model);
    for (int rep = 0; rep < 3; ++rep) {
      Case k(simulate(model, 200, ++seed));
      const double rn = std::sqrt(static_cast<double>(k.d.n()));
      for (int t = 1; t < k.fit.n_stages(); ++t) {
        auto cand = gamma_candidates(k.fit, truth, t, small_search(seed, 100));
        BoundProcess proc(k.d, k.fit, truth, t);
        for (Eigen::Index j = 0; j < k.fit.beta(t).size(); ++j) {
          Eigen::VectorXd c = Eigen::VectorXd::Unit(k.fit.beta(t).size(), j);
          const double target = rn * (k.fit.beta(t)[j] - truth[t - 1][j]);
          for (double lambda : {0.0, 1.6, 1e9}) {
            BoundsResult r = proc.evaluate(lambda, c, cand);
            CHECK(r.lower <= target + 1e-8);
            CHECK(target <= r.upper + 1e-8);
            BoundsResult at_centre = proc.evaluate(lambda, c, {cand.front()});
            CHECK(at_centre.upper == doctest::Approx(target).epsilon(1e-9).scale(1.0));
          }
        }
      }
    }
  }
}

TEST_CASE("max-difference kernel inequality") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 2000; ++rep) {
    const int K = 2 + rep % 4;
    Eigen::VectorXd a = random_vector(K, rng, 2.0), b = random_vector(K, rng, 3.0);
    CHECK(std::abs((a + b).maxCoeff() - b.maxCoeff()) <= a.cwiseAbs().maxCoeff() + 1e-12);
  }
  // and at the level of the bound: |U - smooth - plug| <= sum |w| max |G V|
  for (int f = 0; f < 10; ++f) {
    Case k(fixtures::random_binary_dataset(300 + f));
    const Reference center = jittered(k.fit, rng, 0.05);
    Eigen::VectorXd c = random_vector(k.fit.beta(1).size(), rng);
    auto cand = gamma_candidates(k.fit, center, 1, small_search(f));
    BoundsResult r = bounds_two_stage(k.d, k.fit, center, 1e9, c, cand);
    const auto& s1 = k.d.stage(1);
    const auto& s2 = k.d.stage(2);
    const Eigen::Index p0 = s2.main_dim, q = s2.dim() - p0;
    const Eigen::VectorXd V = std::sqrt(double(k.d.n())) * (k.fit.beta(2) - center[1]).tail(q);
    double cap = 0.0;
    for (int row = 0; row < s1.rows(); ++row) {
      const double w = c.dot(k.fit.stage(1).ols.gram_inv * s1.B.row(row).transpose()) / s1.rows();
      cap += std::abs(w) * (s2.codes(s1.next_row[row]).rightCols(q) * V).cwiseAbs().maxCoeff();
    }
    CHECK(r.accept_fraction == 1.0);
    CHECK(std::abs(r.upper - r.smooth_part) <= cap + 1e-9);
    CHECK(std::abs(r.lower - r.smooth_part) <= cap + 1e-9);
  }
}

TEST_CASE("direct evaluation with indicator coding and gamma = 0") {
  // kernel [H'V]_+ for every unit when all units are accepted
  Dataset ds = simulate(model_by_name("ex5"), 40, 77);
  ds.spec.stages[1].coding = ActionCoding::indicator(2);
  Case k(ds);
  std::mt19937_64 rng(5);
  const Reference center = jittered(k.fit, rng, 0.2);
  Eigen::VectorXd c = random_vector(k.fit.beta(1).size(), rng);
  const auto& s1 = k.d.stage(1);
  const auto& s2 = k.d.stage(2);
  const Eigen::Index p0 = s2.main_dim, q = s2.dim() - p0;
  const double n = k.d.n(), rn = std::sqrt(n);
  const Eigen::VectorXd& b2 = k.fit.beta(2);
  const Eigen::VectorXd V = rn * (b2 - center[1]).tail(q);
  Eigen::MatrixXd BtB = s1.B.transpose() * s1.B;
  Eigen::VectorXd sum_e = Eigen::VectorXd::Zero(s1.dim()), sum_k = Eigen::VectorXd::Zero(s1.dim());
  for (int r = 0; r < s1.rows(); ++r) {
    const auto& tr = ds.trajectories[r];
    Eigen::VectorXd row1 = design_row(ds.spec, tr, 2, 1);  // (H20, H21)
    Eigen::VectorXd h21 = row1.tail(q);
    const double e = s1.y[r] - s1.B.row(r).dot(center[0]) + row1.head(p0).dot(b2.head(p0)) +
                     std::max(0.0, h21.dot(center[1].tail(q)));
    sum_e += s1.B.row(r).transpose() * e;
    sum_k += s1.B.row(r).transpose() * std::max(0.0, h21.dot(V));
  }
  const double want = c.dot(BtB.ldlt().solve(sum_e)) * rn + c.dot(BtB.ldlt().solve(sum_k));
  std::vector<Eigen::VectorXd> zero{Eigen::VectorXd::Zero(s2.dim())};
  BoundsResult r = bounds_two_stage(k.d, k.fit, center, 1e300, c, zero);
  CHECK(r.accept_fraction == 1.0);
  CHECK(r.upper == doctest::Approx(want).epsilon(1e-10));
  CHECK(r.lower == r.upper);
}

TEST_CASE("no accepted units: U = L = smooth + plug-in") {
  std::mt19937_64 rng(6);
  for (int f = 0; f < 10; ++f) {
    Case k(fixtures::random_binary_dataset(400 + f));
    const Reference center = jittered(k.fit, rng, 0.05);
    Eigen::VectorXd c = random_vector(k.fit.beta(1).size(), rng);
    auto cand = gamma_candidates(k.fit, center, 1, small_search(f));
    BoundsResult r = bounds_two_stage(k.d, k.fit, center, -1.0, c, cand);
    CHECK(r.accept_fraction == 0.0);
    CHECK(r.upper == r.lower);
    CHECK(r.upper == doctest::Approx(r.smooth_part + r.plug_part).epsilon(1e-12));
  }
}

TEST_CASE("a single downstream treatment leaves nothing to bound") {
  Dataset ds = simulate(model_by_name("ex4"), 80, 8);
  ds.spec.stages[1].coding = ActionCoding::indicator(1);
  for (auto& tr : ds.trajectories) tr.stages[1].action = 1;
  Case k(ds);
  std::mt19937_64 rng(7);
  const Reference center = jittered(k.fit, rng, 0.05);
  Eigen::VectorXd c = random_vector(k.fit.beta(1).size(), rng);
  std::vector<Eigen::VectorXd> cand;
  for (int i = 0; i < 20; ++i) cand.push_back(random_vector(k.fit.beta(2).size(), rng));
  BoundsResult r = bounds_general(k.d, k.fit, center, 1e9, c, 1, cand);
  CHECK(r.upper == doctest::Approx(r.lower).epsilon(1e-12));
}

TEST_CASE("smooth term vanishes at the fitted coefficients") {
  for (int f = 0; f < 10; ++f) {
    Case k(fixtures::random_binary_dataset(500 + f));
    std::mt19937_64 rng(f);
    Eigen::VectorXd c = random_vector(k.fit.beta(1).size(), rng);
    CHECK(std::abs(smooth_term(k.d, k.fit, k.fit.coefficients(), c)) < 1e-8);
    CHECK(smooth_term(k.d, k.fit, k.fit.coefficients(), Eigen::VectorXd::Zero(c.size())) == 0.0);
  }
}

TEST_CASE("three-stage recursion against a hand-unrolled oracle at gamma = 0") {
  Case k(simulate(model_by_name("three_stage:ex3"), 60, 21));
  std::mt19937_64 rng(8);
  const Reference center = jittered(k.fit, rng, 0.1);
  const double n = k.d.n(), rn = std::sqrt(n);
  Eigen::VectorXd c = random_vector(k.fit.beta(1).size(), rng);

  // kappa of one group row set under gamma = 0 given the downstream process v
  auto level = [&](int s, const Eigen::VectorXd& v, double lambda, bool deepest, const Eigen::VectorXd& Vs) {
    const auto& par = k.d.stage(s - 1);
    const auto& cur = k.d.stage(s);
    const auto& fs = k.fit.stage(s).ols;
    const Eigen::VectorXd& bs = fs.beta;
    const Eigen::VectorXd& cs = center[s - 1];
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(par.dim());
    Eigen::VectorXd kap = Eigen::VectorXd::Zero(par.dim());
    for (int r = 0; r < par.rows(); ++r) {
      double e = par.y[r] - par.B.row(r).dot(center[s - 2]);
      const int nr = par.next_row[r];
      if (nr >= 0) {
        Eigen::MatrixXd R = cur.codes(nr);
        e += (R * cs).maxCoeff();
        auto stats = pretest_rows(R, bs, fs.cov_beta_scaled, fs.n);
        const double U = rn * ((R * bs).maxCoeff() - (R * cs).maxCoeff());
        double kappa;
        if (*std::min_element(stats.begin(), stats.end()) <= lambda) {
          // accepted: max over accepted codes and centre-optimal codes of R v
          Eigen::VectorXd x = R * v, qc = R * cs;
          double m = -1e300;
          for (int a = 0; a < R.rows(); ++a)
            if (stats[a] <= lambda || qc[a] >= qc.maxCoeff() - 1e-12 * (1 + std::abs(qc.maxCoeff())))
              m = std::max(m, x[a]);
          kappa = m;
        } else {
          const int i = argmax_code(R, bs) - 1;
          kappa = deepest ? U : R.row(i).dot(v) - R.row(i).dot(Vs) + U;
        }
        kap += par.B.row(r).transpose() * kappa;
      }
      acc += par.B.row(r).transpose() * e;
    }
    const Eigen::MatrixXd& gi = k.fit.stage(s - 1).ols.gram_inv;
    return Eigen::VectorXd(gi * acc * (rn / par.rows()) + gi * kap / par.rows());
  };
  for (double lambda : {0.0, 1.0, 3.0, 1e9}) {
    const Eigen::VectorXd V3 = rn * (k.fit.beta(3) - center[2]);
    const Eigen::VectorXd V2 = rn * (k.fit.beta(2) - center[1]);
    Eigen::VectorXd v2 = level(3, V3, lambda, true, V3);
    Eigen::VectorXd v1 = level(2, v2, lambda, false, V2);
    const Eigen::Index len = k.fit.beta(2).size() + k.fit.beta(3).size();
    BoundsResult r = bounds_general(k.d, k.fit, center, lambda, c, 1, {Eigen::VectorXd::Zero(len)});
    CHECK(r.upper == doctest::Approx(c.dot(v1)).epsilon(1e-10));
  }
}

TEST_CASE("bounds are deterministic under the search seed") {
  Case k(fixtures::random_binary_dataset(600));
  Eigen::VectorXd c = Eigen::VectorXd::Unit(k.fit.beta(1).size(), 2);
  auto a = bounds_two_stage(k.d, k.fit, k.fit.coefficients(), 1.6, c, small_search(9, 300));
  auto b = bounds_two_stage(k.d, k.fit, k.fit.coefficients(), 1.6, c, small_search(9, 300));
  CHECK(a.upper == b.upper);
  CHECK(a.lower == b.lower);
  CHECK(a.gamma_at_sup == b.gamma_at_sup);
  auto cand = gamma_candidates(k.fit, k.fit.coefficients(), 1, small_search(9, 300));
  CHECK(cand.size() == 300);
  CHECK(cand.front().tail(3) == std::sqrt(double(k.d.n())) * k.fit.beta(2).tail(3));
  CHECK(cand.front().head(5).isZero());
}

TEST_CASE("argument checks") {
  Case k(fixtures::random_binary_dataset(700));
  CHECK_THROWS_AS(bounds_two_stage(k.d, k.fit, k.fit.coefficients(), 1.0, Eigen::VectorXd::Zero(2), small_search(1)),
                  ConfigError);
  CHECK_THROWS_AS(gamma_candidates(k.fit, k.fit.coefficients(), 2, small_search(1)), ConfigError);
  Case three(simulate(model_by_name("three_stage:ex1"), 100, 1));
  CHECK_THROWS_AS(TwoStageBounds(three.d, three.fit, three.fit.coefficients()), UnsupportedMethodError);
}

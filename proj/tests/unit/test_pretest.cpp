#include "dtrci/errors.hpp"
#include "dtrci/pretest.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dtrci;

TEST_CASE("lambda schedules") {
  CHECK(lambda_value(LambdaRule::parse("loglog"), std::exp(std::exp(1.0))) == doctest::Approx(1.0));
  CHECK(lambda_value(LambdaRule::parse("fixed:2.5"), 10) == 2.5);
  CHECK(lambda_value(LambdaRule::parse("fixed:2.5"), 1e6) == 2.5);
  CHECK(lambda_value(LambdaRule::parse("loglog"), 150) == doctest::Approx(1.612).epsilon(1e-3));
  CHECK(lambda_value(LambdaRule::parse("sqrt_loglog"), 150) == doctest::Approx(std::sqrt(std::log(std::log(150.)))));
  CHECK(lambda_value(LambdaRule::parse("log"), 150) == doctest::Approx(std::log(150.)));
  CHECK(lambda_value(LambdaRule::parse("sqrt_n"), 150) == doctest::Approx(std::sqrt(150.)));
  CHECK(lambda_value(LambdaRule::parse("n"), 150) == 150.0);
  CHECK(LambdaRule::parse("fixed:2.5").name() == "fixed:2.5");
  CHECK_THROWS_AS(LambdaRule::parse("cubic"), ConfigError);
  CHECK_THROWS_AS(LambdaRule::parse("fixed:-1"), ConfigError);
  CHECK_THROWS(lambda_value(LambdaRule::parse("loglog"), 2));
}

TEST_CASE("binary pretest") {
  Eigen::Vector3d h(1, 0, 0);
  Eigen::Vector3d beta(0.5, 0.2, -0.1);
  CHECK(pretest_binary(h, beta, Eigen::Matrix3d::Identity(), 100) == doctest::Approx(25.0));
  CHECK(pretest_binary(h, Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity(), 100) == 0.0);
  CHECK(pretest_binary(h, Eigen::Vector3d::Zero(), Eigen::Matrix3d::Zero(), 100) == 0.0);  // 0/0
}

TEST_CASE("pretest is scale invariant in h") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::VectorXd h(3), b(3);
    Eigen::MatrixXd L(3, 3);
    for (int i = 0; i < 3; ++i) {
      h[i] = z(rng);
      b[i] = z(rng);
      for (int j = 0; j < 3; ++j) L(i, j) = z(rng);
    }
    Eigen::MatrixXd cov = L * L.transpose() + 0.1 * Eigen::MatrixXd::Identity(3, 3);
    const double alpha = 0.1 + std::abs(z(rng)) * 3;
    const double t1 = pretest_binary(h, b, cov, 150), t2 = pretest_binary(alpha * h, b, cov, 150);
    CHECK(t2 == doctest::Approx(t1).epsilon(1e-12));

    Eigen::MatrixXd rows(3, 6);
    for (int k = 0; k < 3; ++k) rows.row(k) << h.transpose(), (k == 0 ? 1.0 : k == 1 ? -1.0 : 0.0) * h.transpose();
    Eigen::MatrixXd big = Eigen::MatrixXd::Identity(6, 6);
    big.topLeftCorner(3, 3) = cov;
    Eigen::VectorXd beta(6);
    beta << b, 0.3 * b;
    auto a = pretest_rows(rows, beta, big, 150);
    auto s = pretest_rows(alpha * rows, beta, big, 150);
    for (int k = 0; k < 3; ++k) CHECK(s[k] == doctest::Approx(a[k]).epsilon(1e-12));
  }
}

TEST_CASE("two-treatment multi pretest equals the binary statistic") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd h(2), b1(2), b2(2);
    for (int i = 0; i < 2; ++i) {
      h[i] = z(rng);
      b1[i] = z(rng);
      b2[i] = z(rng);
    }
    Eigen::MatrixXd A(4, 4);
    for (int i = 0; i < 16; ++i) A(i / 4, i % 4) = z(rng);
    Eigen::MatrixXd S = A * A.transpose();
    auto pairwise = [&](int i, int k) -> Eigen::MatrixXd {
      return S.block(2 * i, 2 * i, 2, 2) - S.block(2 * i, 2 * k, 2, 2) - S.block(2 * k, 2 * i, 2, 2) +
             S.block(2 * k, 2 * k, 2, 2);
    };
    auto multi = pretest_multi(h, {b1, b2}, pairwise, 80);
    const double bin = pretest_binary(h, b1 - b2, pairwise(0, 1), 80);
    CHECK(multi[0] == doctest::Approx(bin).epsilon(1e-12));
    CHECK(multi[1] == doctest::Approx(bin).epsilon(1e-12));
  }
}

TEST_CASE("three-treatment statistics with identity zeta") {
  Eigen::Vector2d h(1, 2);
  std::vector<Eigen::VectorXd> betas{Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1), Eigen::Vector2d(0.5, 0)};
  // h'b = 1, 2, 0.5; h'h = 5
  auto id = [](int, int) -> Eigen::MatrixXd { return Eigen::Matrix2d::Identity(); };
  auto T = pretest_multi(h, betas, id, 10);
  CHECK(T[0] == doctest::Approx(10 * 1.0 / 5).epsilon(1e-10));
  CHECK(T[1] == doctest::Approx(10 * 1.0 / 5).epsilon(1e-10));
  CHECK(T[2] == doctest::Approx(10 * 2.25 / 5).epsilon(1e-10));

  std::vector<Eigen::VectorXd> equal(3, Eigen::Vector2d(0.3, -0.2));
  for (double t : pretest_multi(h, equal, id, 10)) CHECK(t == 0.0);
  auto single = pretest_multi(h, {betas[0]}, id, 10);
  CHECK(std::isinf(single[0]));
}

TEST_CASE("treat_set rule") {
  Eigen::Vector2d h(1, 2);
  std::vector<Eigen::VectorXd> betas{Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1), Eigen::Vector2d(0.5, 0)};
  std::vector<double> stats{2.0, 2.0, 4.5};
  auto rejected = treat_set(h, betas, stats, 1.0);
  CHECK_FALSE(rejected.accepted);
  CHECK(rejected.codes == std::vector<int>{2});
  auto pair = treat_set(h, betas, stats, 3.0);
  CHECK(pair.accepted);
  CHECK(pair.codes == std::vector<int>{1, 2});
  std::vector<double> zeros(3, 0.0);
  CHECK(treat_set(h, betas, zeros, 0.5).codes == std::vector<int>{1, 2, 3});
}

TEST_CASE("treat_set is never empty and grows with lambda") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  for (int rep = 0; rep < 200; ++rep) {
    const int K = 2 + rep % 3;
    Eigen::MatrixXd rows(K, 3 * K);
    rows.setZero();
    Eigen::Vector3d h(1, z(rng), z(rng));
    for (int k = 0; k < K; ++k) rows.block(k, 3 * k, 1, 3) = h.transpose();
    Eigen::VectorXd beta(3 * K);
    for (int i = 0; i < beta.size(); ++i) beta[i] = 0.3 * z(rng);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(3 * K, 3 * K);
    auto stats = pretest_rows(rows, beta, cov, 50);
    std::vector<int> prev;
    bool prev_accepted = false;
    for (double lambda : {0.0, 0.5, 1.6, 4.0, 20.0, 1e9}) {
      auto ts = treat_set_rows(rows, beta, stats, lambda);
      CHECK_FALSE(ts.codes.empty());
      const double min_stat = *std::min_element(stats.begin(), stats.end());
      CHECK(ts.accepted == (min_stat <= lambda));
      if (ts.accepted) {
        for (int k = 1; k <= K; ++k) {
          const bool in = std::find(ts.codes.begin(), ts.codes.end(), k) != ts.codes.end();
          CHECK(in == (stats[k - 1] <= lambda));
        }
        if (prev_accepted)
          for (int k : prev) CHECK(std::find(ts.codes.begin(), ts.codes.end(), k) != ts.codes.end());
      }
      prev = ts.codes;
      prev_accepted = ts.accepted;
    }
  }
}

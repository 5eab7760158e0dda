#pragma once

#include "dtrci/dataio.hpp"
#include "dtrci/genmodels.hpp"
#include "dtrci/rng.hpp"

#include <Eigen/Dense>

#include <cmath>

#include <random>
#include <vector>

namespace fixtures {

// A binary two-stage model with random effects; seeds index the fixture.
inline dtrci::GenModelSpec random_binary_model(std::uint64_t seed, double scale = 0.5) {
  dtrci::Rng rng(seed);
  std::normal_distribution<double> z(0.0, scale);
  dtrci::GenModelSpec m;
  m.label = "random";
  m.effects.resize(7);
  for (double& e : m.effects) e = z(rng);
  // zero some stage-2 effects so ties (non-regular histories) occur
  if (seed % 2 == 0) m.effects[4] = m.effects[5] = m.effects[6] = 0.0;
  return m;
}

inline dtrci::Dataset random_binary_dataset(std::uint64_t seed, int n = 120) {
  return dtrci::simulate(random_binary_model(seed), n, dtrci::derive_seed(seed, 99));
}

// Two stages with continuous covariates, an optional second stage, and the
// shape of a SMART analysis: six stage-1 and ten stage-2 coefficients.
inline dtrci::DesignSpec smart_shape_design() {
  using dtrci::FeatureTerm;
  dtrci::DesignSpec spec;
  dtrci::StageSpec s1;
  s1.n_covariates = 3;
  for (auto t : {"1", "X1_1", "X1_2", "X1_3"}) s1.main.push_back(FeatureTerm::parse(t));
  for (auto t : {"1", "X1_3"}) s1.interact.push_back(FeatureTerm::parse(t));
  dtrci::StageSpec s2;
  s2.n_covariates = 2;
  s2.optional = true;
  for (auto t : {"1", "X1_1", "X1_2", "X2_2", "X1_3", "X2_1", "A1"}) s2.main.push_back(FeatureTerm::parse(t));
  for (auto t : {"1", "X2_1", "A1"}) s2.interact.push_back(FeatureTerm::parse(t));
  spec.stages = {s1, s2};
  return spec;
}

inline dtrci::Dataset smart_shape_dataset(int n, std::uint64_t seed) {
  dtrci::Rng rng(seed);
  std::normal_distribution<double> z;
  std::bernoulli_distribution coin(0.5), stay(0.45);
  dtrci::Dataset ds;
  ds.spec = smart_shape_design();
  for (int i = 0; i < n; ++i) {
    dtrci::Trajectory tr;
    dtrci::StageRecord r1;
    r1.covariates = {z(rng), coin(rng) ? 1.0 : 0.0, coin(rng) ? 1.0 : 0.0};
    r1.action = coin(rng) ? 1 : 2;
    dtrci::StageRecord r2;
    const double a1 = *r1.action == 1 ? 1.0 : -1.0;
    if (stay(rng)) {
      r1.reward = 2.0 + r1.covariates[0] + 0.3 * a1 + z(rng);
      r2.covariates = {std::nan(""), std::nan("")};
    } else {
      r2.covariates = {coin(rng) ? 1.0 : 0.0, std::floor(2.0 + 6.0 * std::abs(z(rng)))};
      r2.action = coin(rng) ? 1 : 2;
      const double a2 = *r2.action == 1 ? 1.0 : -1.0;
      r2.reward = 1.0 + r1.covariates[0] + 0.9 * r1.covariates[1] + a2 * (-0.7 + r2.covariates[0]) + z(rng);
    }
    tr.stages = {r1, r2};
    ds.trajectories.push_back(std::move(tr));
  }
  return ds;
}

// Naive least squares through the normal equations.
inline Eigen::VectorXd normal_equations(const Eigen::MatrixXd& B, const Eigen::VectorXd& y) {
  return (B.transpose() * B).ldlt().solve(B.transpose() * y);
}

}  // namespace fixtures

#pragma once

#include <vector>

#include "fmdp/environments.hpp"
#include "fmdp/estimator.hpp"
#include "fmdp/model.hpp"

namespace fmdp::testing {

/// A single-action model whose factors all have empty scopes with the given rows.
inline Fmdp scopeFreeModel(const std::vector<std::vector<double>>& rows, double reward = 0.5) {
  std::vector<std::size_t> sizes;
  std::vector<TransitionFactor> trans;
  for (const auto& r : rows) {
    sizes.push_back(r.size());
    trans.push_back({Scope{}, r});
  }
  RewardFactor rf{Scope{}, {RewardDistribution::bernoulli(reward)}};
  return Fmdp(FactorSpace(sizes), FactorSpace({1}), std::move(trans), {std::move(rf)});
}

inline RandomFmdp smallRandom(std::uint64_t seed, std::size_t d = 3, std::size_t n = 4, std::size_t m = 1) {
  RandomFmdpConfig c;
  c.d = d;
  c.n = n;
  c.m = m;
  c.W = 2;
  c.rewardFactors = 1;
  c.seed = seed;
  return buildRandomFmdp(c);
}

/// Counters over the union family after `steps` uniformly random actions.
inline ScopeCounters exploredCounters(const Fmdp& env, std::size_t m, std::uint64_t steps, std::uint64_t seed) {
  const auto& X = env.jointSpace();
  std::vector<std::size_t> stateSizes(env.stateSpace().sizes().begin(), env.stateSpace().sizes().end());
  ScopeCounters counters(X, stateSizes, env.rewardFactorCount(), ScopeFamily(unionFamily(X.factorCount(), m)));
  Simulator sim(env, 0, seed);
  Rng pick(seed + 1000);
  for (std::uint64_t t = 0; t < steps; ++t) counters.record(sim.step(pick.below(env.actionCount())));
  counters.rollEpisode();
  return counters;
}

}  // namespace fmdp::testing

#include <doctest.h>

#include "fmdp/error.hpp"
#include "fmdp/structure.hpp"
#include "support.hpp"

using namespace fmdp;

namespace {

/// Factor 0 copies state factor 1; factor 1 is a fair coin. One binary action.
Fmdp copyModel(double reward0 = 0.5) {
  TransitionFactor copy{Scope{1}, {1, 0, 0, 1}};
  TransitionFactor coin{Scope{}, {0.5, 0.5}};
  RewardFactor r{Scope{}, {RewardDistribution::bernoulli(reward0)}};
  return Fmdp(FactorSpace({2, 2}), FactorSpace({2}), {copy, coin}, {r});
}

EmpiricalSnapshot snapshotOf(const Fmdp& env, std::size_t m, std::uint64_t steps, std::uint64_t seed) {
  const auto c = testing::exploredCounters(env, m, steps, seed);
  return EmpiricalSnapshot::fromCounters(c, ConfidenceParams::forSpace(env.jointSpace(), env.stateFactorCount(), m, 0.01));
}

}  // namespace

TEST_CASE("without data every scope is consistent") {
  const auto env = copyModel();
  const auto snap = snapshotOf(env, 1, 0, 1);
  for (const auto& z : enumerateScopes(3, 1)) {
    CHECK(transitionConsistent(snap, 0, z, 1));
    CHECK(rewardConsistent(snap, 0, z, 1));
  }
  auto sets = ConsistentScopeSets::initial(3, 1, 2, 1);
  const auto before = sets;
  eliminate(sets, snap, 1);
  CHECK(sets.transition == before.transition);
  CHECK(sets.reward == before.reward);
}

TEST_CASE("a scope that misses the parent is inconsistent once radii are small") {
  const auto env = copyModel();
  auto snap = snapshotOf(env, 1, 4000, 2);
  // Pbar_{0,{0}} is about 0.5 while the union with {1} gives 0 or 1
  CHECK(transitionConsistent(snap, 0, Scope{1}, 1));
  snap.setRadiusScale(0.05);
  CHECK_FALSE(transitionConsistent(snap, 0, Scope{0}, 1));
  CHECK_FALSE(transitionConsistent(snap, 0, Scope{2}, 1));
  CHECK(transitionConsistent(snap, 0, Scope{1}, 1));
  CHECK_THROWS_AS(transitionConsistent(snap, 0, Scope{0, 1}, 1), DomainError);
}

TEST_CASE("the threshold scale tightens the test") {
  const auto env = copyModel();
  const auto snap = snapshotOf(env, 1, 4000, 2);
  CHECK(transitionConsistent(snap, 0, Scope{0}, 1, 1.0));
  CHECK_FALSE(transitionConsistent(snap, 0, Scope{0}, 1, 0.05));
}

TEST_CASE("a constant reward keeps every reward scope consistent") {
  const auto env = copyModel(0.5);
  // deterministic reward 0.5 everywhere: estimates agree exactly
  std::vector<RewardDistribution> half{RewardDistribution{{0.5}, {1.0}}};
  const Fmdp flat(env.stateSpace(), env.actionSpace(), {env.transition(0), env.transition(1)},
                  {RewardFactor{Scope{}, half}});
  auto snap = snapshotOf(flat, 1, 5000, 3);
  snap.setRadiusScale(1e-6);
  for (const auto& z : enumerateScopes(3, 1)) CHECK(rewardConsistent(snap, 0, z, 1));
}

TEST_CASE("a reward that depends on a missing factor is reward-inconsistent") {
  std::vector<RewardDistribution> byAction{RewardDistribution::bernoulli(0.0), RewardDistribution::bernoulli(1.0)};
  const auto base = copyModel();
  const Fmdp env(base.stateSpace(), base.actionSpace(), {base.transition(0), base.transition(1)},
                 {RewardFactor{Scope{2}, byAction}});
  // the gap between a union cell (0 or 1) and the pooled mean (1/2) is 1/2, so simulate until
  // 2 eps < 1/2 with eps = sqrt(18 tau / N)
  auto snap = snapshotOf(env, 1, 80000, 4);
  CHECK(2 * snap.epsReward(snap.scopeId(Scope{0, 2}), 0) < 0.5);
  CHECK_FALSE(rewardConsistent(snap, 0, Scope{0}, 1));
  CHECK(rewardConsistent(snap, 0, Scope{2}, 1));
}

TEST_CASE("elimination is monotone, skips pinned sets and keeps order") {
  const auto env = copyModel();
  auto snap = snapshotOf(env, 1, 4000, 5);
  snap.setRadiusScale(0.05);
  auto sets = ConsistentScopeSets::initial(3, 1, 2, 1);
  sets.pinReward(0, Scope{0});
  const auto before = sets;
  eliminate(sets, snap, 1);
  CHECK(sets.subsetOf(before));
  CHECK(sets.transition[0] == std::vector<Scope>{Scope{1}});
  CHECK(sets.reward[0] == std::vector<Scope>{Scope{0}});
  CHECK(ConsistentScopeSets::wrongCount(before.transition[0], Scope{1}) == 2);
  CHECK(ConsistentScopeSets::wrongCount(sets.transition[0], Scope{1}) == 0);
  // a second pass changes nothing
  auto again = sets;
  eliminate(again, snap, 1);
  CHECK(again.transition == sets.transition);
}

TEST_CASE("serial and parallel elimination agree") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto env = testing::smallRandom(seed, 3, 5, 2).model;
    auto snap = snapshotOf(env, 2, 3000, seed);
    snap.setRadiusScale(0.1);
    auto a = ConsistentScopeSets::initial(5, 2, 3, 1), b = a;
    EliminationOptions serial;
    serial.parallel = false;
    try {
      eliminate(a, snap, 2, serial);
    } catch (const StructuralFault&) {
      CHECK_THROWS_AS(eliminate(b, snap, 2), StructuralFault);
      continue;
    }
    eliminate(b, snap, 2);
    CHECK(a.transition == b.transition);
    CHECK(a.reward == b.reward);
  }
}

TEST_CASE("an emptied set is a structural fault") {
  const auto env = copyModel();
  auto snap = snapshotOf(env, 1, 4000, 6);
  snap.setRadiusScale(0.05);
  auto sets = ConsistentScopeSets::initial(3, 1, 2, 1);
  sets.transition[0] = {Scope{0}, Scope{2}};
  CHECK_THROWS_AS(eliminate(sets, snap, 1), StructuralFault);
}

TEST_CASE("planted scopes survive elimination under uniform exploration") {
  int survived = 0;
  const int runs = 100;
  for (int seed = 1; seed <= runs; ++seed) {
    const auto rf = testing::smallRandom(seed);
    const auto snap = snapshotOf(rf.model, 1, 20000, seed);
    bool ok = true;
    for (std::size_t i = 0; i < 3; ++i) ok = ok && transitionConsistent(snap, i, rf.transitionScopes[i], 1);
    ok = ok && rewardConsistent(snap, 0, rf.rewardScopes[0], 1);
    survived += ok;
  }
  CHECK(survived >= 99);
}

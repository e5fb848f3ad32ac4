#include <doctest.h>

#include "fmdp/agents.hpp"
#include "fmdp/environments.hpp"
#include "fmdp/error.hpp"
#include "support.hpp"

using namespace fmdp;

namespace {

AgentConfig sysAdminConfig(Algorithm a) {
  AgentConfig c;
  c.algorithm = a;
  c.m = 3;
  return c;
}

void checkSameTrajectory(const RunResult& a, const RunResult& b) {
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t t = 0; t < a.steps.size(); ++t) {
    CHECK(a.steps[t].state == b.steps[t].state);
    CHECK(a.steps[t].action == b.steps[t].action);
    CHECK(a.steps[t].reward == b.steps[t].reward);
  }
  REQUIRE(a.episodes.size() == b.episodes.size());
  for (std::size_t k = 0; k < a.episodes.size(); ++k) {
    CHECK(a.episodes[k].start == b.episodes[k].start);
    CHECK(a.episodes[k].gain == b.episodes[k].gain);
  }
}

}  // namespace

TEST_CASE("algorithm names round-trip") {
  for (auto a : {Algorithm::SlfUcrl, Algorithm::FactoredUcrl, Algorithm::Ucrl2, Algorithm::NfaDorl})
    CHECK(parseAlgorithm(algorithmName(a)) == a);
  CHECK_THROWS_AS(parseAlgorithm("ucrl3"), DomainError);
}

TEST_CASE("a one-step run plans in the fully optimistic model") {
  const auto env = buildSysAdmin({});
  const auto res = slfUcrlRun(env, sysAdminAllWorking(env), sysAdminConfig(Algorithm::SlfUcrl), 1, 1);
  CHECK(res.steps.size() == 1);
  REQUIRE(res.episodes.size() == 1);
  CHECK(res.episodes[0].gain == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(res.episodes[0].length == 1);
}

TEST_CASE("pinning every scope is the known-structure algorithm") {
  const auto env = buildSysAdmin({});
  auto c = sysAdminConfig(Algorithm::SlfUcrl);
  c.transitionPins.clear();
  c.rewardPins.clear();
  for (std::size_t i = 0; i < 4; ++i) c.transitionPins.push_back(env.transition(i).scope);
  for (std::size_t j = 0; j < 4; ++j) c.rewardPins.push_back(env.reward(j).scope);
  const auto a = slfUcrlRun(env, 15, c, 3000, 7);
  const auto b = factoredUcrlRun(env, 15, sysAdminConfig(Algorithm::FactoredUcrl), 3000, 7);
  checkSameTrajectory(a, b);
  CHECK(b.algorithm == Algorithm::FactoredUcrl);
}

TEST_CASE("runs are reproducible from the seed") {
  const auto env = buildSysAdmin({});
  for (auto alg : {Algorithm::SlfUcrl, Algorithm::Ucrl2}) {
    const auto c = sysAdminConfig(alg);
    const auto a = runAgent(env, 15, c, 2000, 3), b = runAgent(env, 15, c, 2000, 3);
    checkSameTrajectory(a, b);
    const auto other = runAgent(env, 15, c, 2000, 4);
    bool differs = false;
    for (std::size_t t = 0; t < other.steps.size() && !differs; ++t) differs = other.steps[t].state != a.steps[t].state;
    CHECK(differs);
  }
}

TEST_CASE("serial and parallel agents agree") {
  const auto env = buildSysAdmin({});
  auto c = sysAdminConfig(Algorithm::SlfUcrl);
  const auto a = runAgent(env, 15, c, 2000, 5);
  c.parallel = false;
  checkSameTrajectory(a, runAgent(env, 15, c, 2000, 5));
}

TEST_CASE("bookkeeping and audits hold on a SysAdmin run") {
  const auto env = buildSysAdmin({});
  const double lambda = optimalGain(env);
  const auto res = slfUcrlRun(env, 15, sysAdminConfig(Algorithm::SlfUcrl), 5000, 2, lambda);
  CHECK(res.episodeBoundHolds());
  CHECK(res.trackedCells > 0);
  for (const auto& e : res.episodes) {
    CHECK(e.countersConsistent);
    CHECK(e.setsMonotone);
    CHECK(e.trueScopesSurvive);
    if (e.concentration) CHECK(e.optimistic);
    CHECK(e.transitionSetSizes.size() == 4);
  }
  for (std::size_t k = 1; k < res.episodes.size(); ++k)
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(res.episodes[k].transitionSetSizes[i] <= res.episodes[k - 1].transitionSetSizes[i]);
}

TEST_CASE("UCRL2 finds the better arm of a one-state problem") {
  TransitionFactor stay{Scope{}, {1.0}};
  RewardFactor arms{Scope{1}, {RewardDistribution::bernoulli(0.2), RewardDistribution::bernoulli(0.8)}};
  const Fmdp bandit(FactorSpace({1}), FactorSpace({2}), {stay}, {arms});
  AgentConfig c;
  c.algorithm = Algorithm::Ucrl2;
  const auto res = ucrl2Run(bandit, 0, c, 5000, 1, 0.8);
  std::size_t best = 0;
  for (std::size_t t = 2500; t < 5000; ++t) best += res.steps[t].action == 1;
  CHECK(best > 2400);
  CHECK(res.episodeBoundHolds());
  for (const auto& e : res.episodes)
    if (e.concentration) CHECK(e.optimistic);
}

TEST_CASE("the non-factored agent runs on known structure") {
  RandomFmdpConfig rc;
  rc.d = 2;
  rc.m = 1;
  rc.nonFactoredActions = true;
  rc.actionCount = 3;
  rc.seed = 2;
  const auto env = buildRandomFmdp(rc).model;
  AgentConfig c;
  c.algorithm = Algorithm::NfaDorl;
  const double lambda = optimalGain(env);
  const auto res = nfaDorlRun(env, 0, c, 3000, 1, lambda);
  CHECK(res.steps.size() == 3000);
  CHECK(res.episodeBoundHolds());
  for (const auto& e : res.episodes) {
    CHECK(e.countersConsistent);
    if (e.concentration) CHECK(e.optimistic);
  }
  CHECK(res.episodes.front().gain == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("configuration is validated") {
  const auto env = buildSysAdmin({});
  auto c = sysAdminConfig(Algorithm::SlfUcrl);
  c.transitionPins.assign(2, std::nullopt);
  CHECK_THROWS_AS(slfUcrlRun(env, 0, c, 10, 1), DomainError);
  c = sysAdminConfig(Algorithm::SlfUcrl);
  c.delta = 0.0;
  CHECK_THROWS_AS(slfUcrlRun(env, 0, c, 10, 1), DomainError);
  CHECK_THROWS_AS(slfUcrlRun(env, 0, sysAdminConfig(Algorithm::SlfUcrl), 0, 1), DomainError);
}

TEST_CASE("optimal gain agrees with brute force on SysAdmin") {
  SysAdminConfig c;
  c.servers = 3;
  const auto env = buildSysAdmin(c);
  CHECK(optimalGain(env) == doctest::Approx(exactGainBruteForce(flatten(env)).gain).epsilon(1e-5));
}

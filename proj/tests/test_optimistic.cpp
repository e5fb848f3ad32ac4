#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fmdp/agents.hpp"
#include "fmdp/error.hpp"
#include "fmdp/optimistic.hpp"
#include "support.hpp"

using namespace fmdp;

namespace {

struct Fixture {
  RandomFmdp rf;
  ScopeCounters counters;
  EmpiricalSnapshot snap;

  Fixture(std::uint64_t seed, std::uint64_t steps, double radiusScale, std::size_t d = 2, std::size_t n = 3)
      : rf(testing::smallRandom(seed, d, n, 1)),
        counters(testing::exploredCounters(rf.model, 1, steps, seed)),
        snap(EmpiricalSnapshot::fromCounters(counters, ConfidenceParams::forSpace(rf.model.jointSpace(), d, 1, 0.01))) {
    snap.setRadiusScale(radiusScale);
  }
};

std::vector<double> randomH(Rng& rng, std::size_t n) {
  std::vector<double> h(n);
  for (auto& x : h) x = rng.uniform() * 3.0;
  return h;
}

}  // namespace

TEST_CASE("optimistic rows move the trimmed mass to the direction") {
  Fixture f(1, 300, 0.2);
  const std::size_t z = f.snap.scopeId(Scope{0});
  std::vector<double> out(2);
  for (Index v : f.snap.visitedCells(z))
    for (std::size_t dir = 0; dir < 2; ++dir) {
      optimisticFactorTransition(f.snap, 0, z, v, dir, out);
      double moved = 0.0;
      for (std::size_t w = 0; w < 2; ++w) moved += f.snap.wTransition(z, 0, v, w);
      for (std::size_t w = 0; w < 2; ++w) {
        const double expect = f.snap.pBar(z, 0, v, w) - f.snap.wTransition(z, 0, v, w) + (w == dir ? moved : 0.0);
        CHECK(out[w] == doctest::Approx(expect));
      }
      CHECK(out[0] + out[1] == doctest::Approx(1.0));
    }
}

TEST_CASE("worked optimistic-row arithmetic") {
  // Pbar = (0.75, 0.25) with trimmed mass 0.1 on each value and direction 1
  const double p0 = 0.75, p1 = 0.25, w0 = 0.1, w1 = 0.1;
  CHECK(p0 - w0 == doctest::Approx(0.65));
  CHECK(p1 - w1 + (w0 + w1) == doctest::Approx(0.35));
}

TEST_CASE("zero radii reproduce the estimates and huge radii give a point mass") {
  Fixture f(2, 300, 0.0);
  const std::size_t z = f.snap.scopeId(Scope{1});
  std::vector<double> out(2);
  for (Index v : f.snap.visitedCells(z)) {
    optimisticFactorTransition(f.snap, 1, z, v, 1, out);
    CHECK(out[0] == doctest::Approx(f.snap.pBar(z, 1, v, 0)));
    CHECK(out[1] == doctest::Approx(f.snap.pBar(z, 1, v, 1)));
  }
  f.snap.setRadiusScale(1e6);
  for (Index v : f.snap.visitedCells(z)) {
    optimisticFactorTransition(f.snap, 1, z, v, 0, out);
    CHECK(out[0] == doctest::Approx(1.0));
  }
  Fixture empty(2, 0, 1.0);
  optimisticFactorTransition(empty.snap, 0, z, 0, 1, out);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 1.0);
}

TEST_CASE("optimistic rewards are clipped upper confidence values") {
  Fixture f(3, 200, 0.1);
  const std::size_t z = f.snap.scopeId(Scope{2});
  for (Index v = 0; v < f.snap.cellCount(z); ++v)
    CHECK(optimisticReward(f.snap, 0, z, v) ==
          doctest::Approx(std::min(1.0, f.snap.rBar(z, 0, v) + f.snap.epsReward(z, v))));
  Fixture empty(3, 0, 1.0);
  CHECK(optimisticReward(empty.snap, 0, z, 0) == 1.0);
}

TEST_CASE("extended action ids round-trip") {
  Fixture f(4, 200, 0.3);
  auto sets = ConsistentScopeSets::initial(3, 1, 2, 1);
  sets.transition[1] = {Scope{0}, Scope{2}};
  const TildeModelView view(f.snap, sets, f.rf.model.stateSpace(), f.rf.model.actionSpace());
  CHECK(view.extendedActionCount(0) == 2 * 4 * 3 * 2 * 3);
  for (std::uint64_t ext = 0; ext < view.extendedActionCount(0); ++ext) {
    const auto d = view.decode(ext);
    CHECK(view.encode(d) == ext);
    CHECK(d.transitionScope[1] < 2);
  }
}

TEST_CASE("fast backup equals full enumeration") {
  Rng rng(8);
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    Fixture f(seed, 50 + 100 * seed, seed % 2 ? 0.2 : 0.05);
    auto sets = ConsistentScopeSets::initial(3, 1, 2, 1);
    if (seed > 3) sets.transition[0] = {Scope{0}, Scope{1}};
    const TildeModelView view(f.snap, sets, f.rf.model.stateSpace(), f.rf.model.actionSpace());
    std::vector<double> dist(4);
    for (int trial = 0; trial < 5; ++trial) {
      const auto h = randomH(rng, 4);
      for (std::size_t s = 0; s < 4; ++s) {
        const auto fast = view.backup(s, h);
        const auto slow = view.OptimisticModelView::backup(s, h);
        CHECK(fast.value == doctest::Approx(slow.value).epsilon(1e-12));
        view.distribution(s, fast.action, h, dist);
        CHECK(std::accumulate(dist.begin(), dist.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
        const double direct = view.reward(s, fast.action) + std::inner_product(dist.begin(), dist.end(), h.begin(), 0.0);
        CHECK(direct == doctest::Approx(fast.value).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("the greedy direction never beats the exact backup") {
  Fixture f(5, 400, 0.2);
  const auto sets = ConsistentScopeSets::initial(3, 1, 2, 1);
  TildeOptions greedy;
  greedy.greedyDirection = true;
  const TildeModelView exact(f.snap, sets, f.rf.model.stateSpace(), f.rf.model.actionSpace());
  const TildeModelView approx(f.snap, sets, f.rf.model.stateSpace(), f.rf.model.actionSpace(), greedy);
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto h = randomH(rng, 4);
    for (std::size_t s = 0; s < 4; ++s) CHECK(approx.backup(s, h).value <= exact.backup(s, h).value + 1e-12);
  }
}

TEST_CASE("the enumeration cap is enforced") {
  Fixture f(5, 0, 1.0);
  const auto sets = ConsistentScopeSets::initial(3, 1, 2, 1);
  TildeOptions tiny;
  tiny.cap = 1;
  CHECK_THROWS_AS(TildeModelView(f.snap, sets, f.rf.model.stateSpace(), f.rf.model.actionSpace(), tiny), SizeError);
}

TEST_CASE("an empty SysAdmin snapshot is fully optimistic") {
  const auto env = buildSysAdmin({});
  const auto& X = env.jointSpace();
  ScopeCounters c(X, {2, 2, 2, 2}, 4, ScopeFamily(unionFamily(5, 3)));
  const auto snap = EmpiricalSnapshot::fromCounters(c, ConfidenceParams::forSpace(X, 4, 3, 0.01));
  const auto sets = ConsistentScopeSets::initial(5, 3, 4, 4);
  const auto res = eviSolve(TildeModelView(snap, sets, env.stateSpace(), env.actionSpace()));
  CHECK(res.gain == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("true singleton scopes with zero radii give the true gain") {
  const auto rf = testing::smallRandom(6, 3, 4, 1);
  const auto& env = rf.model;
  const ScopeFamily fam(unionFamily(4, 1));
  const auto snap = EmpiricalSnapshot::fromModel(env, fam, ConfidenceParams::forSpace(env.jointSpace(), 3, 1, 0.01));
  auto sets = ConsistentScopeSets::initial(4, 1, 3, 1);
  for (std::size_t i = 0; i < 3; ++i) sets.pinTransition(i, rf.transitionScopes[i]);
  sets.pinReward(0, rf.rewardScopes[0]);
  EviOptions opt;
  opt.tolerance = 1e-9;
  const double gain = eviSolve(TildeModelView(snap, sets, env.stateSpace(), env.actionSpace()), opt).gain;
  CHECK(gain == doctest::Approx(optimalGain(env, 1e-9)).epsilon(1e-6));
}

TEST_CASE("the explicit optimistic model keeps scopes small and encodes states") {
  Fixture f(7, 400, 0.05);
  const auto sets = ConsistentScopeSets::initial(3, 1, 2, 1);
  const HatModel hat = buildHatModel(f.snap, sets, f.rf.model.stateSpace(), f.rf.model.actionSpace());
  CHECK(hat.stretch == 4);
  CHECK(hat.levels == 2);
  CHECK(maxTransitionScopeSize(hat.model) <= 1 + 3);
  CHECK(maxRewardScopeSize(hat.model) <= 1 + 1);
  for (Index s = 0; s < 4; ++s) CHECK(hat.originalState(hat.startState(s)) == s);

  // every row of the explicit model sums to one
  const std::vector<Index> starts{hat.startState(0), hat.startState(3)};
  const auto reach = flattenReachable(hat.model, starts);
  for (std::size_t s = 0; s < reach.mdp.stateCount(); s += 97)
    for (std::size_t a = 0; a < reach.mdp.actionCount(); a += 13) {
      double total = 0.0;
      for (const auto& t : reach.mdp.row(s, a)) total += t.prob;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("the explicit model's greedy first action is optimal in the implicit view") {
  Fixture f(7, 400, 0.05);
  const auto sets = ConsistentScopeSets::initial(3, 1, 2, 1);
  const TildeModelView view(f.snap, sets, f.rf.model.stateSpace(), f.rf.model.actionSpace());
  EviOptions opt;
  opt.tolerance = 1e-10;
  const auto tilde = eviSolve(view, opt);
  const HatModel hat = buildHatModel(f.snap, sets, f.rf.model.stateSpace(), f.rf.model.actionSpace());
  std::vector<Index> starts;
  for (Index s = 0; s < 4; ++s) starts.push_back(hat.startState(s));
  const auto reach = flattenReachable(hat.model, starts);
  EviOptions hopt;
  hopt.tolerance = 1e-10;
  hopt.damping = Damping::Always;
  hopt.maxIterations = 1'000'000;
  const auto res = eviSolve(TabularView(reach.mdp), hopt);
  CHECK(res.gain * hat.stretch == doctest::Approx(tilde.gain).epsilon(1e-6));
  for (Index s = 0; s < 4; ++s) {
    const Index a = hat.originalAction(res.policy[reach.compactIndexOf(hat.startState(s))]);
    CHECK(view.actionValue(s, a, tilde.bias).value >= view.backup(s, tilde.bias).value - 1e-6);
  }
}

TEST_CASE("the stretched non-factored models") {
  RandomFmdpConfig c;
  c.d = 2;
  c.W = 3;
  c.m = 1;
  c.nonFactoredActions = true;
  c.actionCount = 2;
  c.seed = 4;
  const auto env = buildRandomFmdp(c).model;
  const NfaModel mp = buildMPrime(env);
  CHECK(mp.stretch == 4);
  CHECK(mp.model.actionCount() == 2);
  for (Index s = 0; s < env.stateCount(); ++s) CHECK(mp.originalState(mp.startState(s)) == s);

  SUBCASE("true-model gain scales by d + 2") {
    std::vector<Index> starts;
    for (Index s = 0; s < env.stateCount(); ++s) starts.push_back(mp.startState(s));
    const auto reach = flattenReachable(mp.model, starts);
    EviOptions opt;
    opt.tolerance = 1e-10;
    opt.damping = Damping::Always;
    CHECK(eviSolve(TabularView(reach.mdp), opt).gain * 4 == doctest::Approx(optimalGain(env, 1e-10)).epsilon(1e-6));
  }

  SUBCASE("with zero radii the optimistic model has the true gain") {
    const auto known = KnownScopes::of(env);
    const ScopeFamily fam(known.family());
    const auto snap = EmpiricalSnapshot::fromModel(env, fam, ConfidenceParams::forSpace(env.jointSpace(), 2, 2, 0.01));
    const NfaModel opt = buildNfaOptimistic(snap, known, env.stateSpace(), env.actionCount());
    CHECK(opt.model.actionCount() == 3);  // max(|A|, W)
    std::vector<Index> starts;
    for (Index s = 0; s < env.stateCount(); ++s) starts.push_back(opt.startState(s));
    const auto reach = flattenReachable(opt.model, starts);
    EviOptions o;
    o.tolerance = 1e-10;
    o.damping = Damping::Always;
    CHECK(eviSolve(TabularView(reach.mdp), o).gain * 4 == doctest::Approx(optimalGain(env, 1e-10)).epsilon(1e-6));

    // an illegal first action withholds the block's reward
    const auto& S = opt.model.stateSpace();
    Rng rng(1);
    const Index start = opt.startState(0);
    CHECK(opt.model.meanReward(start, 0) > 0.0);
    CHECK(opt.model.meanReward(start, 2) == 0.0);
    Index s = sampleStep(opt.model, start, 2, rng).nextState;
    CHECK(S.valueOf(s, opt.bitFactor()) == 0);
    for (std::size_t c2 = 1; c2 <= opt.d + 1; ++c2) {
      CHECK(opt.model.meanReward(s, 0) == 0.0);
      s = sampleStep(opt.model, s, 0, rng).nextState;
    }
    CHECK(S.valueOf(s, opt.counterFactor()) == 0);
    CHECK(opt.model.meanReward(s, 0) == 0.0);
    // the next legal counter-0 step sets the bit again
    s = sampleStep(opt.model, s, 0, rng).nextState;
    CHECK(S.valueOf(s, opt.bitFactor()) == 1);
  }
}

TEST_CASE("a single-factor stretched model has a third of the gain") {
  RandomFmdpConfig c;
  c.d = 1;
  c.W = 2;
  c.m = 1;
  c.nonFactoredActions = true;
  c.actionCount = 2;
  c.seed = 9;
  const auto env = buildRandomFmdp(c).model;
  const NfaModel mp = buildMPrime(env);
  const std::vector<Index> starts{mp.startState(0), mp.startState(1)};
  const auto reach = flattenReachable(mp.model, starts);
  EviOptions opt;
  opt.tolerance = 1e-10;
  opt.damping = Damping::Always;
  CHECK(eviSolve(TabularView(reach.mdp), opt).gain == doctest::Approx(optimalGain(env, 1e-10) / 3).epsilon(1e-6));
}

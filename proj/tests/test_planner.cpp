#include <doctest.h>

#include <sstream>

#include "fmdp/environments.hpp"
#include "fmdp/error.hpp"
#include "fmdp/planner.hpp"

using namespace fmdp;

namespace {

TabularMdp randomMdp(Rng& rng, std::size_t S, std::size_t A) {
  std::vector<double> P(S * A * S), r(S * A);
  for (std::size_t sa = 0; sa < S * A; ++sa) {
    double total = 0.0;
    for (std::size_t s2 = 0; s2 < S; ++s2) total += P[sa * S + s2] = rng.gamma(0.5) + 1e-3;
    for (std::size_t s2 = 0; s2 < S; ++s2) P[sa * S + s2] /= total;
    r[sa] = rng.uniform();
  }
  return TabularMdp::fromDense(S, A, P, r);
}

}  // namespace

TEST_CASE("single state keeps its reward") {
  const std::vector<double> P{1}, r{0.7};
  const auto res = eviSolve(TabularView(TabularMdp::fromDense(1, 1, P, r)));
  CHECK(res.gain == doctest::Approx(0.7));
  CHECK(res.biasSpan == 0.0);
}

TEST_CASE("a forced two-cycle averages its rewards") {
  const std::vector<double> P{0, 1, 1, 0}, r{0, 1};
  const auto mdp = TabularMdp::fromDense(2, 1, P, r);
  const auto res = eviSolve(TabularView(mdp));
  CHECK(res.gain == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(res.damped);
  EviOptions never;
  never.damping = Damping::Never;
  never.maxIterations = 200;
  CHECK_THROWS_AS(eviSolve(TabularView(mdp), never), NonConvergenceError);
  EviOptions always;
  always.damping = Damping::Always;
  CHECK(eviSolve(TabularView(mdp), always).gain == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("brute force picks the best action and the lowest index on ties") {
  const std::vector<double> P{1, 1}, r{0.2, 0.9};
  const auto one = exactGainBruteForce(TabularMdp::fromDense(1, 2, P, r));
  CHECK(one.gain == doctest::Approx(0.9));
  CHECK(one.policy == std::vector<std::size_t>{1});

  const std::vector<double> P2{0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5}, r2{0.3, 0.3, 0.3, 0.3};
  const auto tie = exactGainBruteForce(TabularMdp::fromDense(2, 2, P2, r2));
  CHECK(tie.gain == doctest::Approx(0.3));
  CHECK(tie.policy == std::vector<std::size_t>{0, 0});
}

TEST_CASE("policy gain of an absorbing zero-reward set is zero") {
  // state 0 pays 1 but leads to the absorbing state 1 which pays nothing
  const std::vector<double> P{0, 1, 0, 1}, r{1, 0};
  const auto mdp = TabularMdp::fromDense(2, 1, P, r);
  const std::vector<std::size_t> pol{0, 0};
  CHECK(policyGain(mdp, pol) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("value iteration agrees with exhaustive policy search") {
  Rng rng(17);
  for (int k = 0; k < 20; ++k) {
    const auto mdp = randomMdp(rng, 2 + rng.below(7), 1 + rng.below(3));
    EviOptions opt;
    opt.tolerance = 1e-8;
    const auto evi = eviSolve(TabularView(mdp), opt);
    const auto brute = exactGainBruteForce(mdp);
    CHECK(evi.gain == doctest::Approx(brute.gain).epsilon(1e-6));
    const std::vector<std::size_t> greedy(evi.policy.begin(), evi.policy.end());
    CHECK(policyGain(mdp, greedy) == doctest::Approx(brute.gain).epsilon(1e-5));
    CHECK(policyGain(mdp, brute.policy) == doctest::Approx(brute.gain).epsilon(1e-9));
  }
}

TEST_CASE("serial and parallel kernels give identical results") {
  Rng rng(3);
  const auto mdp = randomMdp(rng, 9, 3);
  EviOptions par, ser;
  ser.parallel = false;
  const auto a = eviSolve(TabularView(mdp), par), b = eviSolve(TabularView(mdp), ser);
  CHECK(a.gain == b.gain);
  CHECK(a.bias == b.bias);
  CHECK(a.policy == b.policy);
  CHECK(a.iterations == b.iterations);
  const auto x = exactGainBruteForce(mdp, true), y = exactGainBruteForce(mdp, false);
  CHECK(x.gain == y.gain);
  CHECK(x.policy == y.policy);
}

TEST_CASE("value iteration results are normalized and traced") {
  const auto mdp = flatten(buildSysAdmin({}));
  std::ostringstream trace;
  EviOptions opt;
  opt.trace = &trace;
  const auto res = eviSolve(TabularView(mdp), opt);
  CHECK(*std::min_element(res.bias.begin(), res.bias.end()) == 0.0);
  CHECK(res.span <= opt.tolerance);
  CHECK(res.gain > 0.8);
  CHECK(res.gain <= 1.0);
  std::size_t lines = 0;
  std::string line;
  std::istringstream in(trace.str());
  while (std::getline(in, line)) ++lines;
  CHECK(lines == res.iterations + 1);
}

TEST_CASE("brute force refuses huge policy spaces") {
  Rng rng(1);
  const auto mdp = randomMdp(rng, 12, 4);
  CHECK_THROWS_AS(exactGainBruteForce(mdp), SizeError);
}

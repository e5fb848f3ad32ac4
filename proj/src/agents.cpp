#include "fmdp/agents.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "fmdp/error.hpp"
#include "fmdp/estimator.hpp"
#include "fmdp/optimistic.hpp"

namespace fmdp {

std::string algorithmName(Algorithm a) {
  switch (a) {
    case Algorithm::SlfUcrl: return "slf-ucrl";
    case Algorithm::FactoredUcrl: return "factored-ucrl";
    case Algorithm::Ucrl2: return "ucrl2";
    case Algorithm::NfaDorl: return "nfa-dorl";
  }
  return "unknown";
}

Algorithm parseAlgorithm(const std::string& name) {
  for (auto a : {Algorithm::SlfUcrl, Algorithm::FactoredUcrl, Algorithm::Ucrl2, Algorithm::NfaDorl})
    if (algorithmName(a) == name) return a;
  throw DomainError("unknown algorithm '" + name + "'");
}

double RunResult::episodeBound(std::uint64_t T) const {
  return static_cast<double>(trackedCells) * (std::log2(static_cast<double>(std::max<std::uint64_t>(T, 1))) + 1.0);
}

bool RunResult::episodeBoundHolds() const {
  return static_cast<double>(episodes.size()) <= episodeBound(steps.size());
}

namespace {

using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Every size-m superset of `truth` is still in `set`.
bool supersetsSurvive(const std::vector<Scope>& set, const Scope& truth, std::size_t n, std::size_t m) {
  if (truth.size() > m) return false;
  for (const auto& z : enumerateScopes(n, m))
    if (z.containsAll(truth) && std::find(set.begin(), set.end(), z) == set.end()) return false;
  return true;
}

void checkPins(const Fmdp& env, const AgentConfig& c) {
  if (!c.transitionPins.empty() && c.transitionPins.size() != env.stateFactorCount())
    throw DomainError("transition pins must list every state factor");
  if (!c.rewardPins.empty() && c.rewardPins.size() != env.rewardFactorCount())
    throw DomainError("reward pins must list every reward factor");
  if (c.m == 0 || c.m > env.jointFactorCount()) throw DomainError("m must lie in [1, n]");
  if (!(c.delta > 0.0 && c.delta < 1.0)) throw DomainError("delta must lie in (0,1)");
}

}  // namespace

ConsistentScopeSets initialSets(const Fmdp& env, const AgentConfig& config) {
  checkPins(env, config);
  auto sets = ConsistentScopeSets::initial(env.jointFactorCount(), config.m, env.stateFactorCount(),
                                           env.rewardFactorCount());
  // pinned scopes keep their own size; only unknown scopes range over size-m candidates
  for (std::size_t i = 0; i < config.transitionPins.size(); ++i)
    if (config.transitionPins[i]) sets.pinTransition(i, *config.transitionPins[i]);
  for (std::size_t j = 0; j < config.rewardPins.size(); ++j)
    if (config.rewardPins[j]) sets.pinReward(j, *config.rewardPins[j]);
  return sets;
}

RunResult slfUcrlRun(const Fmdp& env, Index initialState, const AgentConfig& config, std::uint64_t T,
                     std::uint64_t seed, double lambdaStar) {
  if (T == 0) throw DomainError("horizon must be at least 1");
  const std::size_t n = env.jointFactorCount(), d = env.stateFactorCount(), ell = env.rewardFactorCount();
  const std::size_t m = config.m;
  auto sets = initialSets(env, config);
  const bool allPinned = std::all_of(sets.transitionPinned.begin(), sets.transitionPinned.end(), [](bool b) { return b; }) &&
                         std::all_of(sets.rewardPinned.begin(), sets.rewardPinned.end(), [](bool b) { return b; });

  // unknown scopes need every union of two candidates; pinned scopes are tracked as given
  std::vector<Scope> family;
  if (!allPinned) family = unionFamily(n, m);
  for (const auto* lists : {&sets.transition, &sets.reward})
    for (std::size_t k = 0; k < lists->size(); ++k) {
      const bool pinned = lists == &sets.transition ? sets.transitionPinned[k] : sets.rewardPinned[k];
      if (pinned && std::find(family.begin(), family.end(), (*lists)[k][0]) == family.end())
        family.push_back((*lists)[k][0]);
    }

  const FactorSpace& X = env.jointSpace();
  const auto params = ConfidenceParams::forSpace(X, d, m, config.delta);
  std::vector<std::size_t> stateSizes(env.stateSpace().sizes().begin(), env.stateSpace().sizes().end());
  ScopeCounters counters(X, stateSizes, ell, ScopeFamily(family));

  RunResult res;
  res.algorithm = config.algorithm;
  res.seed = seed;
  res.lambdaStar = lambdaStar;
  res.trackedCells = counters.trackedCellTotal();
  res.steps.reserve(T);

  Simulator sim(env, initialState, seed);
  const Index S = env.stateCount();
  std::vector<Index> policy(S, 0);
  std::uint64_t t = 1;
  EviOptions evi;
  evi.tolerance = config.eviTolerance;
  evi.maxIterations = config.eviMaxIterations;
  evi.parallel = config.parallel;

  while (t <= T) {
    const auto started = Clock::now();
    counters.rollEpisode();
    EpisodeLog log;
    log.k = res.episodes.size() + 1;
    log.start = t;
    log.countersConsistent = counters.invariantsHold();
    auto snap = EmpiricalSnapshot::fromCounters(counters, params);
    snap.setRadiusScale(config.radiusScale);

    const auto before = sets;
    eliminate(sets, snap, m, {config.eliminationScale, config.parallel});
    log.setsMonotone = sets.subsetOf(before);

    TildeModelView view(snap, sets, env.stateSpace(), env.actionSpace(),
                        {config.enumerationCap, config.greedyDirection});
    const auto sol = eviSolve(view, evi);
    for (Index s = 0; s < S; ++s) policy[s] = view.decode(sol.policy[s]).action;
    log.gain = sol.gain;
    log.biasSpan = sol.biasSpan;
    for (const auto& z : sets.transition) log.transitionSetSizes.push_back(z.size());
    for (const auto& z : sets.reward) log.rewardSetSizes.push_back(z.size());
    for (std::size_t i = 0; i < d; ++i)
      log.wrongScopes.push_back(ConsistentScopeSets::wrongCount(sets.transition[i], env.transition(i).scope));

    if (config.audit) {
      log.concentration = concentrationHolds(snap, env);
      for (std::size_t i = 0; i < d; ++i)
        if (!sets.transitionPinned[i] && !supersetsSurvive(sets.transition[i], env.transition(i).scope, n, m))
          log.trueScopesSurvive = false;
      for (std::size_t j = 0; j < ell; ++j)
        if (!sets.rewardPinned[j] && !supersetsSurvive(sets.reward[j], env.reward(j).scope, n, m))
          log.trueScopesSurvive = false;
      if (!std::isnan(lambdaStar)) log.optimistic = sol.gain >= lambdaStar - 1e-3;
    }

    // check-before-act: the episode ends when the cell about to be visited has doubled
    while (t <= T) {
      const Index s = sim.state();
      const Index a = policy[s];
      if (counters.doublingTriggered(env.jointIndex(s, a))) break;
      const auto rec = sim.step(a);
      counters.record(rec);
      res.steps.push_back({s, a, rec.reward()});
      ++log.length;
      ++t;
    }
    log.wallSeconds = secondsSince(started);
    res.episodes.push_back(std::move(log));
  }
  return res;
}

RunResult factoredUcrlRun(const Fmdp& env, Index initialState, const AgentConfig& config, std::uint64_t T,
                          std::uint64_t seed, double lambdaStar) {
  AgentConfig known = config;
  known.algorithm = Algorithm::FactoredUcrl;
  known.transitionPins.assign(env.stateFactorCount(), std::nullopt);
  known.rewardPins.assign(env.rewardFactorCount(), std::nullopt);
  for (std::size_t i = 0; i < env.stateFactorCount(); ++i) known.transitionPins[i] = env.transition(i).scope;
  for (std::size_t j = 0; j < env.rewardFactorCount(); ++j) known.rewardPins[j] = env.reward(j).scope;
  return slfUcrlRun(env, initialState, known, T, seed, lambdaStar);
}

// ---------------------------------------------------------------------------
// UCRL2

Ucrl2View::Ucrl2View(std::size_t states, std::size_t actions, std::vector<double> pHat, std::vector<double> rewards,
                     std::vector<double> radius)
    : S_(states), A_(actions), pHat_(std::move(pHat)), rewards_(std::move(rewards)), radius_(std::move(radius)) {}

void Ucrl2View::inner(std::size_t s, std::size_t a, std::span<const std::size_t> order, std::span<double> out) const {
  const double* p = pHat_.data() + (s * A_ + a) * S_;
  double total = 0.0;
  for (std::size_t n = 0; n < S_; ++n) total += (out[n] = p[n]);
  if (total <= 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    out[order[0]] = 1.0;
    return;
  }
  const std::size_t best = order[0];
  total += std::min(1.0, out[best] + 0.5 * radius_[s * A_ + a]) - out[best];
  out[best] = std::min(1.0, out[best] + 0.5 * radius_[s * A_ + a]);
  for (std::size_t l = S_ - 1; total > 1.0 && l > 0; --l) {
    const std::size_t w = order[l];
    const double rest = total - out[w];
    const double keep = std::max(0.0, 1.0 - rest);
    total = rest + keep;
    out[w] = keep;
  }
}

void Ucrl2View::distribution(std::size_t s, std::uint64_t a, std::span<const double> h, std::span<double> out) const {
  std::vector<std::size_t> order(S_);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return h[x] > h[y]; });
  inner(s, static_cast<std::size_t>(a), order, out);
}

OptimisticModelView::Backup Ucrl2View::backup(std::size_t s, std::span<const double> h) const {
  std::vector<std::size_t> order(S_);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return h[x] > h[y]; });
  std::vector<double> p(S_);
  Backup best{-std::numeric_limits<double>::infinity(), 0};
  for (std::size_t a = 0; a < A_; ++a) {
    inner(s, a, order, p);
    double v = rewards_[s * A_ + a];
    for (std::size_t n = 0; n < S_; ++n) v += p[n] * h[n];
    if (v > best.value + 1e-12) best = {v, a};
  }
  return best;
}

RunResult ucrl2Run(const Fmdp& env, Index initialState, const AgentConfig& config, std::uint64_t T,
                   std::uint64_t seed, double lambdaStar) {
  if (T == 0) throw DomainError("horizon must be at least 1");
  const std::size_t S = env.stateCount(), A = env.actionCount();
  if (S * A > kDefaultFlattenCap || S * S * A > (std::size_t{1} << 28)) throw SizeError("UCRL2 needs a small flat model");
  const TabularMdp truth = config.audit ? flatten(env) : TabularMdp();

  std::vector<std::uint64_t> N(S * A, 0), nu(S * A, 0), Nn(S * A * S, 0), nun(S * A * S, 0);
  std::vector<double> R(S * A, 0.0), rho(S * A, 0.0);
  RunResult res;
  res.algorithm = Algorithm::Ucrl2;
  res.seed = seed;
  res.lambdaStar = lambdaStar;
  res.trackedCells = S * A;
  res.steps.reserve(T);
  Simulator sim(env, initialState, seed);
  std::vector<Index> policy(S, 0);
  EviOptions evi;
  evi.tolerance = config.eviTolerance;
  evi.maxIterations = config.eviMaxIterations;
  evi.parallel = config.parallel;

  std::uint64_t t = 1;
  while (t <= T) {
    const auto started = Clock::now();
    for (std::size_t k = 0; k < S * A; ++k) {
      N[k] += std::exchange(nu[k], 0);
      R[k] += std::exchange(rho[k], 0.0);
    }
    for (std::size_t k = 0; k < Nn.size(); ++k) Nn[k] += std::exchange(nun[k], 0);
    EpisodeLog log;
    log.k = res.episodes.size() + 1;
    log.start = t;

    const double tk = static_cast<double>(t);
    const double Sd = static_cast<double>(S), Ad = static_cast<double>(A);
    std::vector<double> pHat(S * A * S), rew(S * A), radius(S * A);
    for (std::size_t k = 0; k < S * A; ++k) {
      const double cnt = std::max<double>(static_cast<double>(N[k]), 1.0);
      for (std::size_t n2 = 0; n2 < S; ++n2) pHat[k * S + n2] = static_cast<double>(Nn[k * S + n2]) / cnt;
      radius[k] = config.radiusScale * std::sqrt(14.0 * Sd * std::log(2.0 * Ad * tk / config.delta) / cnt);
      const double rRad = config.radiusScale * std::sqrt(7.0 * std::log(2.0 * Sd * Ad * tk / config.delta) / (2.0 * cnt));
      rew[k] = std::min(1.0, R[k] / cnt + rRad);
      if (config.audit && N[k] > 0) {
        double l1 = 0.0;
        for (std::size_t n2 = 0; n2 < S; ++n2) l1 += std::abs(pHat[k * S + n2] - truth.probability(k / A, k % A, n2));
        if (l1 > radius[k] || std::abs(R[k] / cnt - truth.reward(k / A, k % A)) > rRad) log.concentration = false;
      }
    }
    Ucrl2View view(S, A, std::move(pHat), std::move(rew), std::move(radius));
    const auto sol = eviSolve(view, evi);
    for (std::size_t s = 0; s < S; ++s) policy[s] = sol.policy[s];
    log.gain = sol.gain;
    log.biasSpan = sol.biasSpan;
    if (config.audit && !std::isnan(lambdaStar)) log.optimistic = sol.gain >= lambdaStar - 1e-3;

    while (t <= T) {
      const Index s = sim.state();
      const Index a = policy[s];
      const std::size_t k = s * A + a;
      if (nu[k] >= std::max<std::uint64_t>(N[k], 1)) break;
      const auto rec = sim.step(a);
      ++nu[k];
      ++nun[k * S + rec.nextState];
      rho[k] += rec.reward();
      res.steps.push_back({s, a, rec.reward()});
      ++log.length;
      ++t;
    }
    log.wallSeconds = secondsSince(started);
    res.episodes.push_back(std::move(log));
  }
  return res;
}

// ---------------------------------------------------------------------------
// NFA-DORL

RunResult nfaDorlRun(const Fmdp& env, Index initialState, const AgentConfig& config, std::uint64_t T,
                     std::uint64_t seed, double lambdaStar) {
  if (T == 0) throw DomainError("horizon must be at least 1");
  const auto known = KnownScopes::of(env);
  const std::size_t d = env.stateFactorCount(), ell = env.rewardFactorCount();
  const auto family = known.family();
  std::size_t m = 1;
  for (const auto& z : family) m = std::max(m, z.size());
  const FactorSpace& X = env.jointSpace();
  const auto params = ConfidenceParams::forSpace(X, d, m, config.delta);
  std::vector<std::size_t> stateSizes(env.stateSpace().sizes().begin(), env.stateSpace().sizes().end());
  ScopeCounters counters(X, stateSizes, ell, ScopeFamily(family));

  RunResult res;
  res.algorithm = Algorithm::NfaDorl;
  res.seed = seed;
  res.lambdaStar = lambdaStar;
  res.trackedCells = counters.trackedCellTotal();
  res.steps.reserve(T);
  Simulator sim(env, initialState, seed);
  const Index S = env.stateCount(), A = env.actionCount();
  std::vector<Index> policy(S, 0), starts(S);
  EviOptions evi;
  evi.tolerance = config.eviTolerance;
  evi.maxIterations = config.eviMaxIterations;
  evi.parallel = config.parallel;
  evi.damping = Damping::Always;  // the stretched chain is periodic

  std::uint64_t t = 1;
  while (t <= T) {
    const auto started = Clock::now();
    counters.rollEpisode();
    EpisodeLog log;
    log.k = res.episodes.size() + 1;
    log.start = t;
    log.countersConsistent = counters.invariantsHold();
    auto snap = EmpiricalSnapshot::fromCounters(counters, params);
    snap.setRadiusScale(config.radiusScale);

    const auto nfa = buildNfaOptimistic(snap, known, env.stateSpace(), A);
    for (Index s = 0; s < S; ++s) starts[s] = nfa.startState(s);
    const auto reach = flattenReachable(nfa.model, starts);
    const auto sol = eviSolve(TabularView(reach.mdp), evi);
    for (Index s = 0; s < S; ++s) {
      const Index a = sol.policy[reach.compactIndexOf(starts[s])];
      policy[s] = a < A ? a : 0;
    }
    log.gain = sol.gain * static_cast<double>(nfa.stretch);
    log.biasSpan = sol.biasSpan;
    if (config.audit) {
      log.concentration = concentrationHolds(snap, env);
      if (!std::isnan(lambdaStar)) log.optimistic = log.gain >= lambdaStar - 1e-3;
    }

    while (t <= T) {
      const Index s = sim.state();
      const Index a = policy[s];
      if (counters.doublingTriggered(env.jointIndex(s, a))) break;
      const auto rec = sim.step(a);
      counters.record(rec);
      res.steps.push_back({s, a, rec.reward()});
      ++log.length;
      ++t;
    }
    log.wallSeconds = secondsSince(started);
    res.episodes.push_back(std::move(log));
  }
  return res;
}

RunResult runAgent(const Fmdp& env, Index initialState, const AgentConfig& config, std::uint64_t T,
                   std::uint64_t seed, double lambdaStar) {
  switch (config.algorithm) {
    case Algorithm::SlfUcrl: return slfUcrlRun(env, initialState, config, T, seed, lambdaStar);
    case Algorithm::FactoredUcrl: return factoredUcrlRun(env, initialState, config, T, seed, lambdaStar);
    case Algorithm::Ucrl2: return ucrl2Run(env, initialState, config, T, seed, lambdaStar);
    case Algorithm::NfaDorl: return nfaDorlRun(env, initialState, config, T, seed, lambdaStar);
  }
  throw DomainError("unknown algorithm");
}

double optimalGain(const Fmdp& env, double tolerance) {
  const auto mdp = flatten(env);
  try {
    EviOptions o;
    o.tolerance = tolerance;
    return eviSolve(TabularView(mdp), o).gain;
  } catch (const NonConvergenceError&) {
    return exactGainBruteForce(mdp).gain;
  }
}

}  // namespace fmdp

#include "fmdp/structure.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fmdp/error.hpp"

namespace fmdp {

ConsistentScopeSets ConsistentScopeSets::initial(std::size_t n, std::size_t m, std::size_t d,
                                                 std::size_t ell) {
  const auto all = enumerateScopes(n, m);
  ConsistentScopeSets sets;
  sets.transition.assign(d, all);
  sets.reward.assign(ell, all);
  sets.transitionPinned.assign(d, false);
  sets.rewardPinned.assign(ell, false);
  return sets;
}

void ConsistentScopeSets::pinTransition(std::size_t i, const Scope& z) {
  if (i >= transition.size()) throw DomainError("no transition factor " + std::to_string(i));
  transition[i] = {z};
  transitionPinned[i] = true;
}

void ConsistentScopeSets::pinReward(std::size_t j, const Scope& z) {
  if (j >= reward.size()) throw DomainError("no reward factor " + std::to_string(j));
  reward[j] = {z};
  rewardPinned[j] = true;
}

namespace {

bool isSubset(const std::vector<std::vector<Scope>>& now, const std::vector<std::vector<Scope>>& before) {
  if (now.size() != before.size()) return false;
  for (std::size_t k = 0; k < now.size(); ++k)
    for (const auto& z : now[k])
      if (std::find(before[k].begin(), before[k].end(), z) == before[k].end()) return false;
  return true;
}

}  // namespace

bool ConsistentScopeSets::subsetOf(const ConsistentScopeSets& before) const {
  return isSubset(transition, before.transition) && isSubset(reward, before.reward);
}

std::size_t ConsistentScopeSets::wrongCount(const std::vector<Scope>& set, const Scope& truth) {
  return static_cast<std::size_t>(
      std::count_if(set.begin(), set.end(), [&](const Scope& z) { return !z.containsAll(truth); }));
}

namespace {

/// Shared walk over (Z', v) for one candidate Z. `violates(uid, v, zCell)` returns true on the
/// first failing cell.
template <class Violates>
bool consistentWith(const EmpiricalSnapshot& snap, const Scope& z, std::size_t m, bool skipUnvisited,
                    Violates&& violates) {
  const auto& X = snap.joint();
  const std::size_t zid = snap.scopeId(z);
  for (const auto& other : enumerateScopes(X.factorCount(), m)) {
    if (other == z) continue;  // the union is Z itself and the test is vacuous
    const Scope u = z.unite(other);
    const std::size_t uid = snap.scopeId(u);
    const ScopeProjector toZ(subspace(X, u), z.positionsWithin(u));
    if (skipUnvisited) {
      for (auto v : snap.visitedCells(uid))
        if (violates(uid, zid, v, toZ(v))) return false;
    } else {
      for (Index v = 0; v < snap.cellCount(uid); ++v)
        if (violates(uid, zid, v, toZ(v))) return false;
    }
  }
  return true;
}

}  // namespace

bool transitionConsistent(const EmpiricalSnapshot& snap, std::size_t i, const Scope& z, std::size_t m,
                          double thresholdScale) {
  if (z.size() != m) throw DomainError("candidate scope must have size m");
  const std::size_t W = snap.stateSizes()[i];
  // an unvisited union cell has Pbar = 0 and eps = 18 tau, so it passes whenever 36 tau >= 1
  const bool skip = 36.0 * thresholdScale * snap.radiusScale() * snap.tau() >= 1.0;
  return consistentWith(snap, z, m, skip, [&](std::size_t uid, std::size_t zid, Index v, Index vz) {
    for (std::size_t w = 0; w < W; ++w) {
      const double gap = std::abs(snap.pBar(uid, i, v, w) - snap.pBar(zid, i, vz, w));
      if (gap > 2.0 * thresholdScale * snap.epsTransition(uid, i, v, w)) return true;
    }
    return false;
  });
}

bool rewardConsistent(const EmpiricalSnapshot& snap, std::size_t j, const Scope& z, std::size_t m,
                      double thresholdScale) {
  if (z.size() != m) throw DomainError("candidate scope must have size m");
  const bool skip = 2.0 * thresholdScale * snap.radiusScale() * std::sqrt(18.0 * snap.tau()) >= 1.0;
  return consistentWith(snap, z, m, skip, [&](std::size_t uid, std::size_t zid, Index v, Index vz) {
    const double gap = std::abs(snap.rBar(uid, j, v) - snap.rBar(zid, j, vz));
    return gap > 2.0 * thresholdScale * snap.epsReward(uid, v);
  });
}

void eliminate(ConsistentScopeSets& sets, const EmpiricalSnapshot& snap, std::size_t m,
               const EliminationOptions& options) {
  struct Job {
    bool reward;
    std::size_t factor;
    std::size_t pos;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < sets.transition.size(); ++i)
    if (!sets.transitionPinned[i])
      for (std::size_t p = 0; p < sets.transition[i].size(); ++p) jobs.push_back({false, i, p});
  for (std::size_t j = 0; j < sets.reward.size(); ++j)
    if (!sets.rewardPinned[j])
      for (std::size_t p = 0; p < sets.reward[j].size(); ++p) jobs.push_back({true, j, p});

  std::vector<char> keep(jobs.size(), 1);
  const auto run = [&](std::size_t k) {
    const Job& job = jobs[k];
    keep[k] = job.reward
                  ? rewardConsistent(snap, job.factor, sets.reward[job.factor][job.pos], m, options.thresholdScale)
                  : transitionConsistent(snap, job.factor, sets.transition[job.factor][job.pos], m,
                                         options.thresholdScale);
  };
  const auto count = static_cast<std::ptrdiff_t>(jobs.size());
  if (options.parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < count; ++k) run(static_cast<std::size_t>(k));
  } else {
    for (std::ptrdiff_t k = 0; k < count; ++k) run(static_cast<std::size_t>(k));
  }

  // jobs were generated in set order, so compaction preserves the lexicographic order
  auto next = sets;
  for (auto& s : next.transition) s.clear();
  for (auto& s : next.reward) s.clear();
  for (std::size_t i = 0; i < sets.transition.size(); ++i)
    if (sets.transitionPinned[i]) next.transition[i] = sets.transition[i];
  for (std::size_t j = 0; j < sets.reward.size(); ++j)
    if (sets.rewardPinned[j]) next.reward[j] = sets.reward[j];
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    if (!keep[k]) continue;
    const Job& job = jobs[k];
    if (job.reward)
      next.reward[job.factor].push_back(sets.reward[job.factor][job.pos]);
    else
      next.transition[job.factor].push_back(sets.transition[job.factor][job.pos]);
  }
  for (std::size_t i = 0; i < next.transition.size(); ++i)
    if (next.transition[i].empty())
      throw StructuralFault("every candidate scope of transition factor " + std::to_string(i) +
                            " was eliminated; the confidence event failed or the threshold is too strict");
  for (std::size_t j = 0; j < next.reward.size(); ++j)
    if (next.reward[j].empty())
      throw StructuralFault("every candidate scope of reward factor " + std::to_string(j) +
                            " was eliminated; the confidence event failed or the threshold is too strict");
  sets = std::move(next);
}

}  // namespace fmdp

#include "fmdp/environments.hpp"

#include <algorithm>
#include <bit>
#include <deque>

#include "fmdp/error.hpp"

namespace fmdp {

Fmdp buildSysAdmin(const SysAdminConfig& c) {
  const std::size_t N = c.servers;
  if (N < 2) throw DomainError("SysAdmin needs at least two servers");
  for (double p : {c.failBase, c.failNeighborBoost, c.rebootSuccess, c.spontaneousRecovery})
    if (p < 0.0 || p > 1.0) throw DomainError("SysAdmin probabilities must lie in [0,1]");
  const std::size_t action = N;  // joint index of the action factor

  std::vector<TransitionFactor> trans;
  for (std::size_t i = 0; i < N; ++i) {
    const bool root = c.topology == Topology::Star && i == 0;
    const std::size_t neighbor = c.topology == Topology::Circular ? (i + N - 1) % N : 0;
    const Scope scope = root ? Scope{i, action} : Scope{i, neighbor, action};
    const FactorSpace sub(root ? std::vector<std::size_t>{2, N + 1} : std::vector<std::size_t>{2, 2, N + 1});
    TransitionFactor f{scope, {}};
    for (Index cell = 0; cell < sub.cardinality(); ++cell) {
      const auto v = sub.decode(cell);
      // values follow the sorted scope order
      std::size_t own = 0, other = 1, a = 0;
      if (root) {
        own = v[0];
        a = v[1];
      } else {
        own = i < neighbor ? v[0] : v[1];
        other = i < neighbor ? v[1] : v[0];
        a = v[2];
      }
      double work;
      if (a == i)
        work = c.rebootSuccess;
      else if (own == 1)
        work = 1.0 - std::clamp(c.failBase + c.failNeighborBoost * (other == 0 ? 1.0 : 0.0), 0.0, 1.0);
      else
        work = c.spontaneousRecovery;
      f.table.push_back(1.0 - work);
      f.table.push_back(work);
    }
    trans.push_back(std::move(f));
  }
  std::vector<RewardFactor> rewards;
  for (std::size_t j = 0; j < N; ++j)
    rewards.push_back({Scope{j}, {RewardDistribution::bernoulli(0.0), RewardDistribution::bernoulli(1.0)}});
  return Fmdp(FactorSpace(std::vector<std::size_t>(N, 2)), FactorSpace({N + 1}), std::move(trans),
              std::move(rewards));
}

Index sysAdminAllWorking(const Fmdp& model) { return model.stateCount() - 1; }

// ---------------------------------------------------------------------------
// Lower-bound construction

LowerBoundLayout::LowerBoundLayout(const LowerBoundConfig& c) : d(c.d), W(c.W), m(c.m) {
  if (d < 2 || !std::has_single_bit(d)) throw DomainError("d must be a power of two, at least 2");
  if (m == 0 || m >= d) throw DomainError("require 0 < m < d");
  if (W == 0 || c.actions == 0) throw DomainError("W and the action count must be positive");
  logd = static_cast<std::size_t>(std::countr_zero(d));
  counter = 0;
  locationBase = 1;
  valueBase = locationBase + logd;
  rewardBitBase = valueBase + d;
  std::size_t next = rewardBitBase + d;
  for (std::size_t size = d / 2; size >= 2; size /= 2) {
    treeLayerBase.push_back(next);
    next += size;
  }
  factorCount = next;
}

std::size_t LowerBoundLayout::banditIndex(std::size_t j, const std::vector<std::size_t>& w) const {
  std::size_t idx = j, radix = d;
  for (auto v : w) {
    idx += (v - 1) * radix;
    radix *= W;
  }
  return idx;
}

std::size_t LowerBoundLayout::banditCount() const {
  std::size_t count = d;
  for (std::size_t e = 0; e < m; ++e) count *= W;
  return count;
}

std::size_t LowerBoundLayout::lastPairBase() const {
  return treeLayerBase.empty() ? rewardBitBase : treeLayerBase.back();
}

LowerBoundFmdp buildLowerBoundFmdp(const LowerBoundConfig& config, Rng& rng) {
  const LowerBoundLayout L(config);
  const std::size_t A = config.actions, d = L.d, m = L.m;
  std::vector<double> means = config.means;
  if (means.empty()) {
    means.assign(L.banditCount() * A, 0.5);
    for (std::size_t b = 0; b < L.banditCount(); ++b) means[b * A + rng.below(A)] = std::min(1.0, 0.5 + config.gap);
  }
  if (means.size() != L.banditCount() * A) throw DomainError("bandit mean table has the wrong size");

  std::vector<std::size_t> sizes(L.factorCount, 2);
  sizes[L.counter] = L.blockLength();
  for (std::size_t i = 0; i < d; ++i) sizes[L.valueBase + i] = L.W + 1;
  const FactorSpace states(sizes);
  const std::size_t action = L.factorCount;
  const std::size_t last = L.blockLength() - 1;

  const auto deterministic = [](std::size_t outSize, std::size_t value) {
    std::vector<double> row(outSize, 0.0);
    row[value] = 1.0;
    return row;
  };
  std::vector<TransitionFactor> trans(L.factorCount);
  {
    TransitionFactor f{Scope{L.counter}, {}};
    for (std::size_t c = 0; c < L.blockLength(); ++c) {
      const auto row = deterministic(L.blockLength(), (c + 1) % L.blockLength());
      f.table.insert(f.table.end(), row.begin(), row.end());
    }
    trans[L.counter] = std::move(f);
  }
  for (std::size_t b = 0; b < L.logd; ++b) trans[L.locationBase + b] = {Scope{}, {0.5, 0.5}};

  // value factor i: scope {counter, location bits}
  for (std::size_t i = 0; i < d; ++i) {
    std::vector<std::size_t> idx{L.counter};
    for (std::size_t b = 0; b < L.logd; ++b) idx.push_back(L.locationBase + b);
    TransitionFactor f{Scope(idx), {}};
    const FactorSpace sub = subspace(states, f.scope);
    for (Index cell = 0; cell < sub.cardinality(); ++cell) {
      const auto v = sub.decode(cell);
      std::vector<double> row(L.W + 1, 0.0);
      if (v[0] == 0) {
        // location bits read big-endian as x - 1 in {0..d-1}
        std::size_t x = 0;
        for (std::size_t b = 0; b < L.logd; ++b) x = 2 * x + v[1 + b];
        const std::size_t offset = (i + d - x) % d;
        if (offset < m) {
          for (std::size_t w = 1; w <= L.W; ++w) row[w] = 1.0 / static_cast<double>(L.W);
        } else {
          row[0] = 1.0;
        }
      } else {
        row[0] = 1.0;
      }
      f.table.insert(f.table.end(), row.begin(), row.end());
    }
    trans[L.valueBase + i] = std::move(f);
  }

  // reward bit j: scope {counter, value factors j..j+m-1, action}
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<std::size_t> window;
    for (std::size_t e = 0; e < m; ++e) window.push_back(L.valueBase + (j + e) % d);
    std::vector<std::size_t> idx = window;
    idx.push_back(L.counter);
    idx.push_back(action);
    TransitionFactor f{Scope(idx), {}};
    const FactorSpace joint = [&] {
      std::vector<std::size_t> all(sizes);
      all.push_back(A);
      return FactorSpace(all);
    }();
    const FactorSpace sub = subspace(joint, f.scope);
    std::vector<std::size_t> full(joint.factorCount(), 0);
    for (Index cell = 0; cell < sub.cardinality(); ++cell) {
      const auto v = sub.decode(cell);
      for (std::size_t k = 0; k < f.scope.size(); ++k) full[f.scope[k]] = v[k];
      double one = 0.0;
      if (full[L.counter] == 1) {
        std::vector<std::size_t> w;
        for (auto p : window) w.push_back(full[p]);
        if (std::none_of(w.begin(), w.end(), [](std::size_t x) { return x == 0; }))
          one = means[L.banditIndex(j, w) * A + full[action]];
      }
      f.table.push_back(1.0 - one);
      f.table.push_back(one);
    }
    trans[L.rewardBitBase + j] = std::move(f);
  }

  // OR tree: layer l (1-based) is computed at counter l + 1 from layer l - 1
  std::size_t prevBase = L.rewardBitBase, prevSize = d;
  for (std::size_t l = 0; l < L.treeLayerBase.size(); ++l) {
    const std::size_t base = L.treeLayerBase[l], size = prevSize / 2;
    for (std::size_t q = 0; q < size; ++q) {
      TransitionFactor f{Scope{L.counter, prevBase + 2 * q, prevBase + 2 * q + 1}, {}};
      const FactorSpace sub = subspace(states, f.scope);
      for (Index cell = 0; cell < sub.cardinality(); ++cell) {
        const auto v = sub.decode(cell);
        const std::size_t bit = (v[0] == l + 2) && (v[1] | v[2]) ? 1 : 0;
        f.table.push_back(1.0 - bit);
        f.table.push_back(bit);
      }
      trans[base + q] = std::move(f);
    }
    prevBase = base;
    prevSize = size;
  }

  const std::size_t pair = L.lastPairBase();
  RewardFactor r{Scope{L.counter, pair, pair + 1}, {}};
  const FactorSpace sub = subspace(states, r.scope);
  for (Index cell = 0; cell < sub.cardinality(); ++cell) {
    const auto v = sub.decode(cell);
    r.cells.push_back(RewardDistribution::bernoulli(v[0] == last && (v[1] | v[2]) ? 1.0 : 0.0));
  }

  return {Fmdp(states, FactorSpace({A}), std::move(trans), {std::move(r)}), L, std::move(means)};
}

// ---------------------------------------------------------------------------
// Random planted-structure models

bool isCommunicating(const TabularMdp& mdp) {
  const std::size_t S = mdp.stateCount();
  if (S <= 1) return true;
  std::vector<std::vector<std::uint32_t>> succ(S), pred(S);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < mdp.actionCount(); ++a)
      for (const auto& t : mdp.row(s, a))
        if (t.prob > 0.0) {
          succ[s].push_back(t.next);
          pred[t.next].push_back(static_cast<std::uint32_t>(s));
        }
  // strongly connected iff state 0 reaches everything and everything reaches state 0
  const auto covers = [&](const std::vector<std::vector<std::uint32_t>>& adj) {
    std::vector<bool> seen(S, false);
    std::deque<std::size_t> queue{0};
    seen[0] = true;
    std::size_t count = 1;
    while (!queue.empty()) {
      const auto u = queue.front();
      queue.pop_front();
      for (auto v : adj[u])
        if (!seen[v]) seen[v] = true, ++count, queue.push_back(v);
    }
    return count == S;
  };
  return covers(succ) && covers(pred);
}

RandomFmdp buildRandomFmdp(const RandomFmdpConfig& c) {
  if (c.d == 0 || c.W == 0 || c.m == 0) throw DomainError("d, W and m must be positive");
  std::vector<std::size_t> actionSizes;
  if (c.nonFactoredActions)
    actionSizes = {c.actionCount};
  else {
    if (c.n <= c.d) throw DomainError("need at least one action factor (n > d)");
    actionSizes.assign(c.n - c.d, c.W);
  }
  const FactorSpace states(std::vector<std::size_t>(c.d, c.W));
  const FactorSpace actions(actionSizes);
  const std::size_t n = c.d + actionSizes.size();
  if (c.m > n) throw DomainError("m exceeds the joint factor count");
  const auto candidates = enumerateScopes(n, c.m);
  std::vector<std::size_t> joint(states.sizes().begin(), states.sizes().end());
  joint.insert(joint.end(), actionSizes.begin(), actionSizes.end());
  const FactorSpace X(joint);

  Rng rng(c.seed);
  for (std::size_t attempt = 0; attempt < c.rejectionBudget; ++attempt) {
    RandomFmdp out;
    std::vector<TransitionFactor> trans;
    for (std::size_t i = 0; i < c.d; ++i) {
      const Scope z = candidates[rng.below(candidates.size())];
      const Index cells = subspace(X, z).cardinality();
      TransitionFactor f{z, {}};
      for (Index cell = 0; cell < cells; ++cell) {
        std::vector<double> g(c.W);
        double sum = 0.0;
        for (auto& x : g) sum += (x = rng.gamma(c.concentration));
        for (auto& x : g) x /= sum;
        // fold the rounding residue into the largest entry so the row sums to 1 exactly
        double total = 0.0;
        for (auto x : g) total += x;
        *std::max_element(g.begin(), g.end()) += 1.0 - total;
        f.table.insert(f.table.end(), g.begin(), g.end());
      }
      out.transitionScopes.push_back(z);
      trans.push_back(std::move(f));
    }
    std::vector<RewardFactor> rewards;
    for (std::size_t j = 0; j < c.rewardFactors; ++j) {
      const Scope z = candidates[rng.below(candidates.size())];
      RewardFactor f{z, {}};
      for (Index cell = 0; cell < subspace(X, z).cardinality(); ++cell)
        f.cells.push_back(RewardDistribution::bernoulli(rng.uniform()));
      out.rewardScopes.push_back(z);
      rewards.push_back(std::move(f));
    }
    out.model = Fmdp(states, actions, std::move(trans), std::move(rewards));
    if (isCommunicating(flatten(out.model))) return out;
  }
  throw Error("no communicating model found within the rejection budget");
}

}  // namespace fmdp

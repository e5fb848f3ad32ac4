#include "fmdp/model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "fmdp/error.hpp"

namespace fmdp {

RewardDistribution RewardDistribution::bernoulli(double mean) {
  return RewardDistribution{{0.0, 1.0}, {1.0 - mean, mean}};
}

double RewardDistribution::mean() const {
  double m = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) m += values[k] * probs[k];
  return m;
}

namespace {

FactorSpace concat(const FactorSpace& a, const FactorSpace& b) {
  std::vector<std::size_t> sizes(a.sizes().begin(), a.sizes().end());
  sizes.insert(sizes.end(), b.sizes().begin(), b.sizes().end());
  return FactorSpace(std::move(sizes));
}

}  // namespace

Fmdp::Fmdp(FactorSpace states, FactorSpace actions, std::vector<TransitionFactor> transitions,
           std::vector<RewardFactor> rewards)
    : states_(std::move(states)),
      actions_(std::move(actions)),
      joint_(concat(states_, actions_)),
      transitions_(std::move(transitions)),
      rewards_(std::move(rewards)) {
  if (transitions_.size() != states_.factorCount())
    throw DomainError("need one transition factor per state factor");
  for (std::size_t i = 0; i < transitions_.size(); ++i) {
    const auto& f = transitions_[i];
    transProj_.emplace_back(joint_, f.scope);
    const Index cells = transProj_.back().cellCount();
    const std::size_t w = states_.size(i);
    if (f.table.size() != cells * w)
      throw DomainError("transition table " + std::to_string(i) + " has wrong size");
    for (Index c = 0; c < cells; ++c) {
      double sum = 0.0;
      for (std::size_t k = 0; k < w; ++k) {
        const double p = f.table[c * w + k];
        if (!(p >= 0.0) || p > 1.0 + 1e-12)
          throw DomainError("transition probability outside [0,1]");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw DomainError("transition row of factor " + std::to_string(i) + " sums to " +
                          std::to_string(sum));
    }
  }
  for (std::size_t j = 0; j < rewards_.size(); ++j) {
    const auto& f = rewards_[j];
    rewardProj_.emplace_back(joint_, f.scope);
    if (f.cells.size() != rewardProj_.back().cellCount())
      throw DomainError("reward table " + std::to_string(j) + " has wrong size");
    std::vector<double> means;
    means.reserve(f.cells.size());
    for (const auto& dist : f.cells) {
      if (dist.values.size() != dist.probs.size()) throw DomainError("malformed reward distribution");
      double sum = 0.0;
      for (std::size_t k = 0; k < dist.values.size(); ++k) {
        if (dist.values[k] < 0.0 || dist.values[k] > 1.0)
          throw DomainError("reward value outside [0,1]");
        if (dist.probs[k] < 0.0) throw DomainError("negative reward probability");
        sum += dist.probs[k];
      }
      if (std::abs(sum - 1.0) > 1e-12) throw DomainError("reward distribution does not sum to 1");
      means.push_back(dist.mean());
    }
    rewardMeans_.push_back(std::move(means));
  }
}

double Fmdp::meanReward(Index state, Index action) const {
  if (rewards_.empty()) return 0.0;
  const Index x = jointIndex(state, action);
  double total = 0.0;
  for (std::size_t j = 0; j < rewards_.size(); ++j) total += rewardMeans_[j][rewardProj_[j](x)];
  return total / static_cast<double>(rewards_.size());
}

std::size_t Fmdp::maxScopeSize() const {
  std::size_t m = 0;
  for (const auto& f : transitions_) m = std::max(m, f.scope.size());
  for (const auto& f : rewards_) m = std::max(m, f.scope.size());
  return m;
}

double StepRecord::reward() const {
  if (rewardFactors.empty()) return 0.0;
  return std::accumulate(rewardFactors.begin(), rewardFactors.end(), 0.0) /
         static_cast<double>(rewardFactors.size());
}

StepRecord sampleStep(const Fmdp& model, Index state, Index action, Rng& rng,
                      std::uint64_t time) {
  if (state >= model.stateCount() || action >= model.actionCount())
    throw DomainError("state or action index out of range");
  StepRecord rec;
  rec.state = state;
  rec.action = action;
  rec.time = time;
  const Index x = model.jointIndex(state, action);
  const auto& S = model.stateSpace();
  Index next = 0;
  for (std::size_t i = 0; i < model.stateFactorCount(); ++i) {
    const auto row = model.transitionRow(i, model.transitionProjector(i)(x));
    next += rng.categorical(row) * S.stride(i);
  }
  rec.nextState = next;
  rec.rewardFactors.resize(model.rewardFactorCount());
  for (std::size_t j = 0; j < model.rewardFactorCount(); ++j) {
    const auto& dist = model.reward(j).cells[model.rewardProjector(j)(x)];
    rec.rewardFactors[j] = dist.values[rng.categorical(dist.probs)];
  }
  return rec;
}

StepRecord Simulator::step(Index action) {
  auto rec = sampleStep(*model_, state_, action, rng_, time_);
  state_ = rec.nextState;
  ++time_;
  return rec;
}

TabularMdp::TabularMdp(std::size_t states, std::size_t actions)
    : states_(states), actions_(actions) {
  start_.reserve(states * actions + 1);
  reward_.reserve(states * actions);
}

TabularMdp TabularMdp::fromDense(std::size_t states, std::size_t actions,
                                 std::span<const double> P, std::span<const double> r) {
  if (P.size() != states * actions * states || r.size() != states * actions)
    throw DomainError("dense MDP arrays have wrong size");
  TabularMdp mdp(states, actions);
  std::vector<Transition> row;
  for (std::size_t s = 0; s < states; ++s) {
    for (std::size_t a = 0; a < actions; ++a) {
      row.clear();
      for (std::size_t n = 0; n < states; ++n) {
        const double p = P[(s * actions + a) * states + n];
        if (p > 0.0) row.push_back({static_cast<std::uint32_t>(n), p});
      }
      mdp.appendRow(row, r[s * actions + a]);
    }
  }
  return mdp;
}

void TabularMdp::appendRow(std::span<const Transition> row, double reward) {
  if (complete()) throw DomainError("tabular MDP already complete");
  entries_.insert(entries_.end(), row.begin(), row.end());
  start_.push_back(entries_.size());
  reward_.push_back(reward);
}

double TabularMdp::probability(std::size_t s, std::size_t a, std::size_t next) const {
  double p = 0.0;
  for (const auto& t : row(s, a))
    if (t.next == next) p += t.prob;
  return p;
}

namespace {

/// Sparse product distribution over full next-state indices for joint index x.
void productRow(const Fmdp& model, Index x, std::vector<std::pair<Index, double>>& out,
                std::vector<std::pair<Index, double>>& scratch) {
  const auto& S = model.stateSpace();
  out.assign(1, {0, 1.0});
  for (std::size_t i = 0; i < model.stateFactorCount(); ++i) {
    const auto row = model.transitionRow(i, model.transitionProjector(i)(x));
    scratch.clear();
    for (const auto& [idx, p] : out)
      for (std::size_t w = 0; w < row.size(); ++w)
        if (row[w] > 0.0) scratch.emplace_back(idx + w * S.stride(i), p * row[w]);
    out.swap(scratch);
  }
}

}  // namespace

TabularMdp flatten(const Fmdp& model, Index cap) {
  const Index S = model.stateCount(), A = model.actionCount();
  if (S * A > cap) throw SizeError("flattened model exceeds the |S||A| cap");
  TabularMdp mdp(S, A);
  std::vector<std::pair<Index, double>> prod, scratch;
  std::vector<Transition> row;
  for (Index s = 0; s < S; ++s) {
    for (Index a = 0; a < A; ++a) {
      productRow(model, model.jointIndex(s, a), prod, scratch);
      row.clear();
      for (const auto& [idx, p] : prod) row.push_back({static_cast<std::uint32_t>(idx), p});
      std::sort(row.begin(), row.end(), [](auto& l, auto& r) { return l.next < r.next; });
      mdp.appendRow(row, model.meanReward(s, a));
    }
  }
  return mdp;
}

Index ReachableMdp::compactIndexOf(Index state) const {
  for (std::size_t k = 0; k < stateIds.size(); ++k)
    if (stateIds[k] == state) return k;
  throw DomainError("state not reachable");
}

ReachableMdp flattenReachable(const Fmdp& model, std::span<const Index> starts, Index cap) {
  const Index A = model.actionCount();
  std::unordered_map<Index, std::uint32_t> compact;
  std::vector<Index> ids;
  auto intern = [&](Index full) {
    auto [it, inserted] = compact.try_emplace(full, static_cast<std::uint32_t>(ids.size()));
    if (inserted) {
      ids.push_back(full);
      if (static_cast<Index>(ids.size()) * A > cap)
        throw SizeError("reachable model exceeds the |S||A| cap");
    }
    return it->second;
  };
  for (auto s : starts) {
    if (s >= model.stateCount()) throw DomainError("start state out of range");
    intern(s);
  }
  // rows are built in discovery order, which is exactly the compact order
  std::vector<std::vector<Transition>> rows;
  std::vector<double> rewards;
  std::vector<std::pair<Index, double>> prod, scratch;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const Index s = ids[k];
    for (Index a = 0; a < A; ++a) {
      productRow(model, model.jointIndex(s, a), prod, scratch);
      std::vector<Transition> row;
      for (const auto& [idx, p] : prod) row.push_back({intern(idx), p});
      std::sort(row.begin(), row.end(), [](auto& l, auto& r) { return l.next < r.next; });
      rows.push_back(std::move(row));
      rewards.push_back(model.meanReward(s, a));
    }
  }
  ReachableMdp out{TabularMdp(ids.size(), A), std::move(ids)};
  for (std::size_t k = 0; k < rows.size(); ++k) out.mdp.appendRow(rows[k], rewards[k]);
  return out;
}

double diameter(const TabularMdp& mdp, double tolerance, double bound) {
  const std::size_t S = mdp.stateCount(), A = mdp.actionCount();
  if (S > 64) throw SizeError("diameter is limited to 64 states");
  if (S <= 1) return 0.0;
  // reverse reachability: every state must reach every target under some action sequence
  std::vector<std::vector<std::size_t>> preds(S);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a)
      for (const auto& t : mdp.row(s, a))
        if (t.prob > 0.0) preds[t.next].push_back(s);
  for (std::size_t target = 0; target < S; ++target) {
    std::vector<bool> seen(S, false);
    std::deque<std::size_t> queue{target};
    seen[target] = true;
    std::size_t count = 1;
    while (!queue.empty()) {
      const auto v = queue.front();
      queue.pop_front();
      for (auto u : preds[v])
        if (!seen[u]) {
          seen[u] = true;
          ++count;
          queue.push_back(u);
        }
    }
    if (count < S)
      throw DiameterInfiniteError("state " + std::to_string(target) + " is unreachable");
  }
  double D = 0.0;
  std::vector<double> T(S), next(S);
  for (std::size_t target = 0; target < S; ++target) {
    std::fill(T.begin(), T.end(), 0.0);
    for (;;) {
      double change = 0.0;
      for (std::size_t s = 0; s < S; ++s) {
        if (s == target) {
          next[s] = 0.0;
          continue;
        }
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < A; ++a) {
          double v = 1.0;
          for (const auto& t : mdp.row(s, a)) v += t.prob * T[t.next];
          best = std::min(best, v);
        }
        next[s] = best;
        change = std::max(change, std::abs(best - T[s]));
      }
      T.swap(next);
      if (*std::max_element(T.begin(), T.end()) > bound)
        throw DiameterInfiniteError("hitting time exceeds bound");
      if (change <= tolerance) break;
    }
    D = std::max(D, *std::max_element(T.begin(), T.end()));
  }
  return D;
}

}  // namespace fmdp

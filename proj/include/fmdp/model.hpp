#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fmdp/factor_space.hpp"
#include "fmdp/random.hpp"

namespace fmdp {

/// Discrete distribution supported on [0, 1].
struct RewardDistribution {
  std::vector<double> values;
  std::vector<double> probs;

  static RewardDistribution bernoulli(double mean);
  double mean() const;
};

/// P_i(. | x[scope]) stored row-major: one row of |S_i| probabilities per cell of X[scope].
struct TransitionFactor {
  Scope scope;
  std::vector<double> table;
};

/// R_j(x[scope]) with one distribution per cell of X[scope].
struct RewardFactor {
  Scope scope;
  std::vector<RewardDistribution> cells;
};

/// A factored MDP. The joint space X lists the state factors first, then the action factors,
/// so a joint index is `state + action * |S|`.
class Fmdp {
 public:
  Fmdp() = default;
  Fmdp(FactorSpace states, FactorSpace actions, std::vector<TransitionFactor> transitions,
       std::vector<RewardFactor> rewards);

  const FactorSpace& stateSpace() const { return states_; }
  const FactorSpace& actionSpace() const { return actions_; }
  const FactorSpace& jointSpace() const { return joint_; }
  std::size_t stateFactorCount() const { return states_.factorCount(); }
  std::size_t jointFactorCount() const { return joint_.factorCount(); }
  std::size_t rewardFactorCount() const { return rewards_.size(); }
  Index stateCount() const { return states_.cardinality(); }
  Index actionCount() const { return actions_.cardinality(); }
  Index jointIndex(Index state, Index action) const { return state + action * stateCount(); }

  const TransitionFactor& transition(std::size_t i) const { return transitions_[i]; }
  const RewardFactor& reward(std::size_t j) const { return rewards_[j]; }
  const ScopeProjector& transitionProjector(std::size_t i) const { return transProj_[i]; }
  const ScopeProjector& rewardProjector(std::size_t j) const { return rewardProj_[j]; }

  std::span<const double> transitionRow(std::size_t i, Index cell) const {
    const std::size_t w = states_.size(i);
    return {transitions_[i].table.data() + cell * w, w};
  }
  double rewardMean(std::size_t j, Index cell) const { return rewardMeans_[j][cell]; }
  /// r(s, a) = mean over reward factors of their means.
  double meanReward(Index state, Index action) const;
  std::size_t maxScopeSize() const;

 private:
  FactorSpace states_, actions_, joint_;
  std::vector<TransitionFactor> transitions_;
  std::vector<RewardFactor> rewards_;
  std::vector<ScopeProjector> transProj_, rewardProj_;
  std::vector<std::vector<double>> rewardMeans_;
};

struct StepRecord {
  Index state = 0;
  Index action = 0;
  std::vector<double> rewardFactors;
  Index nextState = 0;
  std::uint64_t time = 1;

  double reward() const;
};

/// Draws s' factor by factor and every reward factor from its distribution.
StepRecord sampleStep(const Fmdp& model, Index state, Index action, Rng& rng,
                      std::uint64_t time = 1);

struct Transition {
  std::uint32_t next;
  double prob;
};

/// Flat MDP with sparse transition rows.
class TabularMdp {
 public:
  TabularMdp() = default;
  TabularMdp(std::size_t states, std::size_t actions);
  /// Dense constructor: P indexed [s][a][s'], r indexed [s][a].
  static TabularMdp fromDense(std::size_t states, std::size_t actions,
                              std::span<const double> P, std::span<const double> r);

  std::size_t stateCount() const { return states_; }
  std::size_t actionCount() const { return actions_; }
  std::span<const Transition> row(std::size_t s, std::size_t a) const {
    const auto k = s * actions_ + a;
    return {entries_.data() + start_[k], start_[k + 1] - start_[k]};
  }
  double reward(std::size_t s, std::size_t a) const { return reward_[s * actions_ + a]; }
  double probability(std::size_t s, std::size_t a, std::size_t next) const;

  /// Rows must be appended in (s, a) order.
  void appendRow(std::span<const Transition> row, double reward);
  bool complete() const { return start_.size() == states_ * actions_ + 1; }

 private:
  std::size_t states_ = 0, actions_ = 0;
  std::vector<std::size_t> start_{0};
  std::vector<Transition> entries_;
  std::vector<double> reward_;
};

constexpr Index kDefaultFlattenCap = Index{1} << 22;

/// Tabular form of a factored model: P(s'|s,a) = prod_i P_i(s'[i] | x[Z_i]).
TabularMdp flatten(const Fmdp& model, Index cap = kDefaultFlattenCap);

struct ReachableMdp {
  TabularMdp mdp;
  std::vector<Index> stateIds;  ///< compact index -> full state index
  Index compactIndexOf(Index state) const;
};

/// Flattens only the states reachable from `starts` (breadth first, start states first).
ReachableMdp flattenReachable(const Fmdp& model, std::span<const Index> starts,
                              Index cap = kDefaultFlattenCap);

/// Max over ordered state pairs of the minimal expected hitting time.
double diameter(const TabularMdp& mdp, double tolerance = 1e-6, double bound = 1e6);

/// Stateful simulator around a factored model.
class Simulator {
 public:
  Simulator(const Fmdp& model, Index initialState, std::uint64_t seed)
      : model_(&model), state_(initialState), rng_(seed) {}

  Index state() const { return state_; }
  std::uint64_t time() const { return time_; }
  StepRecord step(Index action);

 private:
  const Fmdp* model_;
  Index state_;
  std::uint64_t time_ = 1;
  Rng rng_;
};

}  // namespace fmdp

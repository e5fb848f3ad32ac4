#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fmdp/estimator.hpp"
#include "fmdp/model.hpp"
#include "fmdp/planner.hpp"
#include "fmdp/structure.hpp"

namespace fmdp {

/// Pbar - Wc entrywise with the removed mass added at `direction`, for the snapshot cell
/// (scope, cell). An unvisited cell yields the point mass on `direction`.
void optimisticFactorTransition(const EmpiricalSnapshot& snap, std::size_t i, std::size_t scope,
                                Index cell, std::size_t direction, std::span<double> out);

/// min{1, rBar + eps} for reward factor j at the snapshot cell (scope, cell).
double optimisticReward(const EmpiricalSnapshot& snap, std::size_t j, std::size_t scope, Index cell);

struct TildeOptions {
  /// Cap on evaluated extended actions per state after pruning dominated options.
  std::uint64_t cap = 10'000'000;
  /// Use the argmax-h state as the direction for every factor instead of searching.
  bool greedyDirection = false;
};

/// The implicit optimistic model over S with extended actions (a, s', Z_1..Z_d, z_1..z_ell).
/// Extended action ids are mixed radix, least significant first: a, s', then the index of
/// each Z_i inside its consistent set, then each z_j.
class TildeModelView final : public OptimisticModelView {
 public:
  struct Decoded {
    Index action = 0;
    Index direction = 0;
    std::vector<std::size_t> transitionScope;  ///< positions within sets.transition[i]
    std::vector<std::size_t> rewardScope;      ///< positions within sets.reward[j]
  };

  /// `snap` and `sets` must outlive the view.
  TildeModelView(const EmpiricalSnapshot& snap, const ConsistentScopeSets& sets,
                 const FactorSpace& states, const FactorSpace& actions, TildeOptions options = {});

  std::size_t stateCount() const override { return static_cast<std::size_t>(states_.cardinality()); }
  std::uint64_t extendedActionCount(std::size_t s) const override;
  double reward(std::size_t s, std::uint64_t ext) const override;
  void distribution(std::size_t s, std::uint64_t ext, std::span<const double> h,
                    std::span<double> out) const override;
  /// Exact maximization without enumerating: rewards split per reward factor, and for each
  /// action only the extreme optimistic rows of each transition factor are combined.
  Backup backup(std::size_t s, std::span<const double> h) const override;

  /// Best value reward + p·h over extended actions whose first component is `action`.
  Backup actionValue(std::size_t s, Index action, std::span<const double> h) const;

  Decoded decode(std::uint64_t ext) const;
  std::uint64_t encode(const Decoded& d) const;

 private:
  struct Option {
    std::size_t scope;      // position in the consistent set
    std::size_t direction;
    std::size_t rowOffset;  // into rows_
  };
  struct Cell {
    double reward;                            // mean over j of the best optimistic reward
    std::vector<std::size_t> rewardChoice;    // argmax position per reward factor
    std::vector<std::vector<Option>> all;     // every (scope, direction) per factor
    std::vector<std::vector<Option>> extreme; // the ones that can attain a maximum
  };

  const Cell& cell(std::size_t s, Index a) const { return cells_[s * actions_.cardinality() + a]; }
  Backup combine(std::size_t s, Index a, const std::vector<std::vector<const Option*>>& opts,
                 std::span<const double> h) const;

  const EmpiricalSnapshot* snap_;
  const ConsistentScopeSets* sets_;
  FactorSpace states_, actions_;
  TildeOptions options_;
  std::vector<std::vector<std::size_t>> transScopeIds_, rewardScopeIds_;  // snapshot scope ids
  std::vector<double> rows_;
  std::vector<Cell> cells_;
};

/// The explicit factored optimistic model: every original step is stretched over
/// 2 + ceil(log2 n) steps during which binary-tree work spaces pull out the values selected by
/// the chosen scopes, so every transition scope has at most m + 3 factors.
struct HatModel {
  Fmdp model;
  std::size_t stretch = 0;        ///< 2 + ceil(log2 n)
  std::size_t levels = 0;         ///< ceil(log2 n)
  std::size_t counterFactor = 0;  ///< index of the counter among the state factors
  std::size_t originalStateFactors = 0;
  std::size_t originalActionFactors = 0;
  FactorSpace originalActions;

  /// Hat state (s, counter 0, every auxiliary factor 0).
  Index startState(Index s) const;
  /// The original action inside a hat action.
  Index originalAction(Index hatAction) const;
  /// Original state from a hat state (first d factors).
  Index originalState(Index hatState) const;
};

HatModel buildHatModel(const EmpiricalSnapshot& snap, const ConsistentScopeSets& sets,
                       const FactorSpace& states, const FactorSpace& actions);

/// Largest transition scope and largest reward scope of a model.
std::size_t maxTransitionScopeSize(const Fmdp& model);
std::size_t maxRewardScopeSize(const Fmdp& model);

/// Stretched models for a single non-factored action: each original step takes d + 2 steps.
/// State factors: s_0..s_{d-1}, counter (0..d+1), stored action, w_0..w_{d-1}, validation bit.
struct NfaModel {
  Fmdp model;
  std::size_t stretch = 0;  ///< d + 2
  std::size_t d = 0;
  Index originalActions = 0;

  std::size_t counterFactor() const { return d; }
  std::size_t bitFactor() const { return 2 * d + 2; }
  /// (s, counter 0, stored action 0, w = 0, bit 1).
  Index startState(Index s) const;
  Index originalState(Index stretchedState) const;
};

/// Known structure for the non-factored setting: scopes over X = S x A that include the action
/// factor (index d).
struct KnownScopes {
  std::vector<Scope> transition;
  std::vector<Scope> reward;

  /// The true scopes of a model, each widened by the action factor.
  static KnownScopes of(const Fmdp& model);
  std::vector<Scope> family() const;
};

/// Optimistic stretched model: at counter 0 the action is stored and pays the optimistic reward;
/// at counter i+1 the action is read as the direction for factor i. Actions outside the legal
/// range for the current counter clear the validation bit, which withholds the next reward.
NfaModel buildNfaOptimistic(const EmpiricalSnapshot& snap, const KnownScopes& known,
                            const FactorSpace& states, Index actionCount);

/// The same stretched process with the true dynamics and rewards; its gain is lambda*/(d + 2).
NfaModel buildMPrime(const Fmdp& model);

}  // namespace fmdp

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "fmdp/estimator.hpp"
#include "fmdp/factor_space.hpp"

namespace fmdp {

/// Surviving candidate scopes (all of size m) per transition factor and per reward factor.
struct ConsistentScopeSets {
  std::vector<std::vector<Scope>> transition;
  std::vector<std::vector<Scope>> reward;
  std::vector<bool> transitionPinned;
  std::vector<bool> rewardPinned;

  /// Every size-m scope over n joint factors, for d transition and ell reward factors.
  static ConsistentScopeSets initial(std::size_t n, std::size_t m, std::size_t d, std::size_t ell);

  /// Replaces a set with the single known scope; elimination then skips it.
  void pinTransition(std::size_t i, const Scope& z);
  void pinReward(std::size_t j, const Scope& z);

  /// True iff every set here is a subset of the matching set in `before`.
  bool subsetOf(const ConsistentScopeSets& before) const;
  /// Number of scopes in 𝒵_i that do not contain `truth`.
  static std::size_t wrongCount(const std::vector<Scope>& set, const Scope& truth);
};

struct EliminationOptions {
  /// Multiplier on the 2·eps threshold (1 = the stated test; 0.1 = ten times stricter).
  double thresholdScale = 1.0;
  bool parallel = true;
};

/// |Pbar_{i,Z∪Z'}(w|v) - Pbar_{i,Z}(w|v[Z])| <= 2 eps_{i,Z∪Z'}(w|v) for every size-m Z', v, w.
/// The snapshot must track Z and all its unions with size-m scopes.
bool transitionConsistent(const EmpiricalSnapshot& snap, std::size_t i, const Scope& z, std::size_t m,
                          double thresholdScale = 1.0);

/// The reward analogue with the Hoeffding radius eps_{Z∪Z'}(v).
bool rewardConsistent(const EmpiricalSnapshot& snap, std::size_t j, const Scope& z, std::size_t m,
                      double thresholdScale = 1.0);

/// Removes every inconsistent scope from the unpinned sets, checking (factor, scope) pairs in
/// lexicographic order. Throws StructuralFault naming the factor if a set empties.
void eliminate(ConsistentScopeSets& sets, const EmpiricalSnapshot& snap, std::size_t m,
               const EliminationOptions& options = {});

}  // namespace fmdp

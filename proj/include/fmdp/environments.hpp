#pragma once

#include <cstdint>
#include <vector>

#include "fmdp/model.hpp"

namespace fmdp {

enum class Topology { Circular, Star };

struct SysAdminConfig {
  Topology topology = Topology::Circular;
  std::size_t servers = 4;
  double failBase = 0.05;
  double failNeighborBoost = 0.3;
  double rebootSuccess = 0.95;
  double spontaneousRecovery = 0.0;
};

/// N binary status factors (1 = working) and one action factor of size N + 1 (reboot i, or
/// idle = N). Reward factor j is the status of server j.
Fmdp buildSysAdmin(const SysAdminConfig& config);

/// The state in which every server works.
Index sysAdminAllWorking(const Fmdp& model);

struct LowerBoundConfig {
  std::size_t d = 4;  ///< power of two
  std::size_t W = 2;
  std::size_t m = 1;
  std::size_t actions = 4;
  /// Bernoulli means indexed (bandit, arm) where bandit = j + d * (w_1 - 1) + d W (w_2 - 1) ...;
  /// empty means one uniformly drawn arm per bandit at 0.5 + gap and the rest at 0.5.
  std::vector<double> means;
  double gap = 0.1;
};

/// Layout of the lower-bound model's state factors.
struct LowerBoundLayout {
  std::size_t d = 0, W = 0, m = 0, logd = 0;
  std::size_t counter = 0;
  std::size_t locationBase = 0;
  std::size_t valueBase = 0;
  std::size_t rewardBitBase = 0;
  std::vector<std::size_t> treeLayerBase;  ///< layers of size d/2, d/4, ..., 2
  std::size_t factorCount = 0;

  explicit LowerBoundLayout(const LowerBoundConfig& c);
  std::size_t blockLength() const { return logd + 2; }
  /// Index of the bandit (j, w_1..w_m) with w values in 1..W.
  std::size_t banditIndex(std::size_t j, const std::vector<std::size_t>& w) const;
  std::size_t banditCount() const;
  /// The two factors read by the reward.
  std::size_t lastPairBase() const;
};

struct LowerBoundFmdp {
  Fmdp model;
  LowerBoundLayout layout;
  std::vector<double> means;
};

/// Counter, location bits, value factors, reward bits and an OR tree. Each block of
/// log2 d + 2 steps presents one bandit; the reward is 1 only at counter log2 d + 1 if that
/// bandit paid.
LowerBoundFmdp buildLowerBoundFmdp(const LowerBoundConfig& config, Rng& rng);

struct RandomFmdpConfig {
  std::size_t d = 3;
  std::size_t n = 4;        ///< joint factor count (ignored with nonFactoredActions)
  std::size_t m = 1;
  std::size_t W = 2;
  std::size_t rewardFactors = 1;
  std::uint64_t seed = 0;
  double concentration = 1.0;
  /// Use one action factor of size actionCount instead of n - d factors of size W.
  bool nonFactoredActions = false;
  std::size_t actionCount = 2;
  std::size_t rejectionBudget = 100;
};

struct RandomFmdp {
  Fmdp model;
  std::vector<Scope> transitionScopes;
  std::vector<Scope> rewardScopes;
};

/// Planted size-m scopes, Dirichlet transition rows and uniform Bernoulli reward means.
/// Resamples until the flattened model is communicating.
RandomFmdp buildRandomFmdp(const RandomFmdpConfig& config);

/// Every state reaches every other state under some policy.
bool isCommunicating(const TabularMdp& mdp);

}  // namespace fmdp

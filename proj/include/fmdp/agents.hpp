#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fmdp/model.hpp"
#include "fmdp/planner.hpp"
#include "fmdp/structure.hpp"

namespace fmdp {

enum class Algorithm { SlfUcrl, FactoredUcrl, Ucrl2, NfaDorl };

std::string algorithmName(Algorithm a);
Algorithm parseAlgorithm(const std::string& name);

struct AgentConfig {
  Algorithm algorithm = Algorithm::SlfUcrl;
  double delta = 0.01;
  std::size_t m = 1;
  /// Multiplier on every confidence radius used for optimism (0 collapses to the estimates).
  double radiusScale = 1.0;
  /// Multiplier on the 2·eps elimination threshold.
  double eliminationScale = 1.0;
  /// Known scopes (any size <= m; padded to m with the lowest missing factors).
  std::vector<std::optional<Scope>> transitionPins;
  std::vector<std::optional<Scope>> rewardPins;
  double eviTolerance = 1e-4;
  std::uint64_t eviMaxIterations = 100000;
  std::uint64_t enumerationCap = 10'000'000;
  bool greedyDirection = false;
  bool parallel = true;
  /// Per-episode checks against the true model (concentration, optimism, survival).
  bool audit = true;
};

struct EpisodeLog {
  std::uint64_t k = 0;
  std::uint64_t start = 0;   ///< t_k
  std::uint64_t length = 0;
  double gain = 0.0;         ///< optimistic gain lambda^k (times the stretch for stretched models)
  double biasSpan = 0.0;
  std::vector<std::size_t> transitionSetSizes;
  std::vector<std::size_t> rewardSetSizes;
  std::vector<std::size_t> wrongScopes;  ///< per transition factor: members not containing the true scope
  double wallSeconds = 0.0;
  // audit columns (true when not applicable)
  bool concentration = true;
  bool trueScopesSurvive = true;
  bool optimistic = true;
  bool setsMonotone = true;
  bool countersConsistent = true;
};

struct StepLog {
  Index state = 0;
  Index action = 0;
  double reward = 0.0;
};

struct RunResult {
  Algorithm algorithm = Algorithm::SlfUcrl;
  std::uint64_t seed = 0;
  std::vector<StepLog> steps;
  std::vector<EpisodeLog> episodes;
  double lambdaStar = std::numeric_limits<double>::quiet_NaN();
  /// Sum over tracked cells (per-(s,a) cells for UCRL2) used in the episode-count bound.
  Index trackedCells = 0;

  double episodeBound(std::uint64_t T) const;
  bool episodeBoundHolds() const;
};

/// Pads the configured pins to size m and applies them.
ConsistentScopeSets initialSets(const Fmdp& env, const AgentConfig& config);

/// Learns consistent scopes while acting optimistically; `lambdaStar` (may be NaN) feeds the
/// optimism audit.
RunResult slfUcrlRun(const Fmdp& env, Index initialState, const AgentConfig& config, std::uint64_t T,
                     std::uint64_t seed, double lambdaStar = std::numeric_limits<double>::quiet_NaN());

/// Known structure: every set pinned to the true scope and elimination off.
RunResult factoredUcrlRun(const Fmdp& env, Index initialState, const AgentConfig& config, std::uint64_t T,
                          std::uint64_t seed, double lambdaStar = std::numeric_limits<double>::quiet_NaN());

/// Flat UCRL2 on the tabular process.
RunResult ucrl2Run(const Fmdp& env, Index initialState, const AgentConfig& config, std::uint64_t T,
                   std::uint64_t seed, double lambdaStar = std::numeric_limits<double>::quiet_NaN());

/// Known structure with a single non-factored action, planning in the stretched model.
RunResult nfaDorlRun(const Fmdp& env, Index initialState, const AgentConfig& config, std::uint64_t T,
                     std::uint64_t seed, double lambdaStar = std::numeric_limits<double>::quiet_NaN());

/// Dispatches on config.algorithm.
RunResult runAgent(const Fmdp& env, Index initialState, const AgentConfig& config, std::uint64_t T,
                   std::uint64_t seed, double lambdaStar = std::numeric_limits<double>::quiet_NaN());

/// Optimal gain of the true model: EVI on the flattened model, with brute force as fallback.
double optimalGain(const Fmdp& env, double tolerance = 1e-6);

/// Optimistic view for UCRL2: per (s, a) the L1 ball around the empirical row, maximized by
/// shifting mass toward the best state.
class Ucrl2View final : public OptimisticModelView {
 public:
  Ucrl2View(std::size_t states, std::size_t actions, std::vector<double> pHat, std::vector<double> rewards,
            std::vector<double> radius);

  std::size_t stateCount() const override { return S_; }
  std::uint64_t extendedActionCount(std::size_t) const override { return A_; }
  double reward(std::size_t s, std::uint64_t a) const override { return rewards_[s * A_ + a]; }
  void distribution(std::size_t s, std::uint64_t a, std::span<const double> h, std::span<double> out) const override;
  Backup backup(std::size_t s, std::span<const double> h) const override;

 private:
  void inner(std::size_t s, std::size_t a, std::span<const std::size_t> order, std::span<double> out) const;

  std::size_t S_, A_;
  std::vector<double> pHat_, rewards_, radius_;
};

}  // namespace fmdp

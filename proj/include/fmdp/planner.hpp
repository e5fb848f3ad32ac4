#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "fmdp/model.hpp"

namespace fmdp {

/// What extended value iteration needs from a model: per state, a finite set of extended actions,
/// each with a reward in [0,1] and a next-state distribution.
class OptimisticModelView {
 public:
  struct Backup {
    double value = 0.0;
    std::uint64_t action = 0;
  };

  virtual ~OptimisticModelView() = default;

  virtual std::size_t stateCount() const = 0;
  virtual std::uint64_t extendedActionCount(std::size_t s) const = 0;
  virtual double reward(std::size_t s, std::uint64_t ext) const = 0;
  /// Writes the dense next-state distribution. `h` is only consulted by views whose
  /// transition is itself chosen by an inner maximization (UCRL2 L1 balls).
  virtual void distribution(std::size_t s, std::uint64_t ext, std::span<const double> h,
                            std::span<double> out) const = 0;

  /// max over extended actions of reward + p·h, lowest action index on ties. The default
  /// enumerates; views override it with something faster when they can.
  virtual Backup backup(std::size_t s, std::span<const double> h) const;
};

/// Plain tabular model seen as a view with no uncertainty.
class TabularView final : public OptimisticModelView {
 public:
  explicit TabularView(const TabularMdp& mdp) : mdp_(&mdp) {}

  std::size_t stateCount() const override { return mdp_->stateCount(); }
  std::uint64_t extendedActionCount(std::size_t) const override { return mdp_->actionCount(); }
  double reward(std::size_t s, std::uint64_t a) const override { return mdp_->reward(s, a); }
  void distribution(std::size_t s, std::uint64_t a, std::span<const double> h,
                    std::span<double> out) const override;
  Backup backup(std::size_t s, std::span<const double> h) const override;

 private:
  const TabularMdp* mdp_;
};

enum class Damping {
  Auto,    ///< plain updates, restarting with 0.5 damping if they stall (periodic chains)
  Never,
  Always,
};

struct EviOptions {
  double tolerance = 1e-4;
  std::uint64_t maxIterations = 100000;
  Damping damping = Damping::Auto;
  /// Plain iterations allowed before Auto switches to damping.
  std::uint64_t plainBudget = 1000;
  bool parallel = true;
  /// Optional CSV trace: iteration, span, gain estimate.
  std::ostream* trace = nullptr;
};

struct EviResult {
  double gain = 0.0;
  std::vector<double> bias;             ///< min h = 0
  std::vector<std::uint64_t> policy;    ///< greedy extended action per state
  std::uint64_t iterations = 0;
  double span = 0.0;                    ///< span of the last increment
  double biasSpan = 0.0;                ///< max h - min h
  bool damped = false;
};

/// Extended value iteration with span stopping. With damping tau the update is
/// h' = tau·T(h) + (1 - tau)·h, which solves the aperiodic transform r' = tau r,
/// P' = tau P + (1 - tau) I; it has the same optimal policies and gain tau·lambda.
EviResult eviSolve(const OptimisticModelView& view, const EviOptions& options = {});

/// Gain of a deterministic stationary policy from the uniform initial distribution, via power
/// iteration on the policy chain to 1e-10 (damped with 0.5 I + 0.5 P if it oscillates).
double policyGain(const TabularMdp& mdp, std::span<const std::size_t> policy);

struct BruteForceResult {
  double gain = 0.0;
  std::vector<std::size_t> policy;
};

/// Max gain over all |A|^|S| deterministic stationary policies (cap 1e7), lowest policy
/// index on ties.
BruteForceResult exactGainBruteForce(const TabularMdp& mdp, bool parallel = true);

}  // namespace fmdp

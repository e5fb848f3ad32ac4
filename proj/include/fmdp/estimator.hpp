#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "fmdp/factor_space.hpp"
#include "fmdp/model.hpp"

namespace fmdp {

/// delta and the model-shape constants that enter tau(t) = ln(6 d W L t / delta).
struct ConfidenceParams {
  double delta = 0.01;
  std::size_t d = 1;
  std::size_t W = 1;
  Index L = 1;

  double tau(std::uint64_t t) const {
    return std::log(6.0 * static_cast<double>(d) * static_cast<double>(W) *
                    static_cast<double>(L) * static_cast<double>(t) / delta);
  }

  /// W = largest factor of X, L = max over size-m scopes of |X[Z]|.
  static ConfidenceParams forSpace(const FactorSpace& joint, std::size_t stateFactors,
                                   std::size_t m, double delta);
};

/// An ordered list of distinct scopes with lookup by value.
class ScopeFamily {
 public:
  ScopeFamily() = default;
  explicit ScopeFamily(std::vector<Scope> scopes);

  std::size_t size() const { return scopes_.size(); }
  const Scope& operator[](std::size_t id) const { return scopes_[id]; }
  const std::vector<Scope>& scopes() const { return scopes_; }
  std::optional<std::size_t> find(const Scope& z) const;
  /// Like find, but a missing scope is a DomainError.
  std::size_t idOf(const Scope& z) const;

 private:
  std::vector<Scope> scopes_;
  std::unordered_map<std::uint64_t, std::size_t> byMask_;
};

/// Visit counters N, nu, per-factor next-value counts and reward sums for every scope in a
/// family. Scopes with at most kDenseLimit cells are stored densely; larger ones allocate a
/// slot on first visit.
class ScopeCounters {
 public:
  static constexpr Index kDenseLimit = 4096;

  ScopeCounters(FactorSpace joint, std::vector<std::size_t> stateSizes, std::size_t rewardFactors,
                ScopeFamily family);

  /// Adds one transition to the in-episode counters and advances t.
  void record(const StepRecord& step);
  /// N += nu, nu = 0, t_k = t.
  void rollEpisode();
  /// True iff some tracked scope Z has nu_Z(x[Z]) >= max{N_Z(x[Z]), 1}.
  bool doublingTriggered(Index jointIndex) const;

  const FactorSpace& joint() const { return joint_; }
  const ScopeFamily& family() const { return *family_; }
  std::shared_ptr<const ScopeFamily> sharedFamily() const { return family_; }
  const std::vector<std::size_t>& stateSizes() const { return stateSizes_; }
  std::size_t rewardFactorCount() const { return rewardFactors_; }
  std::uint64_t time() const { return time_; }
  std::uint64_t episodeStart() const { return episodeStart_; }
  Index cellCount(std::size_t scope) const { return tables_[scope].cells; }
  Index projectCell(std::size_t scope, Index jointIndex) const { return tables_[scope].proj(jointIndex); }
  /// Sum over tracked scopes of |X[Z]|.
  Index trackedCellTotal() const;

  std::uint64_t visits(std::size_t scope, Index cell) const;
  std::uint64_t inEpisode(std::size_t scope, Index cell) const;
  std::uint64_t transitionVisits(std::size_t scope, std::size_t factor, Index cell, std::size_t w) const;
  std::uint64_t transitionInEpisode(std::size_t scope, std::size_t factor, Index cell, std::size_t w) const;
  double rewardSum(std::size_t scope, std::size_t factor, Index cell) const;
  double rewardInEpisode(std::size_t scope, std::size_t factor, Index cell) const;
  /// Cells with a nonzero total count, ascending.
  std::vector<Index> visitedCells(std::size_t scope) const;

  /// Sum_w N_{i,Z}(v,w) = N_Z(v), the same for nu, and reward sums bounded by counts.
  bool invariantsHold() const;

  void save(std::ostream& out) const;
  static ScopeCounters load(std::istream& in);

 private:
  static constexpr std::uint32_t kNoSlot = UINT32_MAX;

  struct Table {
    Scope scope;
    ScopeProjector proj;
    Index cells = 0;
    bool dense = true;
    std::unordered_map<Index, std::uint32_t> slotOf;
    std::vector<Index> cellOf;
    std::vector<std::uint64_t> N, nu;
    std::vector<std::uint64_t> Nw, nuw;
    std::vector<double> R, rho;

    std::uint32_t slot(Index cell) const;
    std::uint32_t slotOrAllocate(Index cell, std::size_t wTotal, std::size_t ell);
  };

  FactorSpace joint_;
  std::vector<std::size_t> stateSizes_;
  std::vector<std::size_t> wOffset_;
  std::size_t wTotal_ = 0;
  std::size_t rewardFactors_ = 0;
  std::shared_ptr<const ScopeFamily> family_;
  std::vector<Table> tables_;
  std::uint64_t time_ = 1;
  std::uint64_t episodeStart_ = 1;

  friend class EmpiricalSnapshot;
};

/// Estimates frozen at an episode start: empirical transitions and rewards with their
/// confidence radii. Only total counts N enter; in-episode counts never do.
class EmpiricalSnapshot {
 public:
  static EmpiricalSnapshot fromCounters(const ScopeCounters& counters, const ConfidenceParams& params);
  /// Infinite-data estimates of a known model under uniform state-action visitation; all
  /// radii are zero.
  static EmpiricalSnapshot fromModel(const Fmdp& model, const ScopeFamily& family,
                                     const ConfidenceParams& params, std::uint64_t time = 1);

  const FactorSpace& joint() const { return joint_; }
  const ScopeFamily& family() const { return *family_; }
  std::size_t scopeId(const Scope& z) const { return family_->idOf(z); }
  const std::vector<std::size_t>& stateSizes() const { return stateSizes_; }
  std::size_t stateFactorCount() const { return stateSizes_.size(); }
  std::size_t rewardFactorCount() const { return rewardFactors_; }
  const ConfidenceParams& params() const { return params_; }
  std::uint64_t episodeStart() const { return episodeStart_; }
  double tau() const { return tau_; }
  Index cellCount(std::size_t scope) const { return tables_[scope].cells; }
  Index projectCell(std::size_t scope, Index jointIndex) const { return tables_[scope].proj(jointIndex); }

  /// Multiplier on every radius (1 by default; 0 collapses the confidence sets).
  double radiusScale() const { return radiusScale_; }
  void setRadiusScale(double scale) { radiusScale_ = scale; }

  double visits(std::size_t scope, Index cell) const;
  double pBar(std::size_t scope, std::size_t factor, Index cell, std::size_t w) const;
  double epsTransition(std::size_t scope, std::size_t factor, Index cell, std::size_t w) const;
  double wTransition(std::size_t scope, std::size_t factor, Index cell, std::size_t w) const {
    return std::min(epsTransition(scope, factor, cell, w), pBar(scope, factor, cell, w));
  }
  double rBar(std::size_t scope, std::size_t factor, Index cell) const;
  double epsReward(std::size_t scope, Index cell) const;
  /// Cells with N > 0, ascending.
  std::vector<Index> visitedCells(std::size_t scope) const;

  /// One CSV row per (scope, cell, factor): N, the pBar row and the epsilon row.
  void exportCsv(std::ostream& out) const;

 private:
  struct Table {
    Scope scope;
    ScopeProjector proj;
    Index cells = 0;
    bool dense = true;
    std::unordered_map<Index, std::uint32_t> slotOf;
    std::vector<Index> cellOf;
    std::vector<double> N, pbar, rbar;

    std::int64_t slot(Index cell) const;
  };

  FactorSpace joint_;
  std::vector<std::size_t> stateSizes_;
  std::vector<std::size_t> wOffset_;
  std::size_t wTotal_ = 0;
  std::size_t rewardFactors_ = 0;
  std::shared_ptr<const ScopeFamily> family_;
  std::vector<Table> tables_;
  ConfidenceParams params_;
  std::uint64_t episodeStart_ = 1;
  double tau_ = 0.0;
  double radiusScale_ = 1.0;
};

/// Checks every visited cell of every tracked scope that contains a true scope against the
/// model: |pBar - P_i| <= eps and |rBar - r_j| <= eps_Z.
bool concentrationHolds(const EmpiricalSnapshot& snap, const Fmdp& truth);

}  // namespace fmdp

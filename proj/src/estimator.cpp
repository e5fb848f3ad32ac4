#include "fmdp/estimator.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "fmdp/error.hpp"

namespace fmdp {

ConfidenceParams ConfidenceParams::forSpace(const FactorSpace& joint, std::size_t stateFactors,
                                            std::size_t m, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0,1)");
  ConfidenceParams p;
  p.delta = delta;
  p.d = stateFactors;
  p.W = joint.maxFactorSize();
  p.L = maxScopeCardinality(joint, std::min(m, joint.factorCount()));
  return p;
}

ScopeFamily::ScopeFamily(std::vector<Scope> scopes) : scopes_(std::move(scopes)) {
  for (std::size_t k = 0; k < scopes_.size(); ++k) {
    auto [it, inserted] = byMask_.emplace(scopes_[k].mask(), k);
    if (!inserted) throw DomainError("duplicate scope " + scopes_[k].toString() + " in family");
  }
}

std::optional<std::size_t> ScopeFamily::find(const Scope& z) const {
  auto it = byMask_.find(z.mask());
  if (it == byMask_.end()) return std::nullopt;
  return it->second;
}

std::size_t ScopeFamily::idOf(const Scope& z) const {
  auto id = find(z);
  if (!id) throw DomainError("scope " + z.toString() + " is not tracked");
  return *id;
}

// ---------------------------------------------------------------------------
// ScopeCounters

std::uint32_t ScopeCounters::Table::slot(Index cell) const {
  if (dense) return static_cast<std::uint32_t>(cell);
  auto it = slotOf.find(cell);
  return it == slotOf.end() ? kNoSlot : it->second;
}

std::uint32_t ScopeCounters::Table::slotOrAllocate(Index cell, std::size_t wTotal, std::size_t ell) {
  if (dense) return static_cast<std::uint32_t>(cell);
  auto [it, inserted] = slotOf.try_emplace(cell, static_cast<std::uint32_t>(cellOf.size()));
  if (inserted) {
    cellOf.push_back(cell);
    N.push_back(0);
    nu.push_back(0);
    Nw.resize(Nw.size() + wTotal, 0);
    nuw.resize(nuw.size() + wTotal, 0);
    R.resize(R.size() + ell, 0.0);
    rho.resize(rho.size() + ell, 0.0);
  }
  return it->second;
}

ScopeCounters::ScopeCounters(FactorSpace joint, std::vector<std::size_t> stateSizes,
                             std::size_t rewardFactors, ScopeFamily family)
    : joint_(std::move(joint)),
      stateSizes_(std::move(stateSizes)),
      rewardFactors_(rewardFactors),
      family_(std::make_shared<const ScopeFamily>(std::move(family))) {
  for (auto w : stateSizes_) {
    wOffset_.push_back(wTotal_);
    wTotal_ += w;
  }
  for (const auto& z : family_->scopes()) {
    Table t;
    t.scope = z;
    t.proj = ScopeProjector(joint_, z);
    t.cells = t.proj.cellCount();
    t.dense = t.cells <= kDenseLimit;
    if (t.dense) {
      t.N.assign(t.cells, 0);
      t.nu.assign(t.cells, 0);
      t.Nw.assign(t.cells * wTotal_, 0);
      t.nuw.assign(t.cells * wTotal_, 0);
      t.R.assign(t.cells * rewardFactors_, 0.0);
      t.rho.assign(t.cells * rewardFactors_, 0.0);
    }
    tables_.push_back(std::move(t));
  }
}

void ScopeCounters::record(const StepRecord& step) {
  Index S = 1;
  for (auto w : stateSizes_) S *= w;
  const Index x = step.state + step.action * S;
  std::vector<std::size_t> next(stateSizes_.size());
  Index rest = step.nextState;
  for (std::size_t i = 0; i < stateSizes_.size(); ++i) {
    next[i] = static_cast<std::size_t>(rest % stateSizes_[i]);
    rest /= stateSizes_[i];
  }
  if (step.rewardFactors.size() != rewardFactors_) throw DomainError("reward factor count mismatch");
  for (auto& t : tables_) {
    const auto s = t.slotOrAllocate(t.proj(x), wTotal_, rewardFactors_);
    ++t.nu[s];
    for (std::size_t i = 0; i < stateSizes_.size(); ++i) ++t.nuw[s * wTotal_ + wOffset_[i] + next[i]];
    for (std::size_t j = 0; j < rewardFactors_; ++j) t.rho[s * rewardFactors_ + j] += step.rewardFactors[j];
  }
  ++time_;
}

void ScopeCounters::rollEpisode() {
  for (auto& t : tables_) {
    for (std::size_t k = 0; k < t.N.size(); ++k) t.N[k] += std::exchange(t.nu[k], 0);
    for (std::size_t k = 0; k < t.Nw.size(); ++k) t.Nw[k] += std::exchange(t.nuw[k], 0);
    for (std::size_t k = 0; k < t.R.size(); ++k) t.R[k] += std::exchange(t.rho[k], 0.0);
  }
  episodeStart_ = time_;
}

bool ScopeCounters::doublingTriggered(Index x) const {
  for (const auto& t : tables_) {
    const auto s = t.slot(t.proj(x));
    if (s == kNoSlot) continue;  // unseen cell: nu = 0 < max{N,1}
    if (t.nu[s] >= std::max<std::uint64_t>(t.N[s], 1)) return true;
  }
  return false;
}

Index ScopeCounters::trackedCellTotal() const {
  Index total = 0;
  for (const auto& t : tables_) total += t.cells;
  return total;
}

std::uint64_t ScopeCounters::visits(std::size_t scope, Index cell) const {
  const auto& t = tables_[scope];
  const auto s = t.slot(cell);
  return s == kNoSlot ? 0 : t.N[s];
}

std::uint64_t ScopeCounters::inEpisode(std::size_t scope, Index cell) const {
  const auto& t = tables_[scope];
  const auto s = t.slot(cell);
  return s == kNoSlot ? 0 : t.nu[s];
}

std::uint64_t ScopeCounters::transitionVisits(std::size_t scope, std::size_t factor, Index cell,
                                              std::size_t w) const {
  const auto& t = tables_[scope];
  const auto s = t.slot(cell);
  return s == kNoSlot ? 0 : t.Nw[s * wTotal_ + wOffset_[factor] + w];
}

std::uint64_t ScopeCounters::transitionInEpisode(std::size_t scope, std::size_t factor, Index cell,
                                                 std::size_t w) const {
  const auto& t = tables_[scope];
  const auto s = t.slot(cell);
  return s == kNoSlot ? 0 : t.nuw[s * wTotal_ + wOffset_[factor] + w];
}

double ScopeCounters::rewardSum(std::size_t scope, std::size_t factor, Index cell) const {
  const auto& t = tables_[scope];
  const auto s = t.slot(cell);
  return s == kNoSlot ? 0.0 : t.R[s * rewardFactors_ + factor];
}

double ScopeCounters::rewardInEpisode(std::size_t scope, std::size_t factor, Index cell) const {
  const auto& t = tables_[scope];
  const auto s = t.slot(cell);
  return s == kNoSlot ? 0.0 : t.rho[s * rewardFactors_ + factor];
}

std::vector<Index> ScopeCounters::visitedCells(std::size_t scope) const {
  const auto& t = tables_[scope];
  std::vector<Index> cells;
  for (std::size_t k = 0; k < t.N.size(); ++k)
    if (t.N[k] > 0) cells.push_back(t.dense ? k : t.cellOf[k]);
  std::sort(cells.begin(), cells.end());
  return cells;
}

bool ScopeCounters::invariantsHold() const {
  for (const auto& t : tables_) {
    for (std::size_t k = 0; k < t.N.size(); ++k) {
      for (std::size_t i = 0; i < stateSizes_.size(); ++i) {
        std::uint64_t sumN = 0, sumNu = 0;
        for (std::size_t w = 0; w < stateSizes_[i]; ++w) {
          sumN += t.Nw[k * wTotal_ + wOffset_[i] + w];
          sumNu += t.nuw[k * wTotal_ + wOffset_[i] + w];
        }
        if (sumN != t.N[k] || sumNu != t.nu[k]) return false;
      }
      for (std::size_t j = 0; j < rewardFactors_; ++j) {
        const double r = t.R[k * rewardFactors_ + j] + t.rho[k * rewardFactors_ + j];
        if (r < -1e-9 || r > static_cast<double>(t.N[k] + t.nu[k]) + 1e-9) return false;
      }
    }
  }
  return true;
}

void ScopeCounters::save(std::ostream& out) const {
  using nlohmann::json;
  json doc;
  doc["format"] = "fmdp-counters";
  doc["version"] = 1;
  doc["joint_sizes"] = std::vector<std::size_t>(joint_.sizes().begin(), joint_.sizes().end());
  doc["state_sizes"] = stateSizes_;
  doc["reward_factors"] = rewardFactors_;
  doc["time"] = time_;
  doc["episode_start"] = episodeStart_;
  json scopes = json::array();
  for (const auto& t : tables_) {
    json cells = json::array();
    for (std::size_t k = 0; k < t.N.size(); ++k) {
      if (t.N[k] == 0 && t.nu[k] == 0) continue;
      json c;
      c["cell"] = t.dense ? k : t.cellOf[k];
      c["N"] = t.N[k];
      c["nu"] = t.nu[k];
      c["Nw"] = std::vector<std::uint64_t>(t.Nw.begin() + k * wTotal_, t.Nw.begin() + (k + 1) * wTotal_);
      c["nuw"] = std::vector<std::uint64_t>(t.nuw.begin() + k * wTotal_, t.nuw.begin() + (k + 1) * wTotal_);
      c["R"] = std::vector<double>(t.R.begin() + k * rewardFactors_, t.R.begin() + (k + 1) * rewardFactors_);
      c["rho"] = std::vector<double>(t.rho.begin() + k * rewardFactors_, t.rho.begin() + (k + 1) * rewardFactors_);
      cells.push_back(std::move(c));
    }
    scopes.push_back({{"scope", std::vector<std::size_t>(t.scope.indices().begin(), t.scope.indices().end())},
                      {"cells", std::move(cells)}});
  }
  doc["scopes"] = std::move(scopes);
  out << doc.dump() << '\n';
}

ScopeCounters ScopeCounters::load(std::istream& in) {
  using nlohmann::json;
  try {
    json doc;
    in >> doc;
    if (doc.at("format") != "fmdp-counters") throw FormatError("unexpected format tag");
    std::vector<Scope> scopes;
    for (const auto& s : doc.at("scopes")) scopes.emplace_back(s.at("scope").get<std::vector<std::size_t>>());
    ScopeCounters c(FactorSpace(doc.at("joint_sizes").get<std::vector<std::size_t>>()),
                    doc.at("state_sizes").get<std::vector<std::size_t>>(),
                    doc.at("reward_factors").get<std::size_t>(), ScopeFamily(std::move(scopes)));
    c.time_ = doc.at("time").get<std::uint64_t>();
    c.episodeStart_ = doc.at("episode_start").get<std::uint64_t>();
    std::size_t z = 0;
    for (const auto& s : doc.at("scopes")) {
      auto& t = c.tables_[z++];
      for (const auto& cell : s.at("cells")) {
        const auto k = t.slotOrAllocate(cell.at("cell").get<Index>(), c.wTotal_, c.rewardFactors_);
        t.N[k] = cell.at("N").get<std::uint64_t>();
        t.nu[k] = cell.at("nu").get<std::uint64_t>();
        const auto Nw = cell.at("Nw").get<std::vector<std::uint64_t>>();
        const auto nuw = cell.at("nuw").get<std::vector<std::uint64_t>>();
        const auto R = cell.at("R").get<std::vector<double>>();
        const auto rho = cell.at("rho").get<std::vector<double>>();
        if (Nw.size() != c.wTotal_ || nuw.size() != c.wTotal_ || R.size() != c.rewardFactors_ ||
            rho.size() != c.rewardFactors_)
          throw FormatError("counter cell has wrong arity");
        std::copy(Nw.begin(), Nw.end(), t.Nw.begin() + k * c.wTotal_);
        std::copy(nuw.begin(), nuw.end(), t.nuw.begin() + k * c.wTotal_);
        std::copy(R.begin(), R.end(), t.R.begin() + k * c.rewardFactors_);
        std::copy(rho.begin(), rho.end(), t.rho.begin() + k * c.rewardFactors_);
      }
    }
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed counters document: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// EmpiricalSnapshot

std::int64_t EmpiricalSnapshot::Table::slot(Index cell) const {
  if (dense) return static_cast<std::int64_t>(cell);
  auto it = slotOf.find(cell);
  return it == slotOf.end() ? -1 : static_cast<std::int64_t>(it->second);
}

EmpiricalSnapshot EmpiricalSnapshot::fromCounters(const ScopeCounters& counters,
                                                  const ConfidenceParams& params) {
  EmpiricalSnapshot snap;
  snap.joint_ = counters.joint_;
  snap.stateSizes_ = counters.stateSizes_;
  snap.wOffset_ = counters.wOffset_;
  snap.wTotal_ = counters.wTotal_;
  snap.rewardFactors_ = counters.rewardFactors_;
  snap.family_ = counters.family_;
  snap.params_ = params;
  snap.episodeStart_ = counters.episodeStart_;
  snap.tau_ = params.tau(std::max<std::uint64_t>(counters.episodeStart_, 1));
  const std::size_t W = snap.wTotal_, ell = snap.rewardFactors_;
  for (const auto& src : counters.tables_) {
    Table t;
    t.scope = src.scope;
    t.proj = src.proj;
    t.cells = src.cells;
    t.dense = src.dense;
    t.slotOf = src.slotOf;
    t.cellOf = src.cellOf;
    const std::size_t slots = src.N.size();
    t.N.resize(slots);
    t.pbar.resize(slots * W);
    t.rbar.resize(slots * ell);
    for (std::size_t k = 0; k < slots; ++k) {
      const double n = static_cast<double>(src.N[k]);
      const double denom = std::max(n, 1.0);
      t.N[k] = n;
      for (std::size_t q = 0; q < W; ++q) t.pbar[k * W + q] = static_cast<double>(src.Nw[k * W + q]) / denom;
      for (std::size_t j = 0; j < ell; ++j) t.rbar[k * ell + j] = src.R[k * ell + j] / denom;
    }
    snap.tables_.push_back(std::move(t));
  }
  return snap;
}

EmpiricalSnapshot EmpiricalSnapshot::fromModel(const Fmdp& model, const ScopeFamily& family,
                                               const ConfidenceParams& params, std::uint64_t time) {
  const auto& X = model.jointSpace();
  if (X.cardinality() > (Index{1} << 22)) throw SizeError("exact snapshot needs a small joint space");
  EmpiricalSnapshot snap;
  snap.joint_ = X;
  snap.stateSizes_.assign(model.stateSpace().sizes().begin(), model.stateSpace().sizes().end());
  for (auto w : snap.stateSizes_) {
    snap.wOffset_.push_back(snap.wTotal_);
    snap.wTotal_ += w;
  }
  snap.rewardFactors_ = model.rewardFactorCount();
  snap.family_ = std::make_shared<const ScopeFamily>(family);
  snap.params_ = params;
  snap.episodeStart_ = time;
  snap.tau_ = params.tau(time);
  const std::size_t W = snap.wTotal_, ell = snap.rewardFactors_;
  for (const auto& z : family.scopes()) {
    Table t;
    t.scope = z;
    t.proj = ScopeProjector(X, z);
    t.cells = t.proj.cellCount();
    t.dense = true;
    std::vector<double> weight(t.cells, 0.0);
    t.pbar.assign(t.cells * W, 0.0);
    t.rbar.assign(t.cells * ell, 0.0);
    for (Index x = 0; x < X.cardinality(); ++x) {
      const Index c = t.proj(x);
      weight[c] += 1.0;
      for (std::size_t i = 0; i < snap.stateSizes_.size(); ++i) {
        const auto row = model.transitionRow(i, model.transitionProjector(i)(x));
        for (std::size_t w = 0; w < row.size(); ++w) t.pbar[c * W + snap.wOffset_[i] + w] += row[w];
      }
      for (std::size_t j = 0; j < ell; ++j) t.rbar[c * ell + j] += model.rewardMean(j, model.rewardProjector(j)(x));
    }
    for (Index c = 0; c < t.cells; ++c) {
      for (std::size_t q = 0; q < W; ++q) t.pbar[c * W + q] /= weight[c];
      for (std::size_t j = 0; j < ell; ++j) t.rbar[c * ell + j] /= weight[c];
    }
    t.N.assign(t.cells, std::numeric_limits<double>::infinity());
    snap.tables_.push_back(std::move(t));
  }
  return snap;
}

double EmpiricalSnapshot::visits(std::size_t scope, Index cell) const {
  const auto s = tables_[scope].slot(cell);
  return s < 0 ? 0.0 : tables_[scope].N[s];
}

double EmpiricalSnapshot::pBar(std::size_t scope, std::size_t factor, Index cell, std::size_t w) const {
  const auto s = tables_[scope].slot(cell);
  return s < 0 ? 0.0 : tables_[scope].pbar[s * wTotal_ + wOffset_[factor] + w];
}

double EmpiricalSnapshot::epsTransition(std::size_t scope, std::size_t factor, Index cell,
                                        std::size_t w) const {
  const double n = std::max(visits(scope, cell), 1.0);
  const double p = pBar(scope, factor, cell, w);
  return radiusScale_ * (std::sqrt(18.0 * p * tau_ / n) + 18.0 * tau_ / n);
}

double EmpiricalSnapshot::rBar(std::size_t scope, std::size_t factor, Index cell) const {
  const auto s = tables_[scope].slot(cell);
  return s < 0 ? 0.0 : tables_[scope].rbar[s * rewardFactors_ + factor];
}

double EmpiricalSnapshot::epsReward(std::size_t scope, Index cell) const {
  const double n = std::max(visits(scope, cell), 1.0);
  return radiusScale_ * std::sqrt(18.0 * tau_ / n);
}

std::vector<Index> EmpiricalSnapshot::visitedCells(std::size_t scope) const {
  const auto& t = tables_[scope];
  std::vector<Index> cells;
  for (std::size_t k = 0; k < t.N.size(); ++k)
    if (t.N[k] > 0.0) cells.push_back(t.dense ? k : t.cellOf[k]);
  std::sort(cells.begin(), cells.end());
  return cells;
}

void EmpiricalSnapshot::exportCsv(std::ostream& out) const {
  out << "scope,cell,factor,N,pbar,eps\n";
  for (std::size_t z = 0; z < tables_.size(); ++z) {
    const std::string name = '"' + tables_[z].scope.toString() + '"';
    for (auto cell : visitedCells(z)) {
      for (std::size_t i = 0; i < stateSizes_.size(); ++i) {
        out << name << ',' << cell << ',' << i << ',' << visits(z, cell) << ',';
        for (std::size_t w = 0; w < stateSizes_[i]; ++w) out << (w ? ";" : "") << pBar(z, i, cell, w);
        out << ',';
        for (std::size_t w = 0; w < stateSizes_[i]; ++w) out << (w ? ";" : "") << epsTransition(z, i, cell, w);
        out << '\n';
      }
    }
  }
}

bool concentrationHolds(const EmpiricalSnapshot& snap, const Fmdp& truth) {
  constexpr double kRoundOff = 1e-12;
  const auto& family = snap.family();
  const auto& X = snap.joint();
  for (std::size_t z = 0; z < family.size(); ++z) {
    const Scope& Z = family[z];
    const FactorSpace sub = subspace(X, Z);
    std::vector<Index> cells;
    bool cellsLoaded = false;
    for (std::size_t i = 0; i < truth.stateFactorCount(); ++i) {
      const Scope& Zi = truth.transition(i).scope;
      if (!Z.containsAll(Zi)) continue;
      if (!cellsLoaded) cells = snap.visitedCells(z), cellsLoaded = true;
      const ScopeProjector toTrue(sub, Zi.positionsWithin(Z));
      for (auto v : cells) {
        const auto row = truth.transitionRow(i, toTrue(v));
        for (std::size_t w = 0; w < row.size(); ++w)
          if (std::abs(snap.pBar(z, i, v, w) - row[w]) > snap.epsTransition(z, i, v, w) + kRoundOff) return false;
      }
    }
    for (std::size_t j = 0; j < truth.rewardFactorCount(); ++j) {
      const Scope& Zj = truth.reward(j).scope;
      if (!Z.containsAll(Zj)) continue;
      if (!cellsLoaded) cells = snap.visitedCells(z), cellsLoaded = true;
      const ScopeProjector toTrue(sub, Zj.positionsWithin(Z));
      for (auto v : cells)
        if (std::abs(snap.rBar(z, j, v) - truth.rewardMean(j, toTrue(v))) > snap.epsReward(z, v) + kRoundOff)
          return false;
    }
  }
  return true;
}

}  // namespace fmdp

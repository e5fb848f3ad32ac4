#include "fmdp/optimistic.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "fmdp/error.hpp"

namespace fmdp {

void optimisticFactorTransition(const EmpiricalSnapshot& snap, std::size_t i, std::size_t scope,
                                Index cell, std::size_t direction, std::span<double> out) {
  const std::size_t W = snap.stateSizes()[i];
  if (out.size() != W) throw DomainError("output row has the wrong length");
  if (direction >= W) throw DomainError("direction outside the factor's range");
  std::fill(out.begin(), out.end(), 0.0);
  if (!(snap.visits(scope, cell) > 0.0)) {
    out[direction] = 1.0;
    return;
  }
  double moved = 0.0;
  for (std::size_t w = 0; w < W; ++w) {
    const double wt = snap.wTransition(scope, i, cell, w);
    out[w] = snap.pBar(scope, i, cell, w) - wt;
    moved += wt;
  }
  out[direction] += moved;
}

double optimisticReward(const EmpiricalSnapshot& snap, std::size_t j, std::size_t scope, Index cell) {
  return std::min(1.0, snap.rBar(scope, j, cell) + snap.epsReward(scope, cell));
}

// ---------------------------------------------------------------------------
// TildeModelView

namespace {

constexpr double kTieMargin = 1e-12;

}  // namespace

TildeModelView::TildeModelView(const EmpiricalSnapshot& snap, const ConsistentScopeSets& sets,
                               const FactorSpace& states, const FactorSpace& actions, TildeOptions options)
    : snap_(&snap), sets_(&sets), states_(states), actions_(actions), options_(options) {
  const std::size_t d = states_.factorCount();
  if (sets.transition.size() != d) throw DomainError("need one consistent set per state factor");
  if (sets.reward.size() != snap.rewardFactorCount()) throw DomainError("need one consistent set per reward factor");
  for (const auto& set : sets.transition) {
    if (set.empty()) throw StructuralFault("empty consistent scope set");
    transScopeIds_.emplace_back();
    for (const auto& z : set) transScopeIds_.back().push_back(snap.scopeId(z));
  }
  for (const auto& set : sets.reward) {
    if (set.empty()) throw StructuralFault("empty consistent scope set");
    rewardScopeIds_.emplace_back();
    for (const auto& z : set) rewardScopeIds_.back().push_back(snap.scopeId(z));
  }

  const Index S = states_.cardinality(), A = actions_.cardinality();
  const std::size_t ell = sets.reward.size();
  cells_.resize(S * A);
  for (Index s = 0; s < S; ++s) {
    double perState = 0.0;
    for (Index a = 0; a < A; ++a) {
      const Index x = s + a * S;
      Cell& c = cells_[s * A + a];
      c.reward = 0.0;
      c.rewardChoice.assign(ell, 0);
      for (std::size_t j = 0; j < ell; ++j) {
        double best = -1.0;
        for (std::size_t p = 0; p < rewardScopeIds_[j].size(); ++p) {
          const auto id = rewardScopeIds_[j][p];
          const double r = optimisticReward(snap, j, id, snap.projectCell(id, x));
          if (r > best + kTieMargin) best = r, c.rewardChoice[j] = p;
        }
        c.reward += best;
      }
      if (ell > 0) c.reward /= static_cast<double>(ell);

      c.all.resize(d);
      c.extreme.resize(d);
      double combos = 1.0;
      for (std::size_t i = 0; i < d; ++i) {
        const std::size_t W = states_.size(i);
        for (std::size_t p = 0; p < transScopeIds_[i].size(); ++p) {
          const auto id = transScopeIds_[i][p];
          const Index v = snap.projectCell(id, x);
          for (std::size_t dir = 0; dir < W; ++dir) {
            const std::size_t offset = rows_.size();
            rows_.resize(offset + W);
            optimisticFactorTransition(snap, i, id, v, dir, {rows_.data() + offset, W});
            c.all[i].push_back({p, dir, offset});
          }
        }
        // the backup is multilinear in the per-factor rows, so only extreme rows matter
        auto& ext = c.extreme[i];
        if (W == 2) {
          const Option* lo = &c.all[i][0];
          const Option* hi = lo;
          for (const auto& o : c.all[i]) {
            if (rows_[o.rowOffset + 1] < rows_[lo->rowOffset + 1]) lo = &o;
            if (rows_[o.rowOffset + 1] > rows_[hi->rowOffset + 1]) hi = &o;
          }
          ext.push_back(*lo);
          if (rows_[hi->rowOffset + 1] != rows_[lo->rowOffset + 1]) ext.push_back(*hi);
        } else {
          for (const auto& o : c.all[i]) {
            const bool dup = std::any_of(ext.begin(), ext.end(), [&](const Option& e) {
              return std::equal(rows_.begin() + o.rowOffset, rows_.begin() + o.rowOffset + W,
                                rows_.begin() + e.rowOffset);
            });
            if (!dup) ext.push_back(o);
          }
        }
        combos *= static_cast<double>(options_.greedyDirection ? transScopeIds_[i].size() : ext.size());
      }
      perState += combos;
    }
    if (perState > static_cast<double>(options_.cap))
      throw SizeError("optimistic view needs " + std::to_string(static_cast<std::uint64_t>(perState)) +
                      " extended actions per state; raise the cap or enable greedy directions");
  }
}

std::uint64_t TildeModelView::extendedActionCount(std::size_t) const {
  std::uint64_t count = actions_.cardinality() * states_.cardinality();
  for (const auto& set : sets_->transition) count *= set.size();
  for (const auto& set : sets_->reward) count *= set.size();
  return count;
}

TildeModelView::Decoded TildeModelView::decode(std::uint64_t ext) const {
  Decoded d;
  d.action = ext % actions_.cardinality();
  ext /= actions_.cardinality();
  d.direction = ext % states_.cardinality();
  ext /= states_.cardinality();
  for (const auto& set : sets_->transition) {
    d.transitionScope.push_back(ext % set.size());
    ext /= set.size();
  }
  for (const auto& set : sets_->reward) {
    d.rewardScope.push_back(ext % set.size());
    ext /= set.size();
  }
  if (ext != 0) throw DomainError("extended action out of range");
  return d;
}

std::uint64_t TildeModelView::encode(const Decoded& d) const {
  std::uint64_t ext = 0, radix = 1;
  const auto put = [&](std::uint64_t digit, std::uint64_t size) {
    if (digit >= size) throw DomainError("extended action component out of range");
    ext += digit * radix;
    radix *= size;
  };
  put(d.action, actions_.cardinality());
  put(d.direction, states_.cardinality());
  for (std::size_t i = 0; i < sets_->transition.size(); ++i) put(d.transitionScope.at(i), sets_->transition[i].size());
  for (std::size_t j = 0; j < sets_->reward.size(); ++j) put(d.rewardScope.at(j), sets_->reward[j].size());
  return ext;
}

double TildeModelView::reward(std::size_t s, std::uint64_t ext) const {
  const auto d = decode(ext);
  const std::size_t ell = rewardScopeIds_.size();
  if (ell == 0) return 0.0;
  const Index x = s + d.action * states_.cardinality();
  double total = 0.0;
  for (std::size_t j = 0; j < ell; ++j) {
    const auto id = rewardScopeIds_[j][d.rewardScope[j]];
    total += optimisticReward(*snap_, j, id, snap_->projectCell(id, x));
  }
  return total / static_cast<double>(ell);
}

void TildeModelView::distribution(std::size_t s, std::uint64_t ext, std::span<const double>,
                                  std::span<double> out) const {
  const auto dec = decode(ext);
  const std::size_t d = states_.factorCount();
  const Index x = s + dec.action * states_.cardinality();
  std::vector<std::vector<double>> q(d);
  for (std::size_t i = 0; i < d; ++i) {
    q[i].resize(states_.size(i));
    const auto id = transScopeIds_[i][dec.transitionScope[i]];
    optimisticFactorTransition(*snap_, i, id, snap_->projectCell(id, x), states_.valueOf(dec.direction, i), q[i]);
  }
  for (Index n = 0; n < states_.cardinality(); ++n) {
    double p = 1.0;
    for (std::size_t i = 0; i < d; ++i) p *= q[i][states_.valueOf(n, i)];
    out[n] = p;
  }
}

OptimisticModelView::Backup TildeModelView::combine(std::size_t s, Index a,
                                                    const std::vector<std::vector<const Option*>>& opts,
                                                    std::span<const double> h) const {
  const std::size_t d = states_.factorCount();
  std::vector<std::vector<double>> buf(d);
  for (std::size_t k = 0; k < d; ++k) buf[k].resize(states_.stride(k));
  std::vector<std::size_t> cur(d), bestChoice(d);
  double best = -std::numeric_limits<double>::infinity();

  // contract the most significant factor first; T holds prod_{j<=k} |S_j| values
  const auto rec = [&](auto&& self, std::size_t k, const double* T) -> void {
    const Index stride = states_.stride(k);
    const std::size_t W = states_.size(k);
    for (std::size_t o = 0; o < opts[k].size(); ++o) {
      const double* q = rows_.data() + opts[k][o]->rowOffset;
      double* out = buf[k].data();
      for (Index r = 0; r < stride; ++r) {
        double v = 0.0;
        for (std::size_t w = 0; w < W; ++w) v += q[w] * T[r + w * stride];
        out[r] = v;
      }
      cur[k] = o;
      if (k == 0) {
        if (out[0] > best + kTieMargin) best = out[0], bestChoice = cur;
      } else {
        self(self, k - 1, out);
      }
    }
  };
  rec(rec, d - 1, h.data());

  const Cell& c = cell(s, a);
  Decoded dec;
  dec.action = a;
  dec.rewardScope = c.rewardChoice;
  dec.transitionScope.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    const Option* o = opts[i][bestChoice[i]];
    dec.transitionScope[i] = o->scope;
    dec.direction += o->direction * states_.stride(i);
  }
  return {c.reward + best, encode(dec)};
}

OptimisticModelView::Backup TildeModelView::actionValue(std::size_t s, Index a, std::span<const double> h) const {
  const std::size_t d = states_.factorCount();
  const Cell& c = cell(s, a);
  std::vector<std::vector<const Option*>> opts(d);
  if (options_.greedyDirection) {
    const auto top = static_cast<Index>(std::max_element(h.begin(), h.end()) - h.begin());
    for (std::size_t i = 0; i < d; ++i)
      for (const auto& o : c.all[i])
        if (o.direction == states_.valueOf(top, i)) opts[i].push_back(&o);
  } else {
    for (std::size_t i = 0; i < d; ++i)
      for (const auto& o : c.extreme[i]) opts[i].push_back(&o);
  }
  return combine(s, a, opts, h);
}

OptimisticModelView::Backup TildeModelView::backup(std::size_t s, std::span<const double> h) const {
  Backup best{-std::numeric_limits<double>::infinity(), 0};
  for (Index a = 0; a < actions_.cardinality(); ++a) {
    const auto b = actionValue(s, a, h);
    if (b.value > best.value + kTieMargin) best = b;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Explicit factored constructions

namespace {

/// Fills a transition table by calling fn(values, row) for every cell of the scope, where
/// values[k] holds the value of joint factor k for the members of the scope.
template <class Fn>
TransitionFactor tableFactor(const FactorSpace& joint, const Scope& scope, std::size_t outSize, Fn&& fn) {
  const FactorSpace sub = subspace(joint, scope);
  TransitionFactor f{scope, std::vector<double>(sub.cardinality() * outSize, 0.0)};
  std::vector<std::size_t> values(joint.factorCount(), 0), tuple(scope.size());
  for (Index c = 0; c < sub.cardinality(); ++c) {
    sub.decode(c, tuple);
    for (std::size_t k = 0; k < scope.size(); ++k) values[scope[k]] = tuple[k];
    fn(std::span<const std::size_t>(values), std::span<double>(f.table.data() + c * outSize, outSize));
  }
  return f;
}

template <class Fn>
RewardFactor rewardFactor(const FactorSpace& joint, const Scope& scope, Fn&& fn) {
  const FactorSpace sub = subspace(joint, scope);
  RewardFactor f{scope, {}};
  f.cells.reserve(sub.cardinality());
  std::vector<std::size_t> values(joint.factorCount(), 0), tuple(scope.size());
  for (Index c = 0; c < sub.cardinality(); ++c) {
    sub.decode(c, tuple);
    for (std::size_t k = 0; k < scope.size(); ++k) values[scope[k]] = tuple[k];
    f.cells.push_back(RewardDistribution::bernoulli(fn(std::span<const std::size_t>(values))));
  }
  return f;
}

FactorSpace joinSpaces(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::vector<std::size_t> sizes = a;
  sizes.insert(sizes.end(), b.begin(), b.end());
  return FactorSpace(std::move(sizes));
}

}  // namespace

std::size_t maxTransitionScopeSize(const Fmdp& model) {
  std::size_t m = 0;
  for (std::size_t i = 0; i < model.stateFactorCount(); ++i) m = std::max(m, model.transition(i).scope.size());
  return m;
}

std::size_t maxRewardScopeSize(const Fmdp& model) {
  std::size_t m = 0;
  for (std::size_t j = 0; j < model.rewardFactorCount(); ++j) m = std::max(m, model.reward(j).scope.size());
  return m;
}

Index HatModel::startState(Index s) const { return s; }
Index HatModel::originalAction(Index hatAction) const { return hatAction % originalActions.cardinality(); }
Index HatModel::originalState(Index hatState) const {
  Index S = 1;
  for (std::size_t i = 0; i < originalStateFactors; ++i) S *= model.stateSpace().size(i);
  return hatState % S;
}

HatModel buildHatModel(const EmpiricalSnapshot& snap, const ConsistentScopeSets& sets, const FactorSpace& states,
                       const FactorSpace& actions) {
  const std::size_t d = states.factorCount(), k = actions.factorCount(), n = d + k;
  const std::size_t ell = sets.reward.size();
  if (n < 2) throw DomainError("need at least two joint factors");
  if (sets.transition.size() != d) throw DomainError("need one consistent set per state factor");
  const std::size_t m = sets.transition.at(0).at(0).size();
  const std::size_t padded = std::bit_ceil(n);
  const std::size_t K = static_cast<std::size_t>(std::countr_zero(padded));
  const std::size_t stretch = K + 2;
  const FactorSpace& X = snap.joint();
  const auto jointSize = [&](std::size_t p) -> std::size_t { return p < n ? X.size(p) : 1; };

  // state factor layout
  std::vector<std::size_t> stateSizes(states.sizes().begin(), states.sizes().end());
  const std::size_t counter = stateSizes.size();
  stateSizes.push_back(stretch);
  const std::size_t choiceBase = stateSizes.size();
  for (std::size_t i = 0; i < d; ++i) stateSizes.push_back(sets.transition[i].size() * states.size(i));
  const std::size_t rewardChoiceBase = stateSizes.size();
  for (std::size_t j = 0; j < ell; ++j) stateSizes.push_back(sets.reward[j].size());

  struct Cell {
    std::size_t factor;
    std::size_t domain;  // largest value a cell can hold, before the reward tag
  };
  // workspace cells, indexed [g][e][level][q]
  std::vector<std::vector<std::vector<std::vector<Cell>>>> ws(d + ell);
  for (std::size_t g = 0; g < d + ell; ++g) {
    ws[g].resize(m);
    for (std::size_t e = 0; e < m; ++e) {
      ws[g][e].resize(K + 1);
      for (std::size_t l = 0; l <= K; ++l) {
        for (std::size_t q = 0; q < (padded >> l); ++q) {
          std::size_t domain = 1;
          for (std::size_t p = q << l; p < (q + 1) << l; ++p) domain = std::max(domain, jointSize(p));
          std::size_t size = domain;
          if (g >= d && e == 0 && l == K) size *= sets.reward[g - d].size();
          ws[g][e][l].push_back({stateSizes.size(), domain});
          stateSizes.push_back(size);
        }
      }
    }
  }

  std::vector<std::size_t> actionSizes(actions.sizes().begin(), actions.sizes().end());
  for (std::size_t i = 0; i < d; ++i) actionSizes.push_back(stateSizes[choiceBase + i]);
  for (std::size_t j = 0; j < ell; ++j) actionSizes.push_back(stateSizes[rewardChoiceBase + j]);
  const std::size_t ns = stateSizes.size();
  const FactorSpace joint = joinSpaces(stateSizes, actionSizes);
  const auto actionFactor = [&](std::size_t t) { return ns + t; };
  // hat factor carrying original joint factor p at counter 0
  const auto sourceOf = [&](std::size_t p) { return p < d ? p : actionFactor(p - d); };
  const auto chosenScope = [&](std::size_t g, std::span<const std::size_t> v) -> const Scope* {
    if (g < d) {
      const std::size_t idx = v[choiceBase + g] / states.size(g);
      return idx < sets.transition[g].size() ? &sets.transition[g][idx] : nullptr;
    }
    const std::size_t idx = v[rewardChoiceBase + g - d];
    return idx < sets.reward[g - d].size() ? &sets.reward[g - d][idx] : nullptr;
  };
  // cell of X[Z] from the final work-space values; false if some value is out of range
  const auto scopeCell = [&](const Scope& z, std::span<const std::size_t> vals, Index& cell) {
    cell = 0;
    Index radix = 1;
    for (std::size_t e = 0; e < z.size(); ++e) {
      if (vals[e] >= X.size(z[e])) return false;
      cell += vals[e] * radix;
      radix *= X.size(z[e]);
    }
    return true;
  };

  std::vector<TransitionFactor> trans;
  // original state factors: resampled at the last counter value
  for (std::size_t i = 0; i < d; ++i) {
    std::vector<std::size_t> idx{i, counter, choiceBase + i};
    for (std::size_t e = 0; e < m; ++e) idx.push_back(ws[i][e][K][0].factor);
    trans.push_back(tableFactor(joint, Scope(idx), states.size(i), [&](auto v, auto row) {
      if (v[counter] == K + 1) {
        const std::size_t choice = v[choiceBase + i];
        const std::size_t p = choice / states.size(i), dir = choice % states.size(i);
        if (p < sets.transition[i].size()) {
          const Scope& z = sets.transition[i][p];
          std::vector<std::size_t> vals(m);
          for (std::size_t e = 0; e < m; ++e) vals[e] = v[ws[i][e][K][0].factor];
          Index cell;
          if (scopeCell(z, vals, cell)) {
            optimisticFactorTransition(snap, i, snap.scopeId(z), cell, dir, row);
            return;
          }
        }
      }
      row[v[i]] = 1.0;
    }));
  }
  trans.push_back(tableFactor(joint, Scope{counter}, stretch,
                              [&](auto v, auto row) { row[(v[counter] + 1) % stretch] = 1.0; }));
  // scope choices are latched from the action at counter 0 and cleared at the end of the block
  for (std::size_t c = choiceBase; c < choiceBase + d + ell; ++c) {
    const std::size_t act = actionFactor(k + (c - choiceBase));
    trans.push_back(tableFactor(joint, Scope{counter, c, act}, stateSizes[c], [&](auto v, auto row) {
      if (v[counter] == 0)
        row[v[act]] = 1.0;
      else if (v[counter] == K + 1)
        row[0] = 1.0;
      else
        row[v[c]] = 1.0;
    }));
  }
  for (std::size_t g = 0; g < d + ell; ++g) {
    for (std::size_t e = 0; e < m; ++e) {
      for (std::size_t l = 0; l <= K; ++l) {
        for (std::size_t q = 0; q < (padded >> l); ++q) {
          const Cell cellInfo = ws[g][e][l][q];
          const std::size_t f = cellInfo.factor;
          if (l == 0) {
            if (q >= n) {
              trans.push_back(tableFactor(joint, Scope{counter}, 1, [](auto, auto row) { row[0] = 1.0; }));
              continue;
            }
            const std::size_t src = sourceOf(q);
            trans.push_back(tableFactor(joint, Scope{counter, src}, stateSizes[f], [&, src](auto v, auto row) {
              row[v[counter] == 0 ? v[src] : 0] = 1.0;
            }));
            continue;
          }
          const std::size_t left = ws[g][e][l - 1][2 * q].factor, right = ws[g][e][l - 1][2 * q + 1].factor;
          const std::size_t choice = g < d ? choiceBase + g : rewardChoiceBase + g - d;
          const bool tagged = g >= d && e == 0 && l == K;
          trans.push_back(tableFactor(
              joint, Scope{counter, choice, left, right}, stateSizes[f], [&, g, e, l, left, right, tagged](auto v, auto row) {
                if (v[counter] != l) {
                  row[0] = 1.0;
                  return;
                }
                const Scope* z = chosenScope(g, v);
                if (!z) {
                  row[0] = 1.0;
                  return;
                }
                const std::size_t bit = ((*z)[e] >> (l - 1)) & 1u;
                const std::size_t value = bit ? v[right] : v[left];
                std::size_t out = std::min(value, cellInfo.domain - 1);
                if (tagged) out += cellInfo.domain * v[choice];
                row[out] = 1.0;
              }));
        }
      }
    }
  }

  std::vector<RewardFactor> rewards;
  for (std::size_t j = 0; j < ell; ++j) {
    std::vector<std::size_t> idx{counter};
    for (std::size_t e = 0; e < m; ++e) idx.push_back(ws[d + j][e][K][0].factor);
    const Cell top = ws[d + j][0][K][0];
    rewards.push_back(rewardFactor(joint, Scope(idx), [&, j, top](auto v) {
      if (v[counter] != K + 1) return 0.0;
      const std::size_t tag = v[top.factor] / top.domain;
      if (tag >= sets.reward[j].size()) return 0.0;
      const Scope& z = sets.reward[j][tag];
      std::vector<std::size_t> vals(m);
      vals[0] = v[top.factor] % top.domain;
      for (std::size_t e = 1; e < m; ++e) vals[e] = v[ws[d + j][e][K][0].factor];
      Index cell;
      if (!scopeCell(z, vals, cell)) return 0.0;
      return optimisticReward(snap, j, snap.scopeId(z), cell);
    }));
  }

  HatModel hat;
  hat.model = Fmdp(FactorSpace(stateSizes), FactorSpace(actionSizes), std::move(trans), std::move(rewards));
  hat.stretch = stretch;
  hat.levels = K;
  hat.counterFactor = counter;
  hat.originalStateFactors = d;
  hat.originalActionFactors = k;
  hat.originalActions = actions;
  return hat;
}

// ---------------------------------------------------------------------------
// Non-factored action constructions

Index NfaModel::startState(Index s) const {
  return s + model.stateSpace().stride(bitFactor());
}

Index NfaModel::originalState(Index stretchedState) const {
  return stretchedState % model.stateSpace().stride(counterFactor());
}

KnownScopes KnownScopes::of(const Fmdp& model) {
  if (model.actionSpace().factorCount() != 1) throw DomainError("expected a single action factor");
  const std::size_t d = model.stateFactorCount();
  KnownScopes k;
  for (std::size_t i = 0; i < d; ++i) k.transition.push_back(model.transition(i).scope.unite(Scope{d}));
  for (std::size_t j = 0; j < model.rewardFactorCount(); ++j) k.reward.push_back(model.reward(j).scope.unite(Scope{d}));
  return k;
}

std::vector<Scope> KnownScopes::family() const {
  std::vector<Scope> out;
  for (const auto* list : {&transition, &reward})
    for (const auto& z : *list)
      if (std::find(out.begin(), out.end(), z) == out.end()) out.push_back(z);
  return out;
}

namespace {

struct StretchSpec {
  const FactorSpace* states;
  Index actionCount;     // |A| of the original process
  std::size_t actionSize;
  std::vector<Scope> transScopes;  // over X = S x A, action at index d
  std::vector<Scope> rewardScopes;
  bool validate;         // whether out-of-range actions clear the bit
};

/// Shared builder; `row(i, x, dir, out)` gives the step distribution of factor i at joint
/// index x of the original process, `reward(j, x)` the reward mean.
template <class Row, class Reward>
NfaModel buildStretched(const StretchSpec& spec, Row&& row, Reward&& reward) {
  const FactorSpace& S = *spec.states;
  const std::size_t d = S.factorCount();
  const std::size_t stretch = d + 2;
  std::vector<std::size_t> sizes(S.sizes().begin(), S.sizes().end());
  const std::size_t counter = d, astore = d + 1, wBase = d + 2, bit = 2 * d + 2;
  sizes.push_back(stretch);
  sizes.push_back(static_cast<std::size_t>(spec.actionCount));
  for (std::size_t i = 0; i < d; ++i) sizes.push_back(S.size(i));
  sizes.push_back(2);
  const std::size_t act = sizes.size();
  const FactorSpace joint = joinSpaces(sizes, {spec.actionSize});
  const Index A = spec.actionCount;

  // original joint index built from the members of a scope (others read as 0)
  const auto originalIndex = [&](const Scope& z, std::span<const std::size_t> v, Index a) {
    Index x = 0;
    for (auto f : z.indices())
      if (f < d) x += v[f] * S.stride(f);
    return x + a * S.cardinality();
  };
  const auto legal = [&](std::size_t c, std::size_t a) {
    if (!spec.validate) return true;
    if (c == 0) return a < A;
    if (c <= d) return a < S.size(c - 1);
    return true;
  };

  std::vector<TransitionFactor> trans;
  for (std::size_t i = 0; i < d; ++i)
    trans.push_back(tableFactor(joint, Scope{i, counter, wBase + i}, S.size(i), [&, i](auto v, auto out) {
      out[v[counter] == d + 1 ? v[wBase + i] : v[i]] = 1.0;
    }));
  trans.push_back(tableFactor(joint, Scope{counter}, stretch,
                              [&](auto v, auto out) { out[(v[counter] + 1) % stretch] = 1.0; }));
  trans.push_back(tableFactor(joint, Scope{counter, astore, act}, static_cast<std::size_t>(A), [&](auto v, auto out) {
    if (v[counter] == 0)
      out[v[act] < A ? v[act] : 0] = 1.0;
    else if (v[counter] == d + 1)
      out[0] = 1.0;
    else
      out[v[astore]] = 1.0;
  }));
  for (std::size_t i = 0; i < d; ++i) {
    const Scope& z = spec.transScopes[i];
    std::vector<std::size_t> idx{counter, wBase + i, act, astore};
    for (auto f : z.indices())
      if (f < d) idx.push_back(f);
    trans.push_back(tableFactor(joint, Scope(idx), S.size(i), [&, i, z](auto v, auto out) {
      const std::size_t c = v[counter];
      if (c == i + 1) {
        const std::size_t dir = v[act] < S.size(i) ? v[act] : 0;
        row(i, originalIndex(z, v, v[astore]), dir, out);
      } else if (c == d + 1) {
        out[0] = 1.0;
      } else {
        out[v[wBase + i]] = 1.0;
      }
    }));
  }
  trans.push_back(tableFactor(joint, Scope{counter, bit, act}, 2, [&](auto v, auto out) {
    const std::size_t c = v[counter];
    if (!legal(c, v[act]))
      out[0] = 1.0;
    else
      out[c == 0 ? 1 : v[bit]] = 1.0;
  }));

  std::vector<RewardFactor> rewards;
  for (std::size_t j = 0; j < spec.rewardScopes.size(); ++j) {
    const Scope& z = spec.rewardScopes[j];
    std::vector<std::size_t> idx{counter, bit, act};
    for (auto f : z.indices())
      if (f < d) idx.push_back(f);
    rewards.push_back(rewardFactor(joint, Scope(idx), [&, j, z](auto v) {
      if (v[counter] != 0 || v[bit] != 1 || v[act] >= A) return 0.0;
      return static_cast<double>(reward(j, originalIndex(z, v, v[act])));
    }));
  }

  NfaModel out;
  out.model = Fmdp(FactorSpace(sizes), FactorSpace({spec.actionSize}), std::move(trans), std::move(rewards));
  out.stretch = stretch;
  out.d = d;
  out.originalActions = A;
  return out;
}

}  // namespace

NfaModel buildNfaOptimistic(const EmpiricalSnapshot& snap, const KnownScopes& known, const FactorSpace& states,
                            Index actionCount) {
  const std::size_t d = states.factorCount();
  if (known.transition.size() != d) throw DomainError("need one known scope per state factor");
  StretchSpec spec{&states, actionCount, std::max<std::size_t>(actionCount, states.maxFactorSize()),
                   known.transition, known.reward, true};
  std::vector<std::size_t> tid, rid;
  for (const auto& z : known.transition) tid.push_back(snap.scopeId(z));
  for (const auto& z : known.reward) rid.push_back(snap.scopeId(z));
  return buildStretched(
      spec,
      [&](std::size_t i, Index x, std::size_t dir, std::span<double> out) {
        optimisticFactorTransition(snap, i, tid[i], snap.projectCell(tid[i], x), dir, out);
      },
      [&](std::size_t j, Index x) { return optimisticReward(snap, j, rid[j], snap.projectCell(rid[j], x)); });
}

NfaModel buildMPrime(const Fmdp& model) {
  const auto known = KnownScopes::of(model);
  StretchSpec spec{&model.stateSpace(), model.actionCount(), static_cast<std::size_t>(model.actionCount()),
                   known.transition, known.reward, false};
  return buildStretched(
      spec,
      [&](std::size_t i, Index x, std::size_t, std::span<double> out) {
        const auto r = model.transitionRow(i, model.transitionProjector(i)(x));
        std::copy(r.begin(), r.end(), out.begin());
      },
      [&](std::size_t j, Index x) { return model.rewardMean(j, model.rewardProjector(j)(x)); });
}

}  // namespace fmdp

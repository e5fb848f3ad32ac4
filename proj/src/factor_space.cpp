#include "fmdp/factor_space.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "fmdp/error.hpp"

namespace fmdp {

FactorSpace::FactorSpace(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  strides_.resize(sizes_.size());
  Index card = 1;
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    if (sizes_[i] == 0) throw DomainError("factor " + std::to_string(i) + " has size 0");
    strides_[i] = card;
    if (card > kMaxCardinality / sizes_[i])
      throw SizeError("factor space cardinality exceeds 2^40");
    card *= sizes_[i];
  }
  cardinality_ = card;
}

std::size_t FactorSpace::maxFactorSize() const {
  std::size_t w = 1;
  for (auto s : sizes_) w = std::max(w, s);
  return w;
}

Index FactorSpace::encode(std::span<const std::size_t> tuple) const {
  if (tuple.size() != sizes_.size())
    throw DomainError("tuple length " + std::to_string(tuple.size()) + " != factor count " +
                      std::to_string(sizes_.size()));
  Index index = 0;
  for (std::size_t i = 0; i < tuple.size(); ++i) {
    if (tuple[i] >= sizes_[i])
      throw DomainError("value " + std::to_string(tuple[i]) + " out of range for factor " +
                        std::to_string(i));
    index += tuple[i] * strides_[i];
  }
  return index;
}

void FactorSpace::decode(Index index, std::span<std::size_t> out) const {
  if (index >= cardinality_) throw DomainError("index out of range");
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    out[i] = static_cast<std::size_t>(index % sizes_[i]);
    index /= sizes_[i];
  }
}

std::vector<std::size_t> FactorSpace::decode(Index index) const {
  std::vector<std::size_t> out(sizes_.size());
  decode(index, out);
  return out;
}

Scope::Scope(std::initializer_list<std::size_t> indices)
    : Scope(std::vector<std::size_t>(indices)) {}

Scope::Scope(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
  for (auto i : indices_) {
    if (i >= kMaxFactors) throw DomainError("scope index exceeds 63");
    mask_ |= std::uint64_t{1} << i;
  }
}

Scope Scope::fromMask(std::uint64_t mask) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < kMaxFactors; ++i)
    if ((mask >> i) & 1u) idx.push_back(i);
  return Scope(std::move(idx));
}

Scope Scope::positionsWithin(const Scope& super) const {
  if (!super.containsAll(*this)) throw DomainError("scope is not a subset");
  std::vector<std::size_t> pos;
  std::size_t k = 0;
  for (std::size_t p = 0; p < super.size(); ++p) {
    if (k < indices_.size() && super[p] == indices_[k]) {
      pos.push_back(p);
      ++k;
    }
  }
  return Scope(std::move(pos));
}

std::string Scope::toString() const {
  std::ostringstream os;
  os << '{';
  for (std::size_t k = 0; k < indices_.size(); ++k) os << (k ? "," : "") << indices_[k];
  os << '}';
  return os.str();
}

std::vector<std::size_t> project(std::span<const std::size_t> tuple, const Scope& scope) {
  std::vector<std::size_t> out;
  out.reserve(scope.size());
  for (auto i : scope.indices()) {
    if (i >= tuple.size()) throw DomainError("scope index outside tuple");
    out.push_back(tuple[i]);
  }
  return out;
}

FactorSpace subspace(const FactorSpace& space, const Scope& scope) {
  std::vector<std::size_t> sizes;
  for (auto i : scope.indices()) {
    if (i >= space.factorCount()) throw DomainError("scope index outside space");
    sizes.push_back(space.size(i));
  }
  return FactorSpace(std::move(sizes));
}

ScopeProjector::ScopeProjector(const FactorSpace& space, const Scope& scope) {
  Index sub = 1;
  for (auto i : scope.indices()) {
    if (i >= space.factorCount()) throw DomainError("scope index outside space");
    parts_.push_back({space.stride(i), space.size(i), sub});
    sub *= space.size(i);
  }
  cellCount_ = sub;
}

std::vector<Scope> enumerateScopes(std::size_t n, std::size_t m) {
  if (m > n) throw DomainError("scope size exceeds factor count");
  if (n > Scope::kMaxFactors) throw DomainError("at most 64 factors supported");
  std::vector<Scope> out;
  std::vector<std::size_t> combo(m);
  for (std::size_t k = 0; k < m; ++k) combo[k] = k;
  for (;;) {
    out.emplace_back(combo);
    // advance to the next combination in lexicographic order
    std::size_t k = m;
    while (k > 0 && combo[k - 1] == n - m + (k - 1)) --k;
    if (k == 0) break;
    ++combo[k - 1];
    for (std::size_t j = k; j < m; ++j) combo[j] = combo[j - 1] + 1;
  }
  return out;
}

std::vector<Scope> enumerateScopeFamily(std::size_t n, std::size_t lo, std::size_t hi) {
  hi = std::min(hi, n);
  std::vector<Scope> out;
  for (std::size_t size = lo; size <= hi; ++size) {
    auto layer = enumerateScopes(n, size);
    out.insert(out.end(), layer.begin(), layer.end());
  }
  return out;
}

std::vector<Scope> unionFamily(std::size_t n, std::size_t m) {
  if (m == 0 || m > n) throw DomainError("require 0 < m <= n");
  return enumerateScopeFamily(n, m, 2 * m);
}

Scope padScope(const Scope& scope, std::size_t m, std::size_t n) {
  if (scope.size() > m) throw DomainError("scope " + scope.toString() + " larger than m");
  std::uint64_t mask = scope.mask();
  std::size_t size = scope.size();
  for (std::size_t i = 0; i < n && size < m; ++i) {
    if (!((mask >> i) & 1u)) {
      mask |= std::uint64_t{1} << i;
      ++size;
    }
  }
  if (size < m) throw DomainError("not enough factors to pad scope");
  return Scope::fromMask(mask);
}

Index maxScopeCardinality(const FactorSpace& space, std::size_t m) {
  // the maximum of a product over size-m subsets is attained by the m largest factors
  std::vector<std::size_t> sizes(space.sizes().begin(), space.sizes().end());
  if (m > sizes.size()) throw DomainError("m exceeds factor count");
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  Index card = 1;
  for (std::size_t k = 0; k < m; ++k) card *= sizes[k];
  return card;
}

}  // namespace fmdp

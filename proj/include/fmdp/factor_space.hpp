#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace fmdp {

using Index = std::uint64_t;

/// Product of finite factors with mixed-radix indexing; factor 0 is least significant.
class FactorSpace {
 public:
  static constexpr Index kMaxCardinality = Index{1} << 40;

  FactorSpace() = default;
  explicit FactorSpace(std::vector<std::size_t> sizes);

  std::size_t factorCount() const { return sizes_.size(); }
  std::size_t size(std::size_t factor) const { return sizes_[factor]; }
  std::span<const std::size_t> sizes() const { return sizes_; }
  Index stride(std::size_t factor) const { return strides_[factor]; }
  Index cardinality() const { return cardinality_; }
  std::size_t maxFactorSize() const;

  Index encode(std::span<const std::size_t> tuple) const;
  std::vector<std::size_t> decode(Index index) const;
  void decode(Index index, std::span<std::size_t> out) const;
  /// Value of a single factor inside an encoded index.
  std::size_t valueOf(Index index, std::size_t factor) const {
    return static_cast<std::size_t>((index / strides_[factor]) % sizes_[factor]);
  }

  bool operator==(const FactorSpace& other) const { return sizes_ == other.sizes_; }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<Index> strides_;
  Index cardinality_ = 1;
};

/// Sorted, duplicate-free set of factor indices.
class Scope {
 public:
  static constexpr std::size_t kMaxFactors = 64;

  Scope() = default;
  Scope(std::initializer_list<std::size_t> indices);
  explicit Scope(std::vector<std::size_t> indices);
  static Scope fromMask(std::uint64_t mask);

  std::span<const std::size_t> indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  std::size_t operator[](std::size_t k) const { return indices_[k]; }
  std::uint64_t mask() const { return mask_; }

  bool contains(std::size_t factor) const { return (mask_ >> factor) & 1u; }
  bool containsAll(const Scope& other) const { return (other.mask_ & ~mask_) == 0; }
  Scope unite(const Scope& other) const { return fromMask(mask_ | other.mask_); }
  /// Positions of this scope's members inside `super` (which must contain them).
  Scope positionsWithin(const Scope& super) const;

  std::string toString() const;

  friend bool operator==(const Scope& a, const Scope& b) { return a.mask_ == b.mask_; }
  friend std::strong_ordering operator<=>(const Scope& a, const Scope& b) {
    return a.indices_ <=> b.indices_;
  }

 private:
  std::vector<std::size_t> indices_;
  std::uint64_t mask_ = 0;
};

/// Sub-tuple of `tuple` at the indices of `scope`, in scope order.
std::vector<std::size_t> project(std::span<const std::size_t> tuple, const Scope& scope);

/// The factor space X[Z].
FactorSpace subspace(const FactorSpace& space, const Scope& scope);

/// Maps an index of `space` to the index of its projection in X[Z] without decoding.
class ScopeProjector {
 public:
  ScopeProjector() = default;
  ScopeProjector(const FactorSpace& space, const Scope& scope);

  Index operator()(Index index) const {
    Index cell = 0;
    for (const auto& p : parts_) cell += ((index / p.fullStride) % p.size) * p.subStride;
    return cell;
  }
  Index cellCount() const { return cellCount_; }

 private:
  struct Part {
    Index fullStride;
    Index size;
    Index subStride;
  };
  std::vector<Part> parts_;
  Index cellCount_ = 1;
};

/// All size-m subsets of {0..n-1} in lexicographic order.
std::vector<Scope> enumerateScopes(std::size_t n, std::size_t m);

/// All subsets with size in [lo, hi] (hi clipped to n), ordered by size then lexicographically.
std::vector<Scope> enumerateScopeFamily(std::size_t n, std::size_t lo, std::size_t hi);

/// The family of all unions of two size-m scopes: sizes m..min(2m, n).
std::vector<Scope> unionFamily(std::size_t n, std::size_t m);

/// Pads `scope` with the lowest-index missing factors of {0..n-1} until it has size m.
Scope padScope(const Scope& scope, std::size_t m, std::size_t n);

/// max over size-m scopes of |X[Z]|, computed by enumeration.
Index maxScopeCardinality(const FactorSpace& space, std::size_t m);

}  // namespace fmdp

#include <doctest.h>

#include <set>

#include "fmdp/error.hpp"
#include "fmdp/factor_space.hpp"

using namespace fmdp;

TEST_CASE("mixed-radix encoding puts factor 0 first") {
  CHECK(FactorSpace({2, 2, 2}).encode(std::vector<std::size_t>{1, 0, 1}) == 5);
  CHECK(FactorSpace({3}).encode(std::vector<std::size_t>{2}) == 2);
  CHECK(FactorSpace({2, 3}).encode(std::vector<std::size_t>{1, 2}) == 5);
}

TEST_CASE("decode inverts encode on every index") {
  const FactorSpace X({3, 1, 4, 2});
  CHECK(X.cardinality() == 24);
  for (Index x = 0; x < X.cardinality(); ++x) {
    const auto t = X.decode(x);
    CHECK(X.encode(t) == x);
    for (std::size_t f = 0; f < t.size(); ++f) CHECK(X.valueOf(x, f) == t[f]);
  }
}

TEST_CASE("bad tuples and oversized spaces are rejected") {
  const FactorSpace X({2, 3});
  CHECK_THROWS_AS(X.encode(std::vector<std::size_t>{2, 0}), DomainError);
  CHECK_THROWS_AS(X.encode(std::vector<std::size_t>{0}), DomainError);
  CHECK_THROWS_AS(X.decode(6), DomainError);
  CHECK_THROWS_AS(FactorSpace(std::vector<std::size_t>(41, 2)), SizeError);
  CHECK_NOTHROW(FactorSpace(std::vector<std::size_t>(40, 2)));
}

TEST_CASE("projection selects scope positions") {
  const std::vector<std::size_t> x{4, 7, 1, 9};
  CHECK(project(x, Scope{0, 2}) == std::vector<std::size_t>{4, 1});
  CHECK(project(x, Scope{}).empty());
  CHECK(project(x, Scope{0, 1, 2, 3}) == x);
}

TEST_CASE("index projector agrees with tuple projection") {
  const FactorSpace X({2, 3, 2, 5});
  for (const auto& z : enumerateScopeFamily(4, 0, 4)) {
    const ScopeProjector proj(X, z);
    const FactorSpace sub = subspace(X, z);
    CHECK(proj.cellCount() == sub.cardinality());
    for (Index x = 0; x < X.cardinality(); ++x) CHECK(proj(x) == sub.encode(project(X.decode(x), z)));
  }
}

TEST_CASE("scope enumeration") {
  const auto s = enumerateScopes(3, 2);
  REQUIRE(s.size() == 3);
  CHECK(s[0] == Scope{0, 1});
  CHECK(s[1] == Scope{0, 2});
  CHECK(s[2] == Scope{1, 2});
  CHECK(enumerateScopes(4, 4) == std::vector<Scope>{Scope{0, 1, 2, 3}});
  CHECK(enumerateScopes(5, 3).size() == 10);

  // every union of two size-3 scopes of 5 factors, and nothing else
  std::set<std::uint64_t> unions;
  for (const auto& a : enumerateScopes(5, 3))
    for (const auto& b : enumerateScopes(5, 3)) unions.insert(a.unite(b).mask());
  const auto fam = unionFamily(5, 3);
  std::set<std::uint64_t> got;
  for (const auto& z : fam) {
    CHECK(z.size() >= 3);
    CHECK(z.size() <= 5);
    got.insert(z.mask());
  }
  CHECK(got == unions);
}

TEST_CASE("scope set operations") {
  const Scope a{1, 3}, b{0, 3, 4};
  CHECK(a.unite(b) == Scope{0, 1, 3, 4});
  CHECK(Scope{0, 1, 3, 4}.containsAll(a));
  CHECK_FALSE(a.containsAll(b));
  CHECK(a.positionsWithin(Scope{0, 1, 3, 4}) == Scope{1, 2});
  CHECK_THROWS_AS(b.positionsWithin(a), DomainError);
  CHECK(padScope(Scope{2}, 3, 5) == Scope{0, 1, 2});
  CHECK(a.toString() == "{1,3}");
  CHECK(Scope(std::vector<std::size_t>{3, 1, 3}) == a);
}

TEST_CASE("largest scope cardinality") {
  CHECK(maxScopeCardinality(FactorSpace({2, 2, 5}), 2) == 10);
  CHECK(maxScopeCardinality(FactorSpace({2, 2, 2, 2, 5}), 3) == 20);
}

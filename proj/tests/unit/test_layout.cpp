#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ctlab/errors.hpp"
#include "ctlab/layout.hpp"

using namespace ctlab;

namespace {

// Upper 99% point of chi-square with k degrees of freedom (Wilson-Hilferty).
double chi2_upper99(double k) {
  const double z = 2.3263478740408408;
  const double a = 2.0 / (9.0 * k);
  return k * std::pow(1 - a + z * std::sqrt(a), 3);
}

}  // namespace

TEST_CASE("standard table has 30 page-aligned classes") {
  const auto& t = SizeClassTable::standard();
  REQUIRE(t.size() == 30);
  CHECK(t.at(0).chunk_size == 0x20);
  CHECK(t.at(7).chunk_size == 0x100);
  CHECK(t.at(8).chunk_size == 0x200);
  CHECK(t.largest() == 0x10000);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const SizeClass c = t.at(i);
    CHECK(c.chunk_size % 0x10 == 0);
    CHECK(c.cluster_size() == 4096 * (c.chunk_size / 0x10));
    if (i > 0) CHECK(c.chunk_size > t.at(i - 1).chunk_size);
  }
  CHECK(t.large_region_id() == 31);
}

TEST_CASE("size_class_of picks the smallest fitting class") {
  const auto& t = SizeClassTable::standard();
  CHECK(t.size_class_of(0x18)->chunk_size == 0x20);
  CHECK(t.size_class_of(0x150)->chunk_size == 0x200);
  CHECK(t.size_class_of(0x10000)->chunk_size == 0x10000);
  CHECK_FALSE(t.size_class_of(0x10001).has_value());
  CHECK(t.size_class_of(0)->chunk_size == 0x20);
  CHECK(t.size_class_of(0x20)->chunk_size == 0x20);
  CHECK(t.size_class_of(0x21)->chunk_size == 0x40);
  for (std::uint64_t req = 1; req <= 0x10000; req += 7) {
    const SizeClass c = *t.size_class_of(req);
    CHECK(c.chunk_size >= req);
    if (c.index > 0) CHECK(t.at(c.index - 1).chunk_size < req);
  }
}

TEST_CASE("custom tables are validated") {
  CHECK_THROWS_AS(SizeClassTable({}), DomainError);
  CHECK_THROWS_AS(SizeClassTable({0x20, 0x20}), DomainError);
  CHECK_THROWS_AS(SizeClassTable({0x18}), DomainError);
  const SizeClassTable small({0x10, 0x40});
  CHECK(small.size_class_of(0x30)->chunk_size == 0x40);
}

TEST_CASE("region_of reads bits 40..47") {
  CHECK(region_of(std::uint64_t{0x0000'0500'0000'1000}) == 5);
  CHECK(region_of(region_base(30)) == 30);
  const TaggedAddress a{0x0000'0700'1234'5670ull};
  CHECK(region_of(tag_with(a, 0xFF)) == region_of(a));
}

TEST_CASE("first pool slot is uniform over the region") {
  constexpr int kDraws = 100000;
  std::vector<int> counts(kPoolsPerRegion);
  for (int i = 0; i < kDraws; ++i) {
    RegionLayout region(1, SizeClassTable::standard().at(0), 5);
    Rng rng(static_cast<std::uint64_t>(i) * 7919 + 1);
    const PoolState& pool = region.open_new_pool(rng);
    const std::uint64_t k = (pool.base - region.base()) / kPoolBytes;
    REQUIRE(pool.base % kPoolBytes == 0);
    REQUIRE(k < kPoolsPerRegion);
    ++counts[k];
  }
  const double expected = double(kDraws) / kPoolsPerRegion;
  double chi2 = 0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < chi2_upper99(kPoolsPerRegion - 1));
}

TEST_CASE("a region holds exactly 1024 pools") {
  RegionLayout region(2, SizeClassTable::standard().at(0), 5);
  Rng rng(5);
  std::vector<std::uint64_t> bases;
  for (std::size_t i = 0; i < kPoolsPerRegion; ++i) bases.push_back(region.open_new_pool(rng).base);
  CHECK_THROWS_AS(region.open_new_pool(rng), RegionFull);
  std::sort(bases.begin(), bases.end());
  CHECK(std::adjacent_find(bases.begin(), bases.end()) == bases.end());
  CHECK(bases.front() == region.base());
}

TEST_CASE("pool choice is deterministic per seed") {
  auto run = [](std::uint64_t seed) {
    RegionLayout region(3, SizeClassTable::standard().at(0), 5);
    Rng rng(seed);
    std::vector<std::uint64_t> bases;
    for (int i = 0; i < 20; ++i) bases.push_back(region.open_new_pool(rng).base);
    return bases;
  };
  CHECK(run(9) == run(9));
  CHECK(run(9) != run(10));
}

TEST_CASE("placements are disjoint, capped and keep a cluster-sized gap") {
  for (std::size_t ci : {std::size_t{0}, std::size_t{12}, std::size_t{29}}) {
    const SizeClass cls = SizeClassTable::standard().at(ci);
    CAPTURE(cls.chunk_size);
    RegionLayout region(SizeClassTable::region_id_for(ci), cls, 5);
    AddressSpace space;
    Rng rng(100 + ci);
    const int n = ci == 0 ? 10000 : 600;
    std::vector<std::uint64_t> bases;
    for (int i = 0; i < n; ++i) {
      const ClusterPlacement p = region.place_new_cluster(space, rng);
      REQUIRE(p.cluster_base % kPageSize == 0);
      REQUIRE(p.reservation.size == 2 * cls.cluster_size());
      REQUIRE(region_of(p.cluster_base) == region.region_id());
      const PoolState* pool = region.pool_containing(p.cluster_base);
      REQUIRE(pool != nullptr);
      REQUIRE(p.reservation.end() <= pool->base + kPoolBytes);
      REQUIRE_FALSE(space.is_resident(p.cluster_base + cls.cluster_size()));
      bases.push_back(p.cluster_base);
    }
    for (const PoolState& pool : region.pools()) CHECK(pool.used_bytes <= kPoolBytes / 5);
    std::sort(bases.begin(), bases.end());
    for (std::size_t i = 1; i < bases.size(); ++i) {
      // Occupied halves: [b, b + C). Next occupied half starts at least C
      // after the previous one ends.
      REQUIRE(bases[i] - (bases[i - 1] + cls.cluster_size()) >= cls.cluster_size());
    }
    CHECK(space.resident_pages() == std::uint64_t(n) * cls.cluster_size() / kPageSize);
  }
}

TEST_CASE("filling a pool to its cap opens another pool") {
  const SizeClass cls = SizeClassTable::standard().at(29);  // 16MB clusters
  RegionLayout region(30, cls, 5);
  AddressSpace space;
  Rng rng(1);
  const std::uint64_t per_pool = region.pool_capacity() / (2 * cls.cluster_size());
  REQUIRE(per_pool == 6);
  for (std::uint64_t i = 0; i < per_pool; ++i) region.place_new_cluster(space, rng);
  // Rejection sampling may open an extra pool early; the cap never bends.
  const std::size_t before = region.pools().size();
  for (int i = 0; i < 12; ++i) region.place_new_cluster(space, rng);
  CHECK(region.pools().size() > before);
  for (const PoolState& pool : region.pools()) CHECK(pool.used_bytes <= region.pool_capacity());
}

TEST_CASE("oversized clusters cannot be placed at high density") {
  const SizeClass cls = SizeClassTable::standard().at(29);
  RegionLayout region(30, cls, 64);  // cap 16MB < 32MB reservation
  AddressSpace space;
  Rng rng(1);
  CHECK_THROWS_AS(region.place_new_cluster(space, rng), PlacementExhausted);
}

TEST_CASE("release_cluster returns bytes to the pool") {
  const SizeClass cls = SizeClassTable::standard().at(0);
  RegionLayout region(1, cls, 5);
  AddressSpace space;
  Rng rng(4);
  const ClusterPlacement p = region.place_new_cluster(space, rng);
  CHECK(space.resident_pages() == 2);
  CHECK(region.release_cluster(space, p.cluster_base) == 2);
  CHECK(space.resident_pages() == 0);
  CHECK(space.reservation_count() == 0);
  CHECK(region.pools().front().used_bytes == 0);
  CHECK_THROWS_AS(region.release_cluster(space, p.cluster_base), UnknownRange);
}

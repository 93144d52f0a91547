#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "ctlab/errors.hpp"
#include "ctlab/tag_engine.hpp"

using namespace ctlab;

namespace {

ClusterState fresh_cluster(std::uint64_t seed, std::size_t allocatable = 239,
                           std::size_t quarantine = 16, ShadowMap* shadow = nullptr) {
  ClusterState c;
  c.base = region_base(1) + 0x4000'0000;
  c.size_class = SizeClassTable::standard().at(0);
  c.info_slots = kClusterSlots - allocatable;
  Rng rng(seed);
  ShadowMap scratch;
  init_cluster_tags(c, quarantine, rng, shadow ? *shadow : scratch);
  return c;
}

std::multiset<Tag> all_tags(const ClusterState& c) {
  std::multiset<Tag> out(c.quarantine.begin(), c.quarantine.end());
  for (std::size_t s = c.info_slots; s < kClusterSlots; ++s) out.insert(c.slots[s].tag);
  return out;
}

}  // namespace

TEST_CASE("fresh cluster uses every non-zero tag once") {
  ShadowMap shadow;
  shadow.write(region_base(1) + 0x4000'0000, 0x2000, 0x33);  // stale contents
  const ClusterState c = fresh_cluster(1, 239, 16, &shadow);
  std::multiset<Tag> expected;
  for (int t = 1; t <= 255; ++t) expected.insert(static_cast<Tag>(t));
  CHECK(all_tags(c) == expected);
  CHECK(c.quarantine.size() == 16);
  for (std::size_t s = 0; s < c.info_slots; ++s) {
    CHECK(c.slots[s].state == SlotState::Info);
    CHECK(c.slots[s].tag == 0);
  }
  for (std::size_t s = c.info_slots; s < kClusterSlots; ++s) {
    CHECK(c.slots[s].state == SlotState::Freed);
  }
  // ClusterInfo occupies 17 slots of 32 bytes.
  for (std::uint64_t a = c.base; a < c.base + 17 * 32; a += 16) CHECK(shadow.tag_at(a) == 0);
  verify_cluster_tags(c);
}

TEST_CASE("different seeds give different permutations") {
  const ClusterState a = fresh_cluster(1);
  const ClusterState b = fresh_cluster(2);
  bool differ = false;
  for (std::size_t s = 0; s < kClusterSlots; ++s) differ = differ || a.slots[s].tag != b.slots[s].tag;
  CHECK(differ);
}

TEST_CASE("too many allocatable slots for the quarantine is rejected") {
  ClusterState c;
  c.size_class = SizeClassTable::standard().at(0);
  c.info_slots = 1;  // 255 allocatable
  Rng rng(1);
  ShadowMap shadow;
  CHECK_THROWS_AS(init_cluster_tags(c, 16, rng, shadow), DomainError);
}

TEST_CASE("rotate_right shifts the ring one position") {
  std::vector<Tag> ring = {0x93, 0xD6, 0x8D, 0x27, 0x7E};
  rotate_right(ring);
  CHECK(ring == std::vector<Tag>{0x7E, 0x93, 0xD6, 0x8D, 0x27});
  std::vector<Tag> one = {5};
  rotate_right(one);
  CHECK(one == std::vector<Tag>{5});
}

TEST_CASE("ring lists quarantine then freed slots by index") {
  ClusterState c = fresh_cluster(3);
  for (std::size_t s = c.info_slots; s < kClusterSlots; ++s) c.slots[s].state = SlotState::InUse;
  c.in_use = static_cast<std::uint32_t>(c.allocatable());
  c.slots[200].state = SlotState::Freed;
  c.slots[40].state = SlotState::Freed;
  c.in_use -= 2;
  const std::vector<Tag> ring = tag_ring(c);
  REQUIRE(ring.size() == 18);
  CHECK(std::equal(c.quarantine.begin(), c.quarantine.end(), ring.begin()));
  CHECK(ring[16] == c.slots[40].tag);
  CHECK(ring[17] == c.slots[200].tag);
}

TEST_CASE("rotation with no freed slots only permutes the quarantine") {
  ClusterState c = fresh_cluster(4);
  for (std::size_t s = c.info_slots; s < kClusterSlots; ++s) c.slots[s].state = SlotState::InUse;
  c.in_use = static_cast<std::uint32_t>(c.allocatable());
  const auto slots_before = c.slots;
  std::vector<Tag> q = c.quarantine;
  rotate_tags(c);
  rotate_right(q);
  CHECK(c.quarantine == q);
  for (std::size_t s = 0; s < kClusterSlots; ++s) CHECK(c.slots[s].tag == slots_before[s].tag);
  CHECK(c.reuse_rounds == 1);
}

TEST_CASE("rotation conserves tags and changes every freed slot") {
  Rng rng(8);
  ClusterState c = fresh_cluster(5);
  for (int round = 0; round < 2000; ++round) {
    // Random live/free mix, then rotate.
    for (std::size_t s = c.info_slots; s < kClusterSlots; ++s) {
      const bool live = rng() % 3 == 0;
      c.slots[s].state = live ? SlotState::InUse : SlotState::Freed;
    }
    c.in_use = static_cast<std::uint32_t>(std::count_if(
        c.slots.begin(), c.slots.end(), [](const Slot& s) { return s.state == SlotState::InUse; }));
    const auto before = all_tags(c);
    const auto slots_before = c.slots;
    const std::size_t ring_len = tag_ring(c).size();
    rotate_tags(c);
    REQUIRE(all_tags(c) == before);
    verify_cluster_tags(c);
    for (std::size_t s = c.info_slots; s < kClusterSlots; ++s) {
      if (c.slots[s].state == SlotState::InUse) {
        REQUIRE(c.slots[s].tag == slots_before[s].tag);
      } else if (ring_len >= 2) {
        REQUIRE(c.slots[s].tag != slots_before[s].tag);
      }
    }
  }
}

TEST_CASE("static ring returns a tag after exactly ring-length rotations") {
  // Brute force over every ring size Q..Q+239: with membership fixed, the
  // tag leaving slot s comes back to s after exactly Q + freed rotations.
  constexpr std::size_t Q = 16;
  for (std::size_t freed = 0; freed <= 239; ++freed) {
    ClusterState c = fresh_cluster(freed + 10);
    for (std::size_t s = c.info_slots; s < kClusterSlots; ++s) {
      c.slots[s].state = (s - c.info_slots) < freed ? SlotState::Freed : SlotState::InUse;
    }
    c.in_use = static_cast<std::uint32_t>(239 - freed);
    if (freed == 0) continue;
    const std::size_t watched = c.info_slots;
    const Tag t = c.slots[watched].tag;
    std::size_t rotations = 0;
    do {
      rotate_tags(c);
      ++rotations;
    } while (c.slots[watched].tag != t);
    CHECK(rotations == Q + freed);
    CHECK(rotations >= min_temporal_gap(Q));
  }
}

TEST_CASE("dynamic membership never repeats a slot tag within Q rotations") {
  for (std::size_t Q : {std::size_t{1}, std::size_t{4}, std::size_t{16}}) {
    CAPTURE(Q);
    Rng rng(Q * 31);
    ClusterState c = fresh_cluster(Q, 239, Q);
    std::map<std::pair<std::size_t, Tag>, std::uint64_t> last;  // (slot, tag) -> rotation
    for (std::size_t s = c.info_slots; s < kClusterSlots; ++s) last[{s, c.slots[s].tag}] = 0;
    std::uint64_t min_gap = ~std::uint64_t{0};
    for (std::uint64_t r = 1; r <= 20000; ++r) {
      for (std::size_t s = c.info_slots; s < kClusterSlots; ++s) {
        if (rng() % 4 == 0) {
          c.slots[s].state = c.slots[s].state == SlotState::InUse ? SlotState::Freed : SlotState::InUse;
        }
      }
      c.in_use = static_cast<std::uint32_t>(std::count_if(
          c.slots.begin(), c.slots.end(), [](const Slot& s) { return s.state == SlotState::InUse; }));
      rotate_tags(c);
      for (std::size_t s = c.info_slots; s < kClusterSlots; ++s) {
        if (c.slots[s].state != SlotState::Freed) continue;
        auto [it, inserted] = last.try_emplace({s, c.slots[s].tag}, r);
        if (!inserted) {
          if (it->second != r) min_gap = std::min(min_gap, r - it->second);
          it->second = r;
        }
      }
    }
    CHECK(min_gap >= min_temporal_gap(Q));
    CHECK(min_gap >= Q + 1);
  }
}

TEST_CASE("min_temporal_gap is the quarantine size") {
  CHECK(min_temporal_gap(16) == 16);
  CHECK(min_temporal_gap(1) == 1);
}

TEST_CASE("verify_cluster_tags catches duplicates, zero tags and bad counters") {
  ClusterState c = fresh_cluster(6);
  verify_cluster_tags(c);

  ClusterState dup = c;
  dup.slots[100].tag = dup.slots[101].tag;
  CHECK_THROWS_AS(verify_cluster_tags(dup), InvariantViolation);

  ClusterState zero = c;
  zero.quarantine[0] = 0;
  CHECK_THROWS_AS(verify_cluster_tags(zero), InvariantViolation);

  ClusterState counters = c;
  counters.in_use = 3;
  CHECK_THROWS_AS(verify_cluster_tags(counters), InvariantViolation);
}

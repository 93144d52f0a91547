// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctlab/tag_engine.hpp"

#include <algorithm>
#include <bitset>
#include <numeric>
#include <string>

#include "ctlab/errors.hpp"

namespace ctlab {

void init_cluster_tags(ClusterState& cluster, std::size_t quarantine, Rng& rng,
                       ShadowMap& shadow) {
  const std::size_t allocatable = cluster.allocatable();
  if (allocatable + quarantine > 255) {
    throw DomainError("allocatable + quarantine must not exceed 255 tags");
  }
  std::array<Tag, 255> tags;
  std::iota(tags.begin(), tags.end(), Tag{1});
  std::shuffle(tags.begin(), tags.end(), rng);

  for (std::size_t s = 0; s < cluster.info_slots; ++s) cluster.slots[s] = Slot{};
  for (std::size_t i = 0; i < allocatable; ++i) {
    cluster.slots[cluster.info_slots + i] = Slot{SlotState::Freed, tags[i], false};
  }
  cluster.quarantine.assign(tags.begin() + static_cast<std::ptrdiff_t>(allocatable),
                            tags.begin() + static_cast<std::ptrdiff_t>(allocatable + quarantine));
  cluster.in_use = 0;
  cluster.cached = 0;
  cluster.reuse_rounds = 0;

  const std::uint64_t info_bytes = round_up(cluster.info_slots * cluster.chunk_size(), shadow.granule_bytes());
  if (info_bytes > 0) shadow.write(cluster.base, info_bytes, 0);
}

std::vector<Tag> tag_ring(const ClusterState& cluster) {
  std::vector<Tag> ring(cluster.quarantine);
  for (std::size_t s = cluster.info_slots; s < kClusterSlots; ++s) {
    const Slot& slot = cluster.slots[s];
    if (slot.state == SlotState::Freed && !slot.cached) ring.push_back(slot.tag);
  }
  return ring;
}

void rotate_right(std::span<Tag> ring) {
  if (ring.size() < 2) return;
  std::rotate(ring.rbegin(), ring.rbegin() + 1, ring.rend());
}

void rotate_tags(ClusterState& cluster) {
  std::vector<Tag> ring = tag_ring(cluster);
  rotate_right(ring);
  const std::size_t q = cluster.quarantine.size();
  std::copy_n(ring.begin(), q, cluster.quarantine.begin());
  std::size_t pos = q;
  for (std::size_t s = cluster.info_slots; s < kClusterSlots; ++s) {
    Slot& slot = cluster.slots[s];
    if (slot.state == SlotState::Freed && !slot.cached) slot.tag = ring[pos++];
  }
  ++cluster.reuse_rounds;
}

void verify_cluster_tags(const ClusterState& cluster) {
  std::bitset<256> seen;
  auto claim = [&](Tag t, const char* where) {
    if (t == 0) {
      throw InvariantViolation(std::string("tag 0 found on ") + where + " of cluster at " +
                               std::to_string(cluster.base));
    }
    if (seen.test(t)) {
      throw InvariantViolation("duplicate tag " + std::to_string(t) + " in cluster at " +
                               std::to_string(cluster.base));
    }
    seen.set(t);
  };
  for (Tag t : cluster.quarantine) claim(t, "quarantine");
  std::uint32_t in_use = 0;
  std::uint32_t cached = 0;
  for (std::size_t s = 0; s < kClusterSlots; ++s) {
    const Slot& slot = cluster.slots[s];
    if (s < cluster.info_slots) {
      if (slot.state != SlotState::Info || slot.tag != 0) {
        throw InvariantViolation("ClusterInfo slot carries a chunk");
      }
      continue;
    }
    if (slot.state == SlotState::Info) throw InvariantViolation("allocatable slot marked Info");
    claim(slot.tag, "slot");
    if (slot.state == SlotState::InUse) ++in_use;
    if (slot.cached) {
      if (slot.state != SlotState::Freed) throw InvariantViolation("cached slot is not Freed");
      ++cached;
    }
  }
  if (in_use != cluster.in_use || cached != cluster.cached) {
    throw InvariantViolation("cluster slot counters out of sync");
  }
}

}  // namespace ctlab

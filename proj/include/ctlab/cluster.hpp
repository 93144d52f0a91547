// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ctlab/address.hpp"
#include "ctlab/layout.hpp"

namespace ctlab {

enum class SlotState : std::uint8_t {
  Info,   ///< Occupied by ClusterInfo metadata, tag 0.
  InUse,  ///< Handed out; tag is the live key.
  Freed,  ///< Free; tag is the previous (or pending) assignment, never 0.
};

struct Slot {
  SlotState state = SlotState::Info;
  Tag tag = 0;
  /// Freed slot sitting in the allocator's cache waiting to be handed out.
  bool cached = false;
};

/// 256 same-size slots. The leading info_slots hold ClusterInfo; the rest are
/// allocatable. Together with the quarantine list every non-zero tag in the
/// cluster is distinct.
struct ClusterState {
  std::uint64_t base = 0;
  SizeClass size_class;
  std::size_t info_slots = 0;
  std::array<Slot, kClusterSlots> slots{};
  std::vector<Tag> quarantine;
  std::uint64_t reuse_rounds = 0;
  std::uint32_t in_use = 0;
  std::uint32_t cached = 0;

  std::uint64_t chunk_size() const { return size_class.chunk_size; }
  std::uint64_t size() const { return size_class.cluster_size(); }
  std::uint64_t slot_address(std::size_t slot) const { return base + slot * chunk_size(); }
  bool contains(std::uint64_t addr) const { return addr >= base && addr < base + size(); }
  std::size_t allocatable() const { return kClusterSlots - info_slots; }
  /// Freed slots not already claimed by the cache.
  std::size_t idle_slots() const { return allocatable() - in_use - cached; }
};

}  // namespace ctlab

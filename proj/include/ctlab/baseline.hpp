// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference tag-assignment families for comparison with ClusterTag. Each
// baseline allocates every size class contiguously from a flat arena and
// reuses freed slots LIFO; only the tag policy differs between kinds.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ctlab/allocator_model.hpp"
#include "ctlab/layout.hpp"

namespace ctlab {

enum class StrategyKind {
  Random,            ///< fresh uniform tag on every assignment
  RandomWithHeader,  ///< Random plus a tag-0 header granule before each chunk
  Staggered,         ///< even/odd slots draw from disjoint tag halves
  FixedTemporal,     ///< random first tag, +1 on every reuse
  StickySpatial,     ///< slot index mod 2^TS, never changes
};

std::string_view to_string(StrategyKind kind);
/// Accepts the CLI spellings: random, random-header, staggered,
/// fixed-temporal, sticky.
std::optional<StrategyKind> parse_strategy(std::string_view name);

class StrategyModel {
 public:
  StrategyModel(StrategyKind kind, unsigned tag_bits);

  StrategyKind kind() const { return kind_; }
  unsigned tag_bits() const { return tag_bits_; }
  unsigned tag_space() const { return 1u << tag_bits_; }

  /// Tag for the first use of a slot.
  Tag assign_spatial(std::uint64_t slot_index, Rng& rng) const;
  /// Tag for a slot coming back from the free list.
  Tag assign_temporal(Tag prev_tag, Rng& rng) const;

 private:
  StrategyKind kind_;
  unsigned tag_bits_;
};

struct BaselineConfig {
  std::uint64_t seed = 1;
  unsigned tag_bits = 8;
  SizeClassTable classes = SizeClassTable::standard();
};

class BaselineAllocator final : public AllocatorModel {
 public:
  BaselineAllocator(StrategyKind kind, BaselineConfig config = {});

  std::string name() const override { return std::string(to_string(strategy_.kind())); }
  TaggedAddress allocate(std::uint64_t size) override;
  void deallocate(TaggedAddress addr) override;
  AccessResult check_access(TaggedAddress addr, std::uint64_t len) const override;
  std::optional<LiveChunk> chunk_at(std::uint64_t untagged) const override;
  std::vector<LiveChunk> live_chunks() const override;
  std::span<const AllocRecord> history() const override { return history_; }
  ModelStats stats() const override;
  const ShadowMap& shadow() const override { return shadow_; }

  const StrategyModel& strategy() const { return strategy_; }
  /// Bytes between consecutive slots of a class (chunk plus header if any).
  std::uint64_t stride(std::size_t class_index) const;
  /// Untagged address of slot i of a class.
  std::uint64_t slot_address(std::size_t class_index, std::uint64_t slot) const;

 private:
  struct SlotInfo {
    Tag tag = 0;
    bool live = false;
  };
  struct Arena {
    std::vector<SlotInfo> slots;
    std::vector<std::uint32_t> free_list;
    std::uint64_t reserved_end = 0;
  };
  struct LargeObject {
    std::uint64_t size;
    Tag tag;
  };

  std::uint64_t header_bytes() const;
  TaggedAddress allocate_large(std::uint64_t size);
  void deallocate_large(TaggedAddress addr);
  void record(TaggedAddress addr, std::size_t size_class, std::uint64_t chunk_bytes);

  StrategyModel strategy_;
  BaselineConfig config_;
  Rng rng_;
  AddressSpace space_;
  ShadowMap shadow_;
  std::vector<Arena> arenas_;
  std::map<std::uint64_t, LargeObject> large_;
  std::set<std::uint64_t> released_large_;
  std::uint64_t large_next_ = 0;
  std::uint64_t large_count_ = 0;
  std::vector<AllocRecord> history_;
  ModelStats stats_;
};

}  // namespace ctlab

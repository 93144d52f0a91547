// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// The cluster-based allocator. Small requests are served from a per-class
// cache array; an empty cache is refilled from a uniformly chosen idle
// cluster (whose tags are rotated first) or, failing that, from a freshly
// placed cluster. Large requests get their own randomly placed mapping.
// Every K deallocations in a region the cluster chain is scanned: fully
// free clusters are unmapped, long runs of free pages are decommitted.

#pragma once

#include <cstdint>
#include <list>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "ctlab/allocator_model.hpp"
#include "ctlab/cluster.hpp"
#include "ctlab/layout.hpp"

namespace ctlab {

struct ClusterTagConfig {
  std::uint64_t seed = 1;
  std::uint64_t density = 5;
  std::size_t quarantine = 16;
  /// Slots handed out per cluster; the remaining leading slots hold
  /// ClusterInfo. allocatable + quarantine must not exceed 255.
  std::size_t allocatable = 239;
  std::size_t cache_capacity = 64;
  /// Deallocations per region between chain scans (0 disables scanning).
  std::size_t scan_period = 1024;
  /// Minimum run of free pages released by a fragmented release.
  std::size_t page_threshold = 4;
  /// Check tag uniqueness and shadow consistency of every touched cluster
  /// after each operation.
  bool verify = false;
  SizeClassTable classes = SizeClassTable::standard();
};

struct ReleaseReport {
  std::uint64_t full_released = 0;
  std::uint64_t pages_released = 0;

  friend bool operator==(const ReleaseReport&, const ReleaseReport&) = default;
};

class ClusterTagAllocator final : public AllocatorModel {
 public:
  explicit ClusterTagAllocator(ClusterTagConfig config = {});

  std::string name() const override { return "clustertag"; }
  TaggedAddress allocate(std::uint64_t size) override;
  void deallocate(TaggedAddress addr) override;
  AccessResult check_access(TaggedAddress addr, std::uint64_t len) const override;
  std::optional<LiveChunk> chunk_at(std::uint64_t untagged) const override;
  std::vector<LiveChunk> live_chunks() const override;
  std::span<const AllocRecord> history() const override { return history_; }
  ModelStats stats() const override;
  const ShadowMap& shadow() const override { return shadow_; }

  /// Loads the class cache. Public so tests can drive refills directly;
  /// allocate() calls it whenever the cache runs dry.
  void refill_cache(std::size_t class_index);
  ReleaseReport periodic_scan(std::size_t class_index);

  /// Full sweep of the structural invariants; throws InvariantViolation.
  void audit() const;

  const ClusterTagConfig& config() const { return config_; }
  const AddressSpace& space() const { return space_; }
  const ClusterState* cluster_at(std::uint64_t untagged) const;
  /// Live clusters of a class in chain order.
  std::vector<const ClusterState*> clusters(std::size_t class_index) const;
  /// Null until the class has been used.
  const RegionLayout* layout(std::size_t class_index) const;
  std::size_t cache_size(std::size_t class_index) const;
  /// Index of the idle cluster picked by the most recent reuse refill, in
  /// chain order at the time of the pick.
  std::optional<std::size_t> last_reuse_pick() const { return last_reuse_pick_; }

 private:
  struct CacheEntry {
    ClusterState* cluster;
    std::uint16_t slot;
  };
  struct Region {
    RegionLayout layout;
    std::list<ClusterState> chain;
    std::map<std::uint64_t, std::list<ClusterState>::iterator> by_base;
    std::vector<CacheEntry> cache;
    std::uint64_t deallocations = 0;
  };
  struct LargeObject {
    std::uint64_t size;
    Tag tag;
  };

  Region& region(std::size_t class_index);
  const Region* find_region(std::size_t class_index) const;
  ClusterState* find_cluster(std::size_t class_index, std::uint64_t untagged);
  const ClusterState* find_cluster(std::size_t class_index, std::uint64_t untagged) const;
  void load_cache(Region& r, ClusterState& cluster);
  TaggedAddress allocate_small(SizeClass cls);
  TaggedAddress allocate_large(std::uint64_t size);
  void deallocate_large(TaggedAddress addr);
  void record(TaggedAddress addr, std::size_t size_class, std::uint64_t chunk_bytes);
  void verify_chunk(const ClusterState& cluster, std::size_t slot) const;

  ClusterTagConfig config_;
  Rng rng_;
  AddressSpace space_;
  ShadowMap shadow_;
  std::vector<std::unique_ptr<Region>> regions_;
  std::map<std::uint64_t, LargeObject> large_;
  std::set<std::uint64_t> released_large_;
  std::vector<AllocRecord> history_;
  std::optional<std::size_t> last_reuse_pick_;
  ModelStats stats_;
};

}  // namespace ctlab

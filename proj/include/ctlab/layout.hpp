// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Size classes and the Region -> Pool -> Cluster placement hierarchy.
//
// Each size class owns one 1TB region whose id is recoverable from address
// bits 40..47. A region is carved into 1024 pool slots of 1GB; pools are
// opened at random slots on demand and each admits at most 1GB/d bytes of
// cluster reservations. A cluster reservation is twice the cluster size and
// only its first half is ever handed out, which keeps occupied halves of
// neighbouring clusters at least one cluster apart.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "ctlab/address.hpp"

namespace ctlab {

using Rng = std::mt19937_64;

inline constexpr std::size_t kClusterSlots = 256;
inline constexpr std::uint64_t kPoolBytes = std::uint64_t{1} << 30;
inline constexpr std::uint64_t kRegionBytes = std::uint64_t{1} << 40;
inline constexpr std::size_t kPoolsPerRegion = kRegionBytes / kPoolBytes;
inline constexpr std::uint64_t kLargeObjectThreshold = 0x10000;
inline constexpr int kPlacementRetries = 64;

struct SizeClass {
  std::size_t index = 0;
  std::uint64_t chunk_size = 0;

  constexpr std::uint64_t cluster_size() const { return kClusterSlots * chunk_size; }
  friend constexpr bool operator==(SizeClass, SizeClass) = default;
};

/// Ordered chunk sizes. Lookup returns the smallest class that fits, or
/// nullopt for requests above the largest class (large objects).
class SizeClassTable {
 public:
  /// Validates: non-empty, strictly increasing, multiples of 0x10, at most
  /// 254 entries (region ids must fit in 8 bits after the offset below).
  explicit SizeClassTable(std::vector<std::uint64_t> chunk_sizes);

  /// The 30-class default: 0x20..0x100 step 0x20, 0x200..0xF00 step 0x100,
  /// 0x2000..0x10000 step 0x2000.
  static const SizeClassTable& standard();

  /// Requests of 0 bytes map to the smallest class.
  std::optional<SizeClass> size_class_of(std::uint64_t request) const;

  SizeClass at(std::size_t index) const { return {index, sizes_.at(index)}; }
  std::size_t size() const { return sizes_.size(); }
  std::uint64_t largest() const { return sizes_.back(); }
  const std::vector<std::uint64_t>& chunk_sizes() const { return sizes_; }

  /// Region 0 is never used; class i lives in region i + 1 and the large
  /// object region follows the last class.
  static constexpr std::uint8_t region_id_for(std::size_t class_index) {
    return static_cast<std::uint8_t>(class_index + 1);
  }
  std::uint8_t large_region_id() const { return static_cast<std::uint8_t>(sizes_.size() + 1); }

 private:
  std::vector<std::uint64_t> sizes_;
};

constexpr std::uint8_t region_of(TaggedAddress addr) {
  return static_cast<std::uint8_t>((addr.untagged() >> 40) & 0xFF);
}
constexpr std::uint8_t region_of(std::uint64_t untagged) {
  return static_cast<std::uint8_t>((untagged >> 40) & 0xFF);
}
constexpr std::uint64_t region_base(std::uint8_t region_id) {
  return static_cast<std::uint64_t>(region_id) << 40;
}

struct PoolState {
  std::uint64_t base = 0;
  std::uint64_t used_bytes = 0;
  /// Cluster reservations inside this pool: base -> size (2x cluster size).
  std::map<std::uint64_t, std::uint64_t> placements;
};

/// Where a new cluster landed.
struct ClusterPlacement {
  std::uint64_t cluster_base = 0;
  AddressRange reservation;  ///< The full 2x range; first half is the cluster.
  std::size_t pool_index = 0;
};

/// Pool bookkeeping and randomized cluster placement for one region.
class RegionLayout {
 public:
  RegionLayout(std::uint8_t region_id, SizeClass size_class, std::uint64_t density);

  std::uint8_t region_id() const { return region_id_; }
  std::uint64_t base() const { return region_base(region_id_); }
  SizeClass size_class() const { return size_class_; }
  std::uint64_t density() const { return density_; }
  /// floor(1GB / d).
  std::uint64_t pool_capacity() const { return kPoolBytes / density_; }

  /// Opens a uniformly random unopened pool slot. Throws RegionFull once all
  /// 1024 slots are open.
  PoolState& open_new_pool(Rng& rng);

  /// Reserves a 2x cluster range at a random page-aligned offset in a pool
  /// with room left under the density cap (opening pools as needed), then
  /// decommits the second half. Throws PlacementExhausted when no pool can
  /// take the cluster.
  ClusterPlacement place_new_cluster(AddressSpace& space, Rng& rng);

  /// Unreserves a cluster placed by place_new_cluster and returns its bytes
  /// to the pool. Returns the pages that stopped being resident.
  std::uint64_t release_cluster(AddressSpace& space, std::uint64_t cluster_base);

  const std::vector<PoolState>& pools() const { return pools_; }
  std::size_t unopened_pools() const { return unopened_.size(); }
  /// Pool that contains addr, if any is open there.
  const PoolState* pool_containing(std::uint64_t addr) const;

 private:
  bool try_place_in(std::size_t pool_index, AddressSpace& space, Rng& rng,
                    ClusterPlacement& out);

  std::uint8_t region_id_;
  SizeClass size_class_;
  std::uint64_t density_;
  std::vector<PoolState> pools_;
  std::vector<std::uint32_t> unopened_;
  std::map<std::uint64_t, std::size_t> pool_by_base_;
};

}  // namespace ctlab

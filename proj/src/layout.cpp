// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctlab/layout.hpp"

#include <algorithm>
#include <iterator>
#include <numeric>
#include <string>

#include "ctlab/errors.hpp"

namespace ctlab {

SizeClassTable::SizeClassTable(std::vector<std::uint64_t> chunk_sizes)
    : sizes_(std::move(chunk_sizes)) {
  if (sizes_.empty()) throw DomainError("size class table is empty");
  if (sizes_.size() > 254) throw DomainError("too many size classes for 8-bit region ids");
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    if (sizes_[i] == 0 || sizes_[i] % kGranuleSize != 0) {
      throw DomainError("chunk size " + std::to_string(sizes_[i]) +
                        " is not a positive multiple of 16");
    }
    if (i > 0 && sizes_[i] <= sizes_[i - 1]) {
      throw DomainError("chunk sizes must be strictly increasing");
    }
  }
}

const SizeClassTable& SizeClassTable::standard() {
  static const SizeClassTable table = [] {
    std::vector<std::uint64_t> sizes;
    for (std::uint64_t s = 0x20; s <= 0x100; s += 0x20) sizes.push_back(s);
    for (std::uint64_t s = 0x200; s <= 0xF00; s += 0x100) sizes.push_back(s);
    for (std::uint64_t s = 0x2000; s <= 0x10000; s += 0x2000) sizes.push_back(s);
    return SizeClassTable(std::move(sizes));
  }();
  return table;
}

std::optional<SizeClass> SizeClassTable::size_class_of(std::uint64_t request) const {
  if (request > sizes_.back()) return std::nullopt;
  auto it = std::lower_bound(sizes_.begin(), sizes_.end(), request);
  const auto index = static_cast<std::size_t>(it - sizes_.begin());
  return SizeClass{index, *it};
}

RegionLayout::RegionLayout(std::uint8_t region_id, SizeClass size_class,
                           std::uint64_t density)
    : region_id_(region_id), size_class_(size_class), density_(density) {
  if (density == 0) throw DomainError("density must be >= 1");
  unopened_.resize(kPoolsPerRegion);
  std::iota(unopened_.begin(), unopened_.end(), 0u);
}

PoolState& RegionLayout::open_new_pool(Rng& rng) {
  if (unopened_.empty()) {
    throw RegionFull("region " + std::to_string(region_id_) + " has no unopened pool slots");
  }
  std::uniform_int_distribution<std::size_t> pick(0, unopened_.size() - 1);
  const std::size_t i = pick(rng);
  const std::uint32_t slot = unopened_[i];
  unopened_[i] = unopened_.back();
  unopened_.pop_back();

  PoolState pool;
  pool.base = base() + static_cast<std::uint64_t>(slot) * kPoolBytes;
  pool_by_base_.emplace(pool.base, pools_.size());
  pools_.push_back(std::move(pool));
  return pools_.back();
}

bool RegionLayout::try_place_in(std::size_t pool_index, AddressSpace& space, Rng& rng,
                                ClusterPlacement& out) {
  PoolState& pool = pools_[pool_index];
  const std::uint64_t span = 2 * size_class_.cluster_size();
  const std::uint64_t last_page = (kPoolBytes - span) / kPageSize;
  std::uniform_int_distribution<std::uint64_t> pick(0, last_page);
  for (int attempt = 0; attempt < kPlacementRetries; ++attempt) {
    const std::uint64_t base = pool.base + pick(rng) * kPageSize;
    auto next = pool.placements.lower_bound(base);
    if (next != pool.placements.end() && next->first < base + span) continue;
    if (next != pool.placements.begin()) {
      auto prev = std::prev(next);
      if (prev->first + prev->second > base) continue;
    }
    const AddressRange reservation = space.reserve(base, span);
    space.release({base + size_class_.cluster_size(), size_class_.cluster_size()});
    pool.placements.emplace_hint(next, base, span);
    pool.used_bytes += span;
    out = ClusterPlacement{base, reservation, pool_index};
    return true;
  }
  return false;
}

ClusterPlacement RegionLayout::place_new_cluster(AddressSpace& space, Rng& rng) {
  const std::uint64_t span = 2 * size_class_.cluster_size();
  if (span > pool_capacity()) {
    throw PlacementExhausted("a " + std::to_string(span) +
                             "-byte cluster reservation exceeds the pool cap at density " +
                             std::to_string(density_));
  }
  std::vector<std::size_t> admitting;
  for (std::size_t i = 0; i < pools_.size(); ++i) {
    if (pools_[i].used_bytes + span <= pool_capacity()) admitting.push_back(i);
  }
  ClusterPlacement placement;
  if (!admitting.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, admitting.size() - 1);
    if (try_place_in(admitting[pick(rng)], space, rng, placement)) return placement;
  }
  try {
    open_new_pool(rng);
  } catch (const RegionFull& e) {
    throw PlacementExhausted(e.what());
  }
  if (try_place_in(pools_.size() - 1, space, rng, placement)) return placement;
  throw PlacementExhausted("no free offset found in a fresh pool");
}

std::uint64_t RegionLayout::release_cluster(AddressSpace& space, std::uint64_t cluster_base) {
  auto pit = pool_by_base_.upper_bound(cluster_base);
  if (pit == pool_by_base_.begin()) throw UnknownRange("cluster is outside every pool");
  --pit;
  PoolState& pool = pools_[pit->second];
  auto it = pool.placements.find(cluster_base);
  if (it == pool.placements.end()) throw UnknownRange("no cluster placed at this base");
  const std::uint64_t dropped = space.release({cluster_base, it->second});
  pool.used_bytes -= it->second;
  pool.placements.erase(it);
  return dropped;
}

const PoolState* RegionLayout::pool_containing(std::uint64_t addr) const {
  auto it = pool_by_base_.upper_bound(addr);
  if (it == pool_by_base_.begin()) return nullptr;
  --it;
  const PoolState& pool = pools_[it->second];
  return addr < pool.base + kPoolBytes ? &pool : nullptr;
}

}  // namespace ctlab

// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctlab/clustertag_alloc.hpp"

#include <algorithm>
#include <string>
#include <unordered_map>

#include "ctlab/errors.hpp"
#include "ctlab/tag_engine.hpp"

namespace ctlab {
namespace {

AddressRange page_span(std::uint64_t base, std::uint64_t size) {
  const std::uint64_t first = base / kPageSize * kPageSize;
  return {first, round_up(base + size, kPageSize) - first};
}

std::string hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  do {
    s.insert(s.begin(), digits[v & 0xF]);
    v >>= 4;
  } while (v != 0);
  return "0x" + s;
}

}  // namespace

ClusterTagAllocator::ClusterTagAllocator(ClusterTagConfig config)
    : config_(std::move(config)), rng_(config_.seed) {
  if (config_.density == 0) throw DomainError("density must be >= 1");
  if (config_.quarantine == 0) throw DomainError("quarantine must be >= 1");
  if (config_.allocatable == 0 || config_.allocatable >= kClusterSlots) {
    throw DomainError("allocatable slots must be in 1..255");
  }
  if (config_.allocatable + config_.quarantine > 255) {
    throw DomainError("allocatable + quarantine must not exceed 255");
  }
  if (config_.cache_capacity == 0) throw DomainError("cache capacity must be >= 1");
  regions_.resize(config_.classes.size());
}

ClusterTagAllocator::Region& ClusterTagAllocator::region(std::size_t class_index) {
  auto& slot = regions_.at(class_index);
  if (!slot) {
    const SizeClass cls = config_.classes.at(class_index);
    slot = std::make_unique<Region>(Region{
        RegionLayout(SizeClassTable::region_id_for(class_index), cls, config_.density),
        {}, {}, {}, 0});
  }
  return *slot;
}

const ClusterTagAllocator::Region* ClusterTagAllocator::find_region(std::size_t class_index) const {
  if (class_index >= regions_.size()) return nullptr;
  return regions_[class_index].get();
}

ClusterState* ClusterTagAllocator::find_cluster(std::size_t class_index, std::uint64_t untagged) {
  return const_cast<ClusterState*>(std::as_const(*this).find_cluster(class_index, untagged));
}

const ClusterState* ClusterTagAllocator::find_cluster(std::size_t class_index,
                                                      std::uint64_t untagged) const {
  const Region* r = find_region(class_index);
  if (r == nullptr) return nullptr;
  auto it = r->by_base.upper_bound(untagged);
  if (it == r->by_base.begin()) return nullptr;
  --it;
  const ClusterState& cluster = *it->second;
  return cluster.contains(untagged) ? &cluster : nullptr;
}

const ClusterState* ClusterTagAllocator::cluster_at(std::uint64_t untagged) const {
  const std::uint8_t id = region_of(untagged);
  if (id == 0 || id > config_.classes.size()) return nullptr;
  return find_cluster(id - 1u, untagged);
}

std::vector<const ClusterState*> ClusterTagAllocator::clusters(std::size_t class_index) const {
  std::vector<const ClusterState*> out;
  if (const Region* r = find_region(class_index)) {
    for (const ClusterState& c : r->chain) out.push_back(&c);
  }
  return out;
}

const RegionLayout* ClusterTagAllocator::layout(std::size_t class_index) const {
  const Region* r = find_region(class_index);
  return r ? &r->layout : nullptr;
}

std::size_t ClusterTagAllocator::cache_size(std::size_t class_index) const {
  const Region* r = find_region(class_index);
  return r ? r->cache.size() : 0;
}

void ClusterTagAllocator::load_cache(Region& r, ClusterState& cluster) {
  std::vector<std::uint16_t> idle;
  for (std::size_t s = cluster.info_slots; s < kClusterSlots; ++s) {
    const Slot& slot = cluster.slots[s];
    if (slot.state == SlotState::Freed && !slot.cached) idle.push_back(static_cast<std::uint16_t>(s));
  }
  std::shuffle(idle.begin(), idle.end(), rng_);
  const std::size_t take = std::min(idle.size(), config_.cache_capacity - r.cache.size());
  for (std::size_t i = 0; i < take; ++i) {
    cluster.slots[idle[i]].cached = true;
    r.cache.push_back({&cluster, idle[i]});
  }
  cluster.cached += static_cast<std::uint32_t>(take);
}

void ClusterTagAllocator::refill_cache(std::size_t class_index) {
  Region& r = region(class_index);
  if (!r.cache.empty()) return;

  std::vector<ClusterState*> idle;
  for (ClusterState& c : r.chain) {
    if (c.idle_slots() > 0) idle.push_back(&c);
  }
  if (!idle.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, idle.size() - 1);
    const std::size_t chosen = pick(rng_);
    last_reuse_pick_ = chosen;
    ClusterState& cluster = *idle[chosen];
    rotate_tags(cluster);
    load_cache(r, cluster);
    if (config_.verify) verify_cluster_tags(cluster);
    return;
  }

  const ClusterPlacement placement = r.layout.place_new_cluster(space_, rng_);
  ClusterState fresh;
  fresh.base = placement.cluster_base;
  fresh.size_class = r.layout.size_class();
  fresh.info_slots = kClusterSlots - config_.allocatable;
  init_cluster_tags(fresh, config_.quarantine, rng_, shadow_);
  r.chain.push_back(std::move(fresh));
  auto it = std::prev(r.chain.end());
  r.by_base.emplace(it->base, it);
  ++stats_.clusters_placed;
  load_cache(r, *it);
  if (config_.verify) verify_cluster_tags(*it);
}

TaggedAddress ClusterTagAllocator::allocate(std::uint64_t size) {
  const std::optional<SizeClass> cls = config_.classes.size_class_of(size);
  const TaggedAddress addr = cls ? allocate_small(*cls) : allocate_large(size);
  ++stats_.allocations;
  ++stats_.live_chunks;
  stats_.peak_live_chunks = std::max(stats_.peak_live_chunks, stats_.live_chunks);
  return addr;
}

TaggedAddress ClusterTagAllocator::allocate_small(SizeClass cls) {
  Region& r = region(cls.index);
  if (r.cache.empty()) refill_cache(cls.index);
  const CacheEntry entry = r.cache.back();
  r.cache.pop_back();

  ClusterState& cluster = *entry.cluster;
  Slot& slot = cluster.slots[entry.slot];
  slot.state = SlotState::InUse;
  slot.cached = false;
  --cluster.cached;
  ++cluster.in_use;

  const std::uint64_t base = cluster.slot_address(entry.slot);
  space_.commit(page_span(base, cls.chunk_size));
  shadow_.write(base, cls.chunk_size, slot.tag);
  const TaggedAddress addr = make_tagged(base, slot.tag);
  record(addr, cls.index, cls.chunk_size);
  if (config_.verify) {
    verify_cluster_tags(cluster);
    verify_chunk(cluster, entry.slot);
  }
  return addr;
}

TaggedAddress ClusterTagAllocator::allocate_large(std::uint64_t size) {
  const std::uint64_t bytes = round_up(size, kPageSize);
  if (bytes > kRegionBytes) throw PlacementExhausted("large object exceeds a region");
  const std::uint64_t base_of_region = region_base(config_.classes.large_region_id());
  std::uniform_int_distribution<std::uint64_t> pick(0, (kRegionBytes - bytes) / kPageSize);
  for (int attempt = 0; attempt < kPlacementRetries; ++attempt) {
    const std::uint64_t base = base_of_region + pick(rng_) * kPageSize;
    try {
      space_.reserve(base, bytes);
    } catch (const OverlapError&) {
      continue;
    }
    std::uniform_int_distribution<int> tag_pick(1, 255);
    const Tag tag = static_cast<Tag>(tag_pick(rng_));
    shadow_.write(base, bytes, tag);
    large_.emplace(base, LargeObject{bytes, tag});
    released_large_.erase(base);
    const TaggedAddress addr = make_tagged(base, tag);
    record(addr, kLargeObjectClass, bytes);
    return addr;
  }
  throw PlacementExhausted("no room for a large object of " + std::to_string(bytes) + " bytes");
}

void ClusterTagAllocator::record(TaggedAddress addr, std::size_t size_class,
                                 std::uint64_t chunk_bytes) {
  history_.push_back(AllocRecord{history_.size() + 1, addr, size_class, chunk_bytes});
}

void ClusterTagAllocator::deallocate(TaggedAddress addr) {
  const std::uint64_t u = addr.untagged();
  const std::uint8_t id = region_of(u);
  if (id == config_.classes.large_region_id()) {
    deallocate_large(addr);
  } else {
    if (id == 0 || id > config_.classes.size()) {
      throw InvalidFree("free of " + hex(u) + " outside every heap region");
    }
    const std::size_t class_index = id - 1u;
    ClusterState* cluster = find_cluster(class_index, u);
    if (cluster == nullptr) throw InvalidFree("free of " + hex(u) + " outside every cluster");
    const std::uint64_t offset = u - cluster->base;
    const std::size_t s = offset / cluster->chunk_size();
    if (offset % cluster->chunk_size() != 0 || s < cluster->info_slots) {
      throw InvalidFree("free of " + hex(u) + " is not a chunk start");
    }
    Slot& slot = cluster->slots[s];
    if (slot.state == SlotState::Freed) throw DoubleFree("chunk " + hex(u) + " is already free");
    if (slot.tag != addr.tag()) {
      throw TagMismatch("free of " + hex(u) + " with key " + std::to_string(addr.tag()) +
                        ", chunk tag is " + std::to_string(slot.tag));
    }
    slot.state = SlotState::Freed;
    --cluster->in_use;
    shadow_.write(u, cluster->chunk_size(), 0);
    if (config_.verify) {
      verify_cluster_tags(*cluster);
      verify_chunk(*cluster, s);
    }
    Region& r = region(class_index);
    ++r.deallocations;
    if (config_.scan_period != 0 && r.deallocations % config_.scan_period == 0) {
      periodic_scan(class_index);
    }
  }
  ++stats_.deallocations;
  --stats_.live_chunks;
}

void ClusterTagAllocator::deallocate_large(TaggedAddress addr) {
  const std::uint64_t u = addr.untagged();
  auto it = large_.find(u);
  if (it == large_.end()) {
    if (released_large_.count(u) != 0) throw DoubleFree("large object " + hex(u) + " already unmapped");
    throw InvalidFree("free of " + hex(u) + " is not a large object");
  }
  if (it->second.tag != addr.tag()) {
    throw TagMismatch("free of large object " + hex(u) + " with the wrong key");
  }
  shadow_.write(u, it->second.size, 0);
  space_.release({u, it->second.size});
  large_.erase(it);
  released_large_.insert(u);
}

ReleaseReport ClusterTagAllocator::periodic_scan(std::size_t class_index) {
  ReleaseReport report;
  std::uint64_t fragmented = 0;
  Region* r = regions_.at(class_index).get();
  if (r == nullptr) return report;

  const std::uint64_t pages_per_cluster = r->layout.size_class().cluster_size() / kPageSize;
  for (auto it = r->chain.begin(); it != r->chain.end();) {
    ClusterState& cluster = *it;
    if (cluster.in_use == 0 && cluster.cached == 0) {
      report.pages_released += r->layout.release_cluster(space_, cluster.base);
      ++report.full_released;
      r->by_base.erase(cluster.base);
      it = r->chain.erase(it);
      continue;
    }
    // Fragmented release: a page is free when every slot overlapping it is
    // Freed and not cached. Pages holding ClusterInfo never qualify.
    const std::uint64_t chunk = cluster.chunk_size();
    std::uint64_t run_start = 0;
    std::uint64_t run_length = 0;
    auto flush = [&] {
      if (run_length >= config_.page_threshold && run_length > 0) {
        const std::uint64_t n = space_.release(
            {cluster.base + run_start * kPageSize, run_length * kPageSize});
        report.pages_released += n;
        fragmented += n;
      }
      run_length = 0;
    };
    for (std::uint64_t p = 0; p < pages_per_cluster; ++p) {
      const std::size_t first = p * kPageSize / chunk;
      const std::size_t last = ((p + 1) * kPageSize - 1) / chunk;
      bool free_page = true;
      for (std::size_t s = first; s <= last && free_page; ++s) {
        const Slot& slot = cluster.slots[s];
        free_page = slot.state == SlotState::Freed && !slot.cached;
      }
      if (free_page) {
        if (run_length == 0) run_start = p;
        ++run_length;
      } else {
        flush();
      }
    }
    flush();
    ++it;
  }
  stats_.clusters_released += report.full_released;
  stats_.pages_released_fragmented += fragmented;
  return report;
}

AccessResult ClusterTagAllocator::check_access(TaggedAddress addr, std::uint64_t len) const {
  return ctlab::check_access(shadow_, addr, len);
}

std::optional<LiveChunk> ClusterTagAllocator::chunk_at(std::uint64_t untagged) const {
  const std::uint8_t id = region_of(untagged);
  if (id == config_.classes.large_region_id()) {
    auto it = large_.upper_bound(untagged);
    if (it == large_.begin()) return std::nullopt;
    --it;
    if (untagged >= it->first + it->second.size) return std::nullopt;
    return LiveChunk{make_tagged(it->first, it->second.tag), it->second.size, kLargeObjectClass};
  }
  const ClusterState* cluster = cluster_at(untagged);
  if (cluster == nullptr) return std::nullopt;
  const std::size_t s = (untagged - cluster->base) / cluster->chunk_size();
  const Slot& slot = cluster->slots[s];
  if (slot.state != SlotState::InUse) return std::nullopt;
  return LiveChunk{make_tagged(cluster->slot_address(s), slot.tag), cluster->chunk_size(),
                   cluster->size_class.index};
}

std::vector<LiveChunk> ClusterTagAllocator::live_chunks() const {
  std::vector<LiveChunk> out;
  out.reserve(stats_.live_chunks);
  for (const auto& r : regions_) {
    if (!r) continue;
    for (const ClusterState& c : r->chain) {
      for (std::size_t s = c.info_slots; s < kClusterSlots; ++s) {
        if (c.slots[s].state == SlotState::InUse) {
          out.push_back({make_tagged(c.slot_address(s), c.slots[s].tag), c.chunk_size(),
                         c.size_class.index});
        }
      }
    }
  }
  for (const auto& [base, obj] : large_) {
    out.push_back({make_tagged(base, obj.tag), obj.size, kLargeObjectClass});
  }
  return out;
}

ModelStats ClusterTagAllocator::stats() const {
  ModelStats s = stats_;
  s.resident_pages = space_.resident_pages();
  return s;
}

void ClusterTagAllocator::verify_chunk(const ClusterState& cluster, std::size_t slot) const {
  const Slot& st = cluster.slots[slot];
  const Tag expected = st.state == SlotState::InUse ? st.tag : 0;
  const std::uint64_t base = cluster.slot_address(slot);
  for (std::uint64_t a = base; a < base + cluster.chunk_size(); a += shadow_.granule_bytes()) {
    if (shadow_.tag_at(a) != expected) {
      throw InvariantViolation("shadow of chunk " + hex(base) + " disagrees with its slot");
    }
  }
}

void ClusterTagAllocator::audit() const {
  for (std::size_t ci = 0; ci < regions_.size(); ++ci) {
    const Region* r = regions_[ci].get();
    if (r == nullptr) continue;
    const std::uint64_t cap = r->layout.pool_capacity();
    for (const PoolState& pool : r->layout.pools()) {
      std::uint64_t sum = 0;
      for (const auto& [base, size] : pool.placements) sum += size;
      if (pool.used_bytes != sum) throw InvariantViolation("pool usage out of sync");
      if (pool.used_bytes > cap) {
        throw InvariantViolation("pool at " + hex(pool.base) + " exceeds its density cap");
      }
    }
    std::size_t cached_total = 0;
    std::unordered_map<Tag, std::vector<std::uint64_t>> by_tag;
    for (const ClusterState& c : r->chain) {
      verify_cluster_tags(c);
      cached_total += c.cached;
      const PoolState* pool = r->layout.pool_containing(c.base);
      if (pool == nullptr || c.base + 2 * c.size() > pool->base + kPoolBytes) {
        throw InvariantViolation("cluster " + hex(c.base) + " lies outside its pools");
      }
      const auto reservation = space_.reservation_containing(c.base);
      if (!reservation || reservation->base != c.base || reservation->size != 2 * c.size()) {
        throw InvariantViolation("cluster " + hex(c.base) + " lost its 2x reservation");
      }
      for (std::size_t s = c.info_slots; s < kClusterSlots; ++s) {
        const std::uint64_t addr = c.slot_address(s);
        if (c.slots[s].state == SlotState::InUse) {
          if (region_of(addr) != SizeClassTable::region_id_for(ci)) {
            throw InvariantViolation("chunk " + hex(addr) + " outside its class region");
          }
          by_tag[c.slots[s].tag].push_back(addr);
        }
        if (shadow_.tag_at(addr) != (c.slots[s].state == SlotState::InUse ? c.slots[s].tag : 0)) {
          throw InvariantViolation("shadow of chunk " + hex(addr) + " disagrees with its slot");
        }
      }
    }
    if (cached_total != r->cache.size()) throw InvariantViolation("cache accounting out of sync");
    const std::uint64_t min_gap = kClusterSlots * r->layout.size_class().chunk_size;
    for (auto& [tag, bases] : by_tag) {
      std::sort(bases.begin(), bases.end());
      for (std::size_t i = 1; i < bases.size(); ++i) {
        if (bases[i] - bases[i - 1] < min_gap) {
          throw InvariantViolation("tag " + std::to_string(tag) + " repeats within " +
                                   std::to_string(bases[i] - bases[i - 1]) + " bytes");
        }
      }
    }
  }

  std::vector<LiveChunk> live = live_chunks();
  std::sort(live.begin(), live.end(),
            [](const LiveChunk& a, const LiveChunk& b) { return a.base() < b.base(); });
  for (std::size_t i = 1; i < live.size(); ++i) {
    if (live[i - 1].end() > live[i].base()) {
      throw InvariantViolation("live chunks overlap at " + hex(live[i].base()));
    }
  }
  for (const auto& [base, obj] : large_) {
    if (region_of(base) != config_.classes.large_region_id()) {
      throw InvariantViolation("large object outside the large-object region");
    }
  }
  if (live.size() != stats_.live_chunks) throw InvariantViolation("live chunk count out of sync");
}

}  // namespace ctlab

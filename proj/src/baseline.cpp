// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctlab/baseline.hpp"

#include <algorithm>

#include "ctlab/errors.hpp"

namespace ctlab {

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::Random: return "random";
    case StrategyKind::RandomWithHeader: return "random-header";
    case StrategyKind::Staggered: return "staggered";
    case StrategyKind::FixedTemporal: return "fixed-temporal";
    case StrategyKind::StickySpatial: return "sticky";
  }
  return "unknown";
}

std::optional<StrategyKind> parse_strategy(std::string_view name) {
  for (StrategyKind k : {StrategyKind::Random, StrategyKind::RandomWithHeader,
                         StrategyKind::Staggered, StrategyKind::FixedTemporal,
                         StrategyKind::StickySpatial}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

StrategyModel::StrategyModel(StrategyKind kind, unsigned tag_bits)
    : kind_(kind), tag_bits_(tag_bits) {
  if (tag_bits < 2 || tag_bits > 8) throw DomainError("tag width must be 2..8 bits");
}

Tag StrategyModel::assign_spatial(std::uint64_t slot_index, Rng& rng) const {
  const unsigned space = tag_space();
  switch (kind_) {
    case StrategyKind::StickySpatial:
      return static_cast<Tag>(slot_index % space);
    case StrategyKind::Staggered: {
      std::uniform_int_distribution<unsigned> half(0, space / 2 - 1);
      return static_cast<Tag>(2 * half(rng) + (slot_index & 1));
    }
    default: {
      std::uniform_int_distribution<unsigned> any(0, space - 1);
      return static_cast<Tag>(any(rng));
    }
  }
}

Tag StrategyModel::assign_temporal(Tag prev_tag, Rng& rng) const {
  const unsigned space = tag_space();
  switch (kind_) {
    case StrategyKind::StickySpatial:
      return prev_tag;
    case StrategyKind::FixedTemporal:
      return static_cast<Tag>((prev_tag + 1u) % space);
    case StrategyKind::Staggered: {
      // Same parity group, never the tag the slot just had.
      std::uniform_int_distribution<unsigned> pick(0, space / 2 - 2);
      unsigned k = pick(rng);
      if (k >= prev_tag / 2u) ++k;
      return static_cast<Tag>(2 * k + (prev_tag & 1u));
    }
    default: {
      std::uniform_int_distribution<unsigned> any(0, space - 1);
      return static_cast<Tag>(any(rng));
    }
  }
}

BaselineAllocator::BaselineAllocator(StrategyKind kind, BaselineConfig config)
    : strategy_(kind, config.tag_bits),
      config_(std::move(config)),
      rng_(config_.seed),
      shadow_(kGranuleSize, config_.tag_bits),
      arenas_(config_.classes.size()) {
  large_next_ = region_base(config_.classes.large_region_id());
}

std::uint64_t BaselineAllocator::header_bytes() const {
  return strategy_.kind() == StrategyKind::RandomWithHeader ? kGranuleSize : 0;
}

std::uint64_t BaselineAllocator::stride(std::size_t class_index) const {
  return config_.classes.at(class_index).chunk_size + header_bytes();
}

std::uint64_t BaselineAllocator::slot_address(std::size_t class_index, std::uint64_t slot) const {
  return region_base(SizeClassTable::region_id_for(class_index)) + slot * stride(class_index) +
         header_bytes();
}

void BaselineAllocator::record(TaggedAddress addr, std::size_t size_class,
                               std::uint64_t chunk_bytes) {
  history_.push_back(AllocRecord{history_.size() + 1, addr, size_class, chunk_bytes});
  ++stats_.allocations;
  ++stats_.live_chunks;
  stats_.peak_live_chunks = std::max(stats_.peak_live_chunks, stats_.live_chunks);
}

TaggedAddress BaselineAllocator::allocate(std::uint64_t size) {
  const std::optional<SizeClass> cls = config_.classes.size_class_of(size);
  if (!cls) return allocate_large(size);

  Arena& arena = arenas_[cls->index];
  std::uint32_t slot;
  Tag tag;
  if (!arena.free_list.empty()) {
    slot = arena.free_list.back();
    arena.free_list.pop_back();
    tag = strategy_.assign_temporal(arena.slots[slot].tag, rng_);
  } else {
    slot = static_cast<std::uint32_t>(arena.slots.size());
    tag = strategy_.assign_spatial(slot, rng_);
    arena.slots.push_back({});
    const std::uint64_t region = region_base(SizeClassTable::region_id_for(cls->index));
    const std::uint64_t end = round_up(slot_address(cls->index, slot) + cls->chunk_size, kPageSize);
    if (arena.reserved_end == 0) arena.reserved_end = region;
    if (end > arena.reserved_end) {
      if (end - region > kRegionBytes) throw PlacementExhausted("baseline arena is full");
      space_.reserve(arena.reserved_end, end - arena.reserved_end);
      arena.reserved_end = end;
    }
  }
  arena.slots[slot] = {tag, true};
  const std::uint64_t base = slot_address(cls->index, slot);
  shadow_.write(base, cls->chunk_size, tag);
  const TaggedAddress addr = make_tagged(base, tag);
  record(addr, cls->index, cls->chunk_size);
  return addr;
}

TaggedAddress BaselineAllocator::allocate_large(std::uint64_t size) {
  const std::uint64_t bytes = round_up(size, kPageSize);
  const std::uint64_t region = region_base(config_.classes.large_region_id());
  if (large_next_ + bytes - region > kRegionBytes) {
    throw PlacementExhausted("baseline large-object region is full");
  }
  const std::uint64_t base = large_next_;
  space_.reserve(base, bytes);
  large_next_ += bytes;
  const Tag tag = strategy_.assign_spatial(large_count_++, rng_);
  shadow_.write(base, bytes, tag);
  large_.emplace(base, LargeObject{bytes, tag});
  const TaggedAddress addr = make_tagged(base, tag);
  record(addr, kLargeObjectClass, bytes);
  return addr;
}

void BaselineAllocator::deallocate(TaggedAddress addr) {
  const std::uint64_t u = addr.untagged();
  const std::uint8_t id = region_of(u);
  if (id == config_.classes.large_region_id()) {
    deallocate_large(addr);
  } else {
    if (id == 0 || id > config_.classes.size()) throw InvalidFree("free outside every arena");
    const std::size_t ci = id - 1u;
    Arena& arena = arenas_[ci];
    const std::uint64_t offset = u - region_base(id);
    const std::uint64_t s = offset / stride(ci);
    if (offset % stride(ci) != header_bytes() || s >= arena.slots.size()) {
      throw InvalidFree("free of an address that is not a chunk start");
    }
    SlotInfo& slot = arena.slots[s];
    if (!slot.live) throw DoubleFree("chunk is already free");
    if (slot.tag != addr.tag()) throw TagMismatch("free with a key that does not match the chunk");
    slot.live = false;
    arena.free_list.push_back(static_cast<std::uint32_t>(s));
    shadow_.write(u, config_.classes.at(ci).chunk_size, 0);
  }
  ++stats_.deallocations;
  --stats_.live_chunks;
}

void BaselineAllocator::deallocate_large(TaggedAddress addr) {
  const std::uint64_t u = addr.untagged();
  auto it = large_.find(u);
  if (it == large_.end()) {
    if (released_large_.count(u) != 0) throw DoubleFree("large object already unmapped");
    throw InvalidFree("free of an address that is not a large object");
  }
  if (it->second.tag != addr.tag()) throw TagMismatch("free of a large object with the wrong key");
  shadow_.write(u, it->second.size, 0);
  space_.release({u, it->second.size});
  large_.erase(it);
  released_large_.insert(u);
}

AccessResult BaselineAllocator::check_access(TaggedAddress addr, std::uint64_t len) const {
  return ctlab::check_access(shadow_, addr, len);
}

std::optional<LiveChunk> BaselineAllocator::chunk_at(std::uint64_t untagged) const {
  const std::uint8_t id = region_of(untagged);
  if (id == config_.classes.large_region_id()) {
    auto it = large_.upper_bound(untagged);
    if (it == large_.begin()) return std::nullopt;
    --it;
    if (untagged >= it->first + it->second.size) return std::nullopt;
    return LiveChunk{make_tagged(it->first, it->second.tag), it->second.size, kLargeObjectClass};
  }
  if (id == 0 || id > config_.classes.size()) return std::nullopt;
  const std::size_t ci = id - 1u;
  const std::uint64_t offset = untagged - region_base(id);
  const std::uint64_t s = offset / stride(ci);
  if (offset % stride(ci) < header_bytes() || s >= arenas_[ci].slots.size()) return std::nullopt;
  const SlotInfo& slot = arenas_[ci].slots[s];
  if (!slot.live) return std::nullopt;
  return LiveChunk{make_tagged(slot_address(ci, s), slot.tag), config_.classes.at(ci).chunk_size,
                   ci};
}

std::vector<LiveChunk> BaselineAllocator::live_chunks() const {
  std::vector<LiveChunk> out;
  for (std::size_t ci = 0; ci < arenas_.size(); ++ci) {
    const auto& slots = arenas_[ci].slots;
    for (std::size_t s = 0; s < slots.size(); ++s) {
      if (slots[s].live) {
        out.push_back({make_tagged(slot_address(ci, s), slots[s].tag),
                       config_.classes.at(ci).chunk_size, ci});
      }
    }
  }
  for (const auto& [base, obj] : large_) {
    out.push_back({make_tagged(base, obj.tag), obj.size, kLargeObjectClass});
  }
  return out;
}

ModelStats BaselineAllocator::stats() const {
  ModelStats s = stats_;
  s.resident_pages = space_.resident_pages();
  return s;
}

}  // namespace ctlab

// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctlab/address.hpp"

#include <algorithm>
#include <iterator>
#include <sstream>

#include "ctlab/errors.hpp"

namespace ctlab {
namespace {

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

std::string describe(AddressRange r) {
  return "[" + hex(r.base) + ", " + hex(r.end()) + ")";
}

void require_page_aligned(AddressRange r) {
  if (!is_page_aligned(r.base) || !is_page_aligned(r.size) || r.size == 0) {
    throw AlignmentError("range " + describe(r) + " is not page aligned");
  }
}

}  // namespace

AddressRange AddressSpace::reserve(std::uint64_t base, std::uint64_t size) {
  const AddressRange range{base, size};
  require_page_aligned(range);
  if (range.end() < base || range.end() > kAddressMask + 1) {
    throw OverlapError("range " + describe(range) + " leaves the address space");
  }
  auto next = reservations_.lower_bound(base);
  if (next != reservations_.end() && next->first < range.end()) {
    throw OverlapError("range " + describe(range) + " overlaps a reservation at " +
                       hex(next->first));
  }
  if (next != reservations_.begin()) {
    auto prev = std::prev(next);
    if (prev->first + prev->second.size > base) {
      throw OverlapError("range " + describe(range) +
                         " overlaps a reservation at " + hex(prev->first));
    }
  }
  const std::uint64_t pages = size / kPageSize;
  reservations_.emplace_hint(next, base, Reservation{size, std::vector<bool>(pages, true)});
  resident_pages_ += pages;
  return range;
}

AddressSpace::Map::iterator AddressSpace::find_owner(AddressRange range) {
  auto it = reservations_.upper_bound(range.base);
  if (it == reservations_.begin()) return reservations_.end();
  --it;
  if (range.end() > it->first + it->second.size) return reservations_.end();
  return it;
}

AddressSpace::Map::const_iterator AddressSpace::find_owner(std::uint64_t addr) const {
  auto it = reservations_.upper_bound(addr);
  if (it == reservations_.begin()) return reservations_.end();
  --it;
  if (addr >= it->first + it->second.size) return reservations_.end();
  return it;
}

std::uint64_t AddressSpace::release(AddressRange range) {
  require_page_aligned(range);
  auto it = find_owner(range);
  if (it == reservations_.end()) {
    throw UnknownRange("range " + describe(range) + " is not reserved");
  }
  Reservation& res = it->second;
  const std::uint64_t first = (range.base - it->first) / kPageSize;
  const std::uint64_t count = range.size / kPageSize;
  std::uint64_t dropped = 0;
  for (std::uint64_t p = first; p < first + count; ++p) {
    if (res.resident[p]) {
      res.resident[p] = false;
      ++dropped;
    }
  }
  resident_pages_ -= dropped;
  if (range.base == it->first && range.size == res.size) {
    reservations_.erase(it);
  }
  return dropped;
}

std::uint64_t AddressSpace::commit(AddressRange range) {
  require_page_aligned(range);
  auto it = find_owner(range);
  if (it == reservations_.end()) {
    throw UnknownRange("range " + describe(range) + " is not reserved");
  }
  Reservation& res = it->second;
  const std::uint64_t first = (range.base - it->first) / kPageSize;
  const std::uint64_t count = range.size / kPageSize;
  std::uint64_t added = 0;
  for (std::uint64_t p = first; p < first + count; ++p) {
    if (!res.resident[p]) {
      res.resident[p] = true;
      ++added;
    }
  }
  resident_pages_ += added;
  return added;
}

std::uint64_t AddressSpace::resident_pages_in(AddressRange range) const {
  std::uint64_t n = 0;
  for (std::uint64_t a = range.base; a < range.end(); a += kPageSize) {
    if (is_resident(a)) ++n;
  }
  return n;
}

bool AddressSpace::is_reserved(std::uint64_t addr) const {
  return find_owner(addr) != reservations_.end();
}

bool AddressSpace::is_resident(std::uint64_t addr) const {
  auto it = find_owner(addr);
  if (it == reservations_.end()) return false;
  return it->second.resident[(addr - it->first) / kPageSize];
}

std::optional<AddressRange> AddressSpace::reservation_containing(std::uint64_t addr) const {
  auto it = find_owner(addr);
  if (it == reservations_.end()) return std::nullopt;
  return AddressRange{it->first, it->second.size};
}

std::vector<AddressRange> AddressSpace::reservations() const {
  std::vector<AddressRange> out;
  out.reserve(reservations_.size());
  for (const auto& [base, res] : reservations_) out.push_back({base, res.size});
  return out;
}

ShadowMap::ShadowMap(std::uint64_t granule_bytes, unsigned tag_bits)
    : granule_bytes_(granule_bytes), tag_bits_(tag_bits) {
  if (granule_bytes == 0 || (granule_bytes & (granule_bytes - 1)) != 0) {
    throw DomainError("granule size must be a power of two");
  }
  if (tag_bits == 0 || tag_bits > 8) {
    throw DomainError("tag width must be 1..8 bits");
  }
}

void ShadowMap::write(std::uint64_t start, std::uint64_t len, Tag tag) {
  if (start % granule_bytes_ != 0 || len % granule_bytes_ != 0) {
    throw AlignmentError("shadow write [" + hex(start) + ", +" + hex(len) +
                         ") is not granule aligned");
  }
  if (tag_bits_ < 8 && tag >= (1u << tag_bits_)) {
    throw DomainError("tag " + std::to_string(tag) + " exceeds " +
                      std::to_string(tag_bits_) + "-bit tag width");
  }
  std::uint64_t g = start / granule_bytes_;
  const std::uint64_t end = g + len / granule_bytes_;
  while (g < end) {
    const std::uint64_t block_index = g / kBlockGranules;
    const std::uint64_t stop = std::min(end, (block_index + 1) * kBlockGranules);
    auto it = blocks_.find(block_index);
    if (it == blocks_.end()) {
      if (tag == 0) {
        g = stop;
        continue;
      }
      it = blocks_.emplace(block_index, Block{}).first;
    }
    Block& block = it->second;
    auto first = block.tags.begin() + static_cast<std::ptrdiff_t>(g % kBlockGranules);
    std::fill(first, first + static_cast<std::ptrdiff_t>(stop - g), tag);
    g = stop;
  }
}

std::uint64_t ShadowMap::tagged_granules() const {
  std::uint64_t n = 0;
  for (const auto& [index, block] : blocks_) {
    n += kBlockGranules - static_cast<std::uint64_t>(std::count(block.tags.begin(), block.tags.end(), Tag{0}));
  }
  return n;
}

Tag ShadowMap::granule_tag(std::uint64_t granule) const {
  auto it = blocks_.find(granule / kBlockGranules);
  if (it == blocks_.end()) return 0;
  return it->second.tags[granule % kBlockGranules];
}

AccessResult check_access(const ShadowMap& shadow, TaggedAddress addr,
                          std::uint64_t len) {
  if (len == 0) throw DomainError("access length must be at least 1");
  const std::uint64_t start = addr.untagged();
  const std::uint64_t gsize = shadow.granule_bytes();
  const std::uint64_t first = start / gsize;
  const std::uint64_t last = (start + len - 1) / gsize;
  const Tag key = addr.tag();
  for (std::uint64_t g = first; g <= last; ++g) {
    const Tag lock = shadow.granule_tag(g);
    if (lock != key) return AccessResult{AccessFault{g, key, lock}};
  }
  return AccessResult{};
}

}  // namespace ctlab

// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Simulated 64-bit address space: tagged-pointer codec, page reservations
// with residency accounting, and the granule-level shadow tag store.
// No host memory backs any of these addresses.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

namespace ctlab {

using Tag = std::uint8_t;

inline constexpr unsigned kTagShift = 56;
inline constexpr std::uint64_t kAddressMask = (std::uint64_t{1} << kTagShift) - 1;
inline constexpr std::uint64_t kPageSize = 4096;
inline constexpr std::uint64_t kGranuleSize = 16;

/// A pointer value whose top byte carries the key tag.
struct TaggedAddress {
  std::uint64_t raw = 0;

  constexpr Tag tag() const { return static_cast<Tag>(raw >> kTagShift); }
  constexpr std::uint64_t untagged() const { return raw & kAddressMask; }

  friend constexpr bool operator==(TaggedAddress, TaggedAddress) = default;
};

constexpr TaggedAddress tag_with(TaggedAddress addr, Tag tag) {
  return TaggedAddress{(addr.raw & kAddressMask) |
                       (static_cast<std::uint64_t>(tag) << kTagShift)};
}

constexpr TaggedAddress make_tagged(std::uint64_t untagged, Tag tag) {
  return tag_with(TaggedAddress{untagged}, tag);
}

constexpr std::uint64_t untag(TaggedAddress addr) { return addr.untagged(); }

constexpr bool is_page_aligned(std::uint64_t v) { return v % kPageSize == 0; }
constexpr std::uint64_t round_up(std::uint64_t v, std::uint64_t to) {
  return (v + to - 1) / to * to;
}

struct AddressRange {
  std::uint64_t base = 0;
  std::uint64_t size = 0;

  constexpr std::uint64_t end() const { return base + size; }
  constexpr bool contains(std::uint64_t addr) const {
    return addr >= base && addr < end();
  }
  friend constexpr bool operator==(AddressRange, AddressRange) = default;
};

/// Page-granular reservations over the simulated space. A reservation is
/// resident when reserved; sub-ranges can be decommitted (fragmented
/// release) and recommitted without giving up the reservation itself.
class AddressSpace {
 public:
  /// Throws AlignmentError for unaligned input, OverlapError if the range
  /// intersects an existing reservation.
  AddressRange reserve(std::uint64_t base, std::uint64_t size);

  /// Releasing a whole reservation unreserves it. Releasing a page-aligned
  /// proper sub-range only drops residency for those pages. Returns the
  /// number of pages that stopped being resident.
  /// Throws UnknownRange if the range is not inside a single reservation.
  std::uint64_t release(AddressRange range);

  /// Marks pages of a reserved sub-range resident again. Returns the number
  /// of pages that became resident.
  std::uint64_t commit(AddressRange range);

  std::uint64_t resident_pages() const { return resident_pages_; }
  std::uint64_t resident_pages_in(AddressRange range) const;
  bool is_reserved(std::uint64_t addr) const;
  bool is_resident(std::uint64_t addr) const;
  std::optional<AddressRange> reservation_containing(std::uint64_t addr) const;
  std::size_t reservation_count() const { return reservations_.size(); }
  std::vector<AddressRange> reservations() const;

 private:
  struct Reservation {
    std::uint64_t size = 0;
    std::vector<bool> resident;
  };

  using Map = std::map<std::uint64_t, Reservation>;
  Map::iterator find_owner(AddressRange range);
  Map::const_iterator find_owner(std::uint64_t addr) const;

  Map reservations_;
  std::uint64_t resident_pages_ = 0;
};

/// Reported by check_access for the first granule whose lock differs from
/// the pointer's key.
struct AccessFault {
  std::uint64_t granule = 0;
  Tag key = 0;
  Tag lock = 0;

  friend bool operator==(const AccessFault&, const AccessFault&) = default;
};

struct AccessResult {
  std::optional<AccessFault> fault;

  bool ok() const { return !fault.has_value(); }
  friend bool operator==(const AccessResult&, const AccessResult&) = default;
};

/// Sparse lock-tag store: one tag per granule, absent granules read 0.
/// Storage is grouped into blocks of 256 granules so that chunk-sized writes
/// touch a handful of hash entries rather than one per granule.
class ShadowMap {
 public:
  explicit ShadowMap(std::uint64_t granule_bytes = kGranuleSize,
                     unsigned tag_bits = 8);

  /// start and len must be multiples of the granule size (AlignmentError).
  /// Tags wider than tag_bits raise DomainError.
  void write(std::uint64_t start, std::uint64_t len, Tag tag);

  Tag granule_tag(std::uint64_t granule) const;
  Tag tag_at(std::uint64_t addr) const { return granule_tag(addr / granule_bytes_); }

  std::uint64_t granule_bytes() const { return granule_bytes_; }
  unsigned tag_bits() const { return tag_bits_; }
  /// Number of granules currently holding a non-zero tag. Scans the store.
  std::uint64_t tagged_granules() const;

 private:
  static constexpr std::uint64_t kBlockGranules = 256;
  struct Block {
    std::array<Tag, kBlockGranules> tags{};
  };

  std::uint64_t granule_bytes_;
  unsigned tag_bits_;
  std::unordered_map<std::uint64_t, Block> blocks_;
};

/// Ok iff every granule overlapped by [untag(addr), untag(addr)+len) holds
/// tag(addr). len must be >= 1.
AccessResult check_access(const ShadowMap& shadow, TaggedAddress addr,
                          std::uint64_t len);

}  // namespace ctlab

// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctlab/address.hpp"

namespace ctlab {

inline constexpr std::size_t kLargeObjectClass = static_cast<std::size_t>(-1);

/// One hand-out. `round` is the allocation sequence number (1-based, strictly
/// increasing) and doubles as the record id.
struct AllocRecord {
  std::uint64_t round = 0;
  TaggedAddress addr;
  std::size_t size_class = kLargeObjectClass;
  std::uint64_t chunk_bytes = 0;
};

struct LiveChunk {
  TaggedAddress addr;
  std::uint64_t chunk_bytes = 0;
  std::size_t size_class = kLargeObjectClass;

  std::uint64_t base() const { return addr.untagged(); }
  std::uint64_t end() const { return addr.untagged() + chunk_bytes; }
};

struct ModelStats {
  std::uint64_t live_chunks = 0;
  std::uint64_t peak_live_chunks = 0;
  std::uint64_t resident_pages = 0;
  std::uint64_t clusters_placed = 0;
  std::uint64_t clusters_released = 0;
  std::uint64_t pages_released_fragmented = 0;
  std::uint64_t allocations = 0;
  std::uint64_t deallocations = 0;
};

/// Uniform surface over ClusterTag and the baseline tag-assignment models.
/// Every model works over its own simulated address space and shadow map.
class AllocatorModel {
 public:
  virtual ~AllocatorModel() = default;

  virtual std::string name() const = 0;
  virtual TaggedAddress allocate(std::uint64_t size) = 0;
  /// Throws DoubleFree, InvalidFree or TagMismatch for bad frees.
  virtual void deallocate(TaggedAddress addr) = 0;
  virtual AccessResult check_access(TaggedAddress addr, std::uint64_t len) const = 0;

  /// The live chunk whose range contains `untagged`, if any.
  virtual std::optional<LiveChunk> chunk_at(std::uint64_t untagged) const = 0;
  virtual std::vector<LiveChunk> live_chunks() const = 0;
  virtual std::span<const AllocRecord> history() const = 0;
  virtual ModelStats stats() const = 0;
  virtual const ShadowMap& shadow() const = 0;
};

}  // namespace ctlab

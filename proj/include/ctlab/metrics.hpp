// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Collision-distance multisets and their reducers.
//
// Spatial distances are gaps between consecutive positions that hold the
// same tag at one instant; temporal distances are gaps between consecutive
// rounds in which one slot received the same tag.

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "ctlab/address.hpp"
#include "ctlab/allocator_model.hpp"

namespace ctlab {

enum class DistanceUnit { Chunk, Byte, Round };
std::string_view to_string(DistanceUnit unit);

class DistanceMultiset {
 public:
  explicit DistanceMultiset(DistanceUnit unit = DistanceUnit::Chunk) : unit_(unit) {}

  void add(std::uint64_t distance, std::uint64_t count = 1);
  /// Multiset sum. Units must agree (DomainError otherwise).
  void merge(const DistanceMultiset& other);

  DistanceUnit unit() const { return unit_; }
  const std::map<std::uint64_t, std::uint64_t>& counts() const { return counts_; }
  std::uint64_t total() const { return total_; }
  bool empty() const { return total_ == 0; }

  friend bool operator==(const DistanceMultiset&, const DistanceMultiset&) = default;

 private:
  DistanceUnit unit_;
  std::map<std::uint64_t, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

struct ObjectiveReport {
  std::uint64_t f1_min = 0;
  double f2_avg = 0;
  double f3_entropy = 0;  ///< bits
  std::uint64_t p25 = 0;
  std::uint64_t samples = 0;
};

/// Throws EmptyMultiset for an empty input.
ObjectiveReport objectives(const DistanceMultiset& dist);

/// Nearest-rank percentile: the smallest distance whose cumulative count
/// reaches q * total. q in (0, 1]. Throws EmptyMultiset.
std::uint64_t percentile(const DistanceMultiset& dist, double q);

/// Positions of live chunks, grouped by (size class, tag).
class SnapshotView {
 public:
  using Key = std::pair<std::size_t, Tag>;

  void add(std::size_t group, Tag tag, std::uint64_t position);
  /// Sorts every list; add() may be called in any order before this.
  void normalize();
  const std::map<Key, std::vector<std::uint64_t>>& lists() const { return lists_; }

 private:
  std::map<Key, std::vector<std::uint64_t>> lists_;
};

/// Rounds at which each slot received each tag.
class SlotTagHistory {
 public:
  using Key = std::pair<std::uint64_t, Tag>;

  void add(std::uint64_t slot, Tag tag, std::uint64_t round);
  void normalize();
  const std::map<Key, std::vector<std::uint64_t>>& lists() const { return lists_; }

 private:
  std::map<Key, std::vector<std::uint64_t>> lists_;
};

/// Adjacent differences within every list. Lists must be strictly
/// increasing (DomainError otherwise).
DistanceMultiset spatial_distances(const SnapshotView& snapshot);
DistanceMultiset temporal_distances(const SlotTagHistory& history);

/// Live small chunks of a model; position = byte offset from the region
/// base divided by the chunk size.
SnapshotView snapshot_of(const AllocatorModel& model);
/// Every small-chunk hand-out of a model keyed by chunk address; the round
/// is the allocation sequence number.
SlotTagHistory history_of(std::span<const AllocRecord> records);

/// Entropy in bits of the geometric distribution with success probability
/// p. DomainError unless 0 < p <= 1.
double geometric_entropy(double p);
/// Entropy in bits of Z2 - Z1 with Z1, Z2 independent uniform on 0..n-1.
double triangular_entropy(std::uint64_t n);

struct SpatialModelReport {
  std::uint64_t min_chunks = 0;
  double avg_chunks = 0;
  double entropy_bound_bits = 0;
};

/// Distance between same-tag chunks of neighbouring clusters at density d:
/// 256 * D + (Z2 - Z1) with D geometric(1/d). d >= 1.
SpatialModelReport cluster_spatial_model(std::uint64_t d);

}  // namespace ctlab

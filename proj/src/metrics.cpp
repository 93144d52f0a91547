// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctlab/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "ctlab/errors.hpp"
#include "ctlab/layout.hpp"

namespace ctlab {

std::string_view to_string(DistanceUnit unit) {
  switch (unit) {
    case DistanceUnit::Chunk: return "chunk";
    case DistanceUnit::Byte: return "byte";
    case DistanceUnit::Round: return "round";
  }
  return "unknown";
}

void DistanceMultiset::add(std::uint64_t distance, std::uint64_t count) {
  if (count == 0) return;
  counts_[distance] += count;
  total_ += count;
}

void DistanceMultiset::merge(const DistanceMultiset& other) {
  if (other.unit_ != unit_) throw DomainError("cannot merge distances of different units");
  for (const auto& [d, n] : other.counts_) add(d, n);
}

ObjectiveReport objectives(const DistanceMultiset& dist) {
  if (dist.empty()) throw EmptyMultiset("objectives of an empty distance multiset");
  ObjectiveReport r;
  r.samples = dist.total();
  r.f1_min = dist.counts().begin()->first;
  const double total = static_cast<double>(dist.total());
  double sum = 0;
  double h = 0;
  for (const auto& [d, n] : dist.counts()) {
    sum += static_cast<double>(d) * static_cast<double>(n);
    const double p = static_cast<double>(n) / total;
    h -= p * std::log2(p);
  }
  r.f2_avg = sum / total;
  r.f3_entropy = h == 0 ? 0.0 : h;  // avoid -0
  r.p25 = percentile(dist, 0.25);
  return r;
}

std::uint64_t percentile(const DistanceMultiset& dist, double q) {
  if (dist.empty()) throw EmptyMultiset("percentile of an empty distance multiset");
  if (!(q > 0 && q <= 1)) throw DomainError("percentile rank must be in (0, 1]");
  const double target = q * static_cast<double>(dist.total());
  std::uint64_t acc = 0;
  for (const auto& [d, n] : dist.counts()) {
    acc += n;
    if (static_cast<double>(acc) >= target) return d;
  }
  return dist.counts().rbegin()->first;
}

void SnapshotView::add(std::size_t group, Tag tag, std::uint64_t position) {
  lists_[{group, tag}].push_back(position);
}

void SnapshotView::normalize() {
  for (auto& [key, v] : lists_) std::sort(v.begin(), v.end());
}

void SlotTagHistory::add(std::uint64_t slot, Tag tag, std::uint64_t round) {
  lists_[{slot, tag}].push_back(round);
}

void SlotTagHistory::normalize() {
  for (auto& [key, v] : lists_) std::sort(v.begin(), v.end());
}

namespace {

template <typename Lists>
DistanceMultiset adjacent_gaps(const Lists& lists, DistanceUnit unit) {
  DistanceMultiset out(unit);
  for (const auto& [key, v] : lists) {
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (v[i] <= v[i - 1]) throw DomainError("distance input lists must be strictly increasing");
      out.add(v[i] - v[i - 1]);
    }
  }
  return out;
}

}  // namespace

DistanceMultiset spatial_distances(const SnapshotView& snapshot) {
  return adjacent_gaps(snapshot.lists(), DistanceUnit::Chunk);
}

DistanceMultiset temporal_distances(const SlotTagHistory& history) {
  return adjacent_gaps(history.lists(), DistanceUnit::Round);
}

SnapshotView snapshot_of(const AllocatorModel& model) {
  SnapshotView view;
  for (const LiveChunk& c : model.live_chunks()) {
    if (c.size_class == kLargeObjectClass) continue;
    const std::uint64_t offset = c.base() - region_base(region_of(c.base()));
    view.add(c.size_class, c.addr.tag(), offset / c.chunk_bytes);
  }
  view.normalize();
  return view;
}

SlotTagHistory history_of(std::span<const AllocRecord> records) {
  SlotTagHistory h;
  for (const AllocRecord& r : records) {
    if (r.size_class == kLargeObjectClass) continue;
    h.add(r.addr.untagged(), r.addr.tag(), r.round);
  }
  return h;
}

double geometric_entropy(double p) {
  if (!(p > 0 && p <= 1)) throw DomainError("geometric_entropy needs 0 < p <= 1");
  if (p == 1) return 0;
  const double q = 1 - p;
  return (-q * std::log2(q) - p * std::log2(p)) / p;
}

double triangular_entropy(std::uint64_t n) {
  if (n < 2) throw DomainError("triangular_entropy needs n >= 2");
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  // P(k) = (n - |k|) / n^2 is symmetric; sum k = 0 once and k > 0 twice.
  double h = 0;
  for (std::uint64_t k = 0; k < n; ++k) {
    const double p = static_cast<double>(n - k) / nn;
    h -= (k == 0 ? 1 : 2) * p * std::log2(p);
  }
  return h;
}

SpatialModelReport cluster_spatial_model(std::uint64_t d) {
  if (d == 0) throw DomainError("density must be >= 1");
  return {kClusterSlots, static_cast<double>(kClusterSlots * d),
          triangular_entropy(kClusterSlots) + geometric_entropy(1.0 / static_cast<double>(d))};
}

}  // namespace ctlab

// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Intra-cluster tag assignment.
//
// A new cluster receives a random permutation of the non-zero tags: one per
// allocatable slot, the leftovers become the quarantine list. When a cluster
// is reused, the quarantine tags followed by the tags of its freed slots (in
// ascending slot order) form a ring that is rotated one position to the
// right. Live slots keep their tags, so uniqueness inside the cluster holds
// throughout, and a tag leaving a slot has to pass through every quarantine
// position before it can come back.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ctlab/cluster.hpp"
#include "ctlab/layout.hpp"

namespace ctlab {

/// Assigns fresh tags to a newly placed cluster. All allocatable slots become
/// Freed carrying their initial tag, quarantine receives `quarantine` tags
/// and the ClusterInfo granules are written as tag 0 in shadow.
/// Requires allocatable + quarantine <= 255.
void init_cluster_tags(ClusterState& cluster, std::size_t quarantine, Rng& rng,
                       ShadowMap& shadow);

/// Quarantine tags first, then tags of Freed (non-cached) slots by slot index.
std::vector<Tag> tag_ring(const ClusterState& cluster);

/// Position i takes the tag formerly at i-1 (mod length).
void rotate_right(std::span<Tag> ring);

/// One circular-shift step over the cluster's ring. InUse slots are left
/// alone; Freed slots and the quarantine list adopt their new ring tags.
void rotate_tags(ClusterState& cluster);

/// Guaranteed lower bound, in cluster reuse rounds, before a slot can see
/// the same tag again.
constexpr std::uint64_t min_temporal_gap(std::uint64_t quarantine) { return quarantine; }

/// Throws InvariantViolation if a non-zero tag repeats inside the cluster, a
/// Freed/InUse slot carries tag 0, or the counters disagree with the slots.
void verify_cluster_tags(const ClusterState& cluster);

}  // namespace ctlab

// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Single-cluster temporal simulation. Each round frees a uniformly random
// subset of the cluster's slots and hands them out again with new tags;
// every time a slot receives a tag it held before, the round gap is one
// sample.

#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "ctlab/metrics.hpp"

namespace ctlab {

enum class TemporalArm {
  CircularShift,  ///< ring rotation over quarantine + freed slots
  Random,         ///< independent uniform tag per reassigned slot
  NoRetag,        ///< reassigned slots keep their tag; yields no samples
};

std::string_view to_string(TemporalArm arm);

struct MonteCarloConfig {
  std::uint64_t seed = 1;
  std::uint64_t rounds = 40000;
  std::size_t quarantine = 16;
  /// Slots of the simulated CircularShift cluster. The Random arm always
  /// uses all 256 slots of a cluster without metadata.
  std::size_t allocatable = 239;
  /// Upper bound of the per-round subset size.
  std::size_t max_pick = 240;
};

struct MonteCarloResult {
  TemporalArm arm = TemporalArm::CircularShift;
  std::uint64_t rounds = 0;
  DistanceMultiset samples{DistanceUnit::Round};
  /// Empty when no sample was produced.
  std::optional<ObjectiveReport> stats;
};

/// CircularShift raises InvariantViolation if any sample falls below the
/// quarantine size.
MonteCarloResult monte_carlo_temporal(TemporalArm arm, const MonteCarloConfig& config);

}  // namespace ctlab

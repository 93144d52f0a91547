// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Injected-violation campaigns. Every trial builds a fresh model from its
// own seed, runs a random warm-up workload, allocates a target chunk and
// then performs one illegal access (or a second free). A campaign is TP
// when every trial caught the violation, FN when none did and PN otherwise.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "ctlab/config.hpp"

namespace ctlab {

enum class ViolationKind { AdjacentOverflow, NonAdjacentOverflow, UseAfterFree, DoubleFree };

std::string_view to_string(ViolationKind kind);
std::optional<ViolationKind> parse_violation(std::string_view name);

struct Violation {
  ViolationKind kind = ViolationKind::AdjacentOverflow;
  /// Byte offset of the access relative to the target chunk base; must lie
  /// outside the chunk for overflow kinds.
  std::int64_t offset = 0;
  /// Times the freed slot is handed out again before the stale access.
  std::uint32_t realloc_rounds = 0;

  static Violation adjacent_overflow(std::int64_t offset) {
    return {ViolationKind::AdjacentOverflow, offset, 0};
  }
  static Violation non_adjacent_overflow(std::int64_t offset) {
    return {ViolationKind::NonAdjacentOverflow, offset, 0};
  }
  static Violation use_after_free(std::uint32_t rounds) {
    return {ViolationKind::UseAfterFree, 0, rounds};
  }
  static Violation double_free() { return {ViolationKind::DoubleFree, 0, 0}; }
};

struct HarnessConfig {
  std::size_t warmup_ops = 5000;
  std::uint64_t warmup_min_size = 0x10;
  std::uint64_t warmup_max_size = 0x10000;
  double free_probability = 0.5;
  std::uint64_t target_size = 0x20;
  /// Same-size allocations allowed while steering memory next to the target.
  std::size_t groom_limit = 1024;
  /// Allocations allowed per round while waiting for a freed slot to return.
  std::size_t reuse_limit = 1u << 16;
};

enum class Outcome { Detected, Missed };
enum class Classification { TP, FN, PN };
std::string_view to_string(Classification c);

struct CampaignResult {
  std::uint64_t trials = 0;
  std::uint64_t detected = 0;
  Classification classification = Classification::FN;
  double miss_rate = 0;
};

CampaignResult classify(std::uint64_t trials, std::uint64_t detected);

/// Seed of trial i of a campaign seeded with `seed`.
std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial);

/// DomainError for an overflow offset inside the target chunk.
Outcome run_trial(const ModelFactory& make, const Violation& v, std::uint64_t seed,
                  const HarnessConfig& config = {});

CampaignResult run_campaign(const ModelFactory& make, const Violation& v, std::uint64_t trials,
                            std::uint64_t seed, const HarnessConfig& config = {});

inline constexpr std::int64_t kMagmaLowOffset = -2095;
inline constexpr std::int64_t kMagmaHighOffset = 1791;

/// Sweeps every byte offset in [low, high] outside the target chunk, one
/// warm-up per trial. Each (trial, offset) pair counts as one check in the
/// result.
CampaignResult magma_scenario(const ModelFactory& make, std::int64_t low, std::int64_t high,
                              std::uint64_t trials, std::uint64_t seed,
                              const HarnessConfig& config = {});

}  // namespace ctlab

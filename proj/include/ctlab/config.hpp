// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ctlab/allocator_model.hpp"
#include "ctlab/clustertag_alloc.hpp"

namespace ctlab {

struct RunConfig {
  std::uint64_t seed = 1;
  std::uint64_t density = 5;
  std::size_t quarantine = 16;
  std::size_t cache_capacity = 64;
  std::size_t scan_period = 1024;
  std::size_t page_threshold = 4;
  unsigned tag_bits = 8;
  std::string strategy = "clustertag";
  std::size_t allocatable = 239;
  std::uint64_t rounds = 40000;
};

/// Every --strategy spelling, ClusterTag first.
const std::vector<std::string>& strategy_names();

/// Throws DomainError naming the first bad field.
void validate(const RunConfig& config);

ClusterTagConfig clustertag_config(const RunConfig& config, std::uint64_t seed);

/// Builds a fresh model for `strategy` seeded with `seed`; the remaining
/// parameters come from config. Unknown names raise DomainError.
std::unique_ptr<AllocatorModel> make_model(const RunConfig& config, std::string_view strategy,
                                           std::uint64_t seed);

using ModelFactory = std::function<std::unique_ptr<AllocatorModel>(std::uint64_t seed)>;
ModelFactory model_factory(const RunConfig& config, std::string strategy);

}  // namespace ctlab

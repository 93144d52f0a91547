// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctlab/config.hpp"

#include "ctlab/baseline.hpp"
#include "ctlab/errors.hpp"

namespace ctlab {

const std::vector<std::string>& strategy_names() {
  static const std::vector<std::string> names = {
      "clustertag", "random", "random-header", "staggered", "fixed-temporal", "sticky"};
  return names;
}

void validate(const RunConfig& c) {
  if (c.density < 1) throw DomainError("density must be >= 1");
  if (c.quarantine < 1 || c.quarantine > 255) throw DomainError("quarantine must be in 1..255");
  if (c.allocatable < 1 || c.allocatable > 255) throw DomainError("allocatable must be in 1..255");
  if (c.allocatable + c.quarantine > 255) {
    throw DomainError("allocatable + quarantine must not exceed 255");
  }
  if (c.cache_capacity < 1) throw DomainError("cache capacity must be >= 1");
  if (c.tag_bits < 2 || c.tag_bits > 8) throw DomainError("tag bits must be in 2..8");
  if (c.strategy == "clustertag" && c.tag_bits != 8) {
    throw DomainError("clustertag only supports 8-bit tags");
  }
  bool known = false;
  for (const auto& n : strategy_names()) known = known || n == c.strategy;
  if (!known) throw DomainError("unknown strategy '" + c.strategy + "'");
}

ClusterTagConfig clustertag_config(const RunConfig& c, std::uint64_t seed) {
  ClusterTagConfig out;
  out.seed = seed;
  out.density = c.density;
  out.quarantine = c.quarantine;
  out.allocatable = c.allocatable;
  out.cache_capacity = c.cache_capacity;
  out.scan_period = c.scan_period;
  out.page_threshold = c.page_threshold;
  return out;
}

std::unique_ptr<AllocatorModel> make_model(const RunConfig& config, std::string_view strategy,
                                           std::uint64_t seed) {
  if (strategy == "clustertag") {
    return std::make_unique<ClusterTagAllocator>(clustertag_config(config, seed));
  }
  const auto kind = parse_strategy(strategy);
  if (!kind) throw DomainError("unknown strategy '" + std::string(strategy) + "'");
  BaselineConfig bc;
  bc.seed = seed;
  bc.tag_bits = config.tag_bits;
  return std::make_unique<BaselineAllocator>(*kind, bc);
}

ModelFactory model_factory(const RunConfig& config, std::string strategy) {
  return [config, strategy = std::move(strategy)](std::uint64_t seed) {
    return make_model(config, strategy, seed);
  };
}

}  // namespace ctlab

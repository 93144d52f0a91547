// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctlab/monte_carlo.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "ctlab/cluster.hpp"
#include "ctlab/errors.hpp"
#include "ctlab/tag_engine.hpp"

namespace ctlab {

std::string_view to_string(TemporalArm arm) {
  switch (arm) {
    case TemporalArm::CircularShift: return "circular-shift";
    case TemporalArm::Random: return "random";
    case TemporalArm::NoRetag: return "no-retag";
  }
  return "unknown";
}

namespace {

// last[slot * 256 + tag] = most recent round the slot received the tag.
class GapRecorder {
 public:
  explicit GapRecorder(std::size_t slots) : last_(slots * 256, kNever) {}

  void assign(std::size_t slot, Tag tag, std::uint64_t round) {
    std::uint64_t& prev = last_[slot * 256 + tag];
    if (prev != kNever) {
      const std::uint64_t gap = round - prev;
      if (gap >= dense_.size()) dense_.resize(std::max<std::size_t>(gap + 1, dense_.size() * 2));
      ++dense_[gap];
    }
    prev = round;
  }

  DistanceMultiset finish() const {
    DistanceMultiset out(DistanceUnit::Round);
    for (std::size_t d = 0; d < dense_.size(); ++d) out.add(d, dense_[d]);
    return out;
  }

 private:
  static constexpr std::uint64_t kNever = ~std::uint64_t{0};
  std::vector<std::uint64_t> last_;
  std::vector<std::uint64_t> dense_;
};

std::vector<std::size_t> pick_subset(std::vector<std::size_t>& pool, std::size_t max_pick,
                                     Rng& rng) {
  std::uniform_int_distribution<std::size_t> size_dist(1, std::min(max_pick, pool.size()));
  const std::size_t k = size_dist(rng);
  // Partial Fisher-Yates: the first k entries become the sample.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> j(i, pool.size() - 1);
    std::swap(pool[i], pool[j(rng)]);
  }
  std::vector<std::size_t> picked(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(picked.begin(), picked.end());
  return picked;
}

MonteCarloResult run_random(const MonteCarloConfig& cfg, Rng& rng, bool retag) {
  std::uniform_int_distribution<unsigned> tag_dist(0, 255);
  std::array<Tag, kClusterSlots> tags;
  GapRecorder rec(kClusterSlots);
  for (std::size_t s = 0; s < kClusterSlots; ++s) {
    tags[s] = static_cast<Tag>(tag_dist(rng));
    rec.assign(s, tags[s], 0);
  }
  std::vector<std::size_t> pool(kClusterSlots);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::uint64_t r = 1; r <= cfg.rounds; ++r) {
    for (std::size_t s : pick_subset(pool, cfg.max_pick, rng)) {
      if (!retag) continue;
      tags[s] = static_cast<Tag>(tag_dist(rng));
      rec.assign(s, tags[s], r);
    }
  }
  MonteCarloResult out;
  out.samples = rec.finish();
  return out;
}

MonteCarloResult run_circular(const MonteCarloConfig& cfg, Rng& rng) {
  if (cfg.allocatable == 0 || cfg.allocatable >= kClusterSlots) {
    throw DomainError("allocatable slots must be in 1..255");
  }
  ClusterState cluster;
  cluster.size_class = SizeClass{0, 0x20};
  cluster.info_slots = kClusterSlots - cfg.allocatable;
  ShadowMap scratch;
  init_cluster_tags(cluster, cfg.quarantine, rng, scratch);

  GapRecorder rec(kClusterSlots);
  for (std::size_t s = cluster.info_slots; s < kClusterSlots; ++s) {
    cluster.slots[s].state = SlotState::InUse;
    rec.assign(s, cluster.slots[s].tag, 0);
  }
  cluster.in_use = static_cast<std::uint32_t>(cfg.allocatable);

  std::vector<std::size_t> pool(cfg.allocatable);
  std::iota(pool.begin(), pool.end(), cluster.info_slots);
  for (std::uint64_t r = 1; r <= cfg.rounds; ++r) {
    const std::vector<std::size_t> picked = pick_subset(pool, cfg.max_pick, rng);
    for (std::size_t s : picked) cluster.slots[s].state = SlotState::Freed;
    rotate_tags(cluster);
    for (std::size_t s : picked) {
      cluster.slots[s].state = SlotState::InUse;
      rec.assign(s, cluster.slots[s].tag, r);
    }
  }
  MonteCarloResult out;
  out.samples = rec.finish();
  if (!out.samples.empty() && out.samples.counts().begin()->first < cfg.quarantine) {
    throw InvariantViolation("circular shift produced a temporal gap of " +
                             std::to_string(out.samples.counts().begin()->first) +
                             " rounds, below the quarantine size");
  }
  return out;
}

}  // namespace

MonteCarloResult monte_carlo_temporal(TemporalArm arm, const MonteCarloConfig& config) {
  if (config.max_pick == 0) throw DomainError("max_pick must be >= 1");
  Rng rng(config.seed);
  MonteCarloResult out;
  switch (arm) {
    case TemporalArm::CircularShift: out = run_circular(config, rng); break;
    case TemporalArm::Random: out = run_random(config, rng, true); break;
    case TemporalArm::NoRetag: out = run_random(config, rng, false); break;
  }
  out.arm = arm;
  out.rounds = config.rounds;
  if (!out.samples.empty()) out.stats = objectives(out.samples);
  return out;
}

}  // namespace ctlab

// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctlab/detect.hpp"

#include <cmath>
#include <vector>

#include "ctlab/errors.hpp"
#include "ctlab/layout.hpp"

namespace ctlab {

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::AdjacentOverflow: return "adjacent-overflow";
    case ViolationKind::NonAdjacentOverflow: return "non-adjacent-overflow";
    case ViolationKind::UseAfterFree: return "use-after-free";
    case ViolationKind::DoubleFree: return "double-free";
  }
  return "unknown";
}

std::optional<ViolationKind> parse_violation(std::string_view name) {
  for (ViolationKind k : {ViolationKind::AdjacentOverflow, ViolationKind::NonAdjacentOverflow,
                          ViolationKind::UseAfterFree, ViolationKind::DoubleFree}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

std::string_view to_string(Classification c) {
  switch (c) {
    case Classification::TP: return "TP";
    case Classification::FN: return "FN";
    case Classification::PN: return "PN";
  }
  return "unknown";
}

CampaignResult classify(std::uint64_t trials, std::uint64_t detected) {
  CampaignResult r;
  r.trials = trials;
  r.detected = detected;
  r.classification = detected == trials ? Classification::TP
                     : detected == 0    ? Classification::FN
                                        : Classification::PN;
  r.miss_rate = trials == 0 ? 0.0
                            : static_cast<double>(trials - detected) / static_cast<double>(trials);
  return r;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct Prepared {
  std::unique_ptr<AllocatorModel> model;
  Rng rng;
  LiveChunk target;
};

Prepared prepare(const ModelFactory& make, std::uint64_t seed, const HarnessConfig& cfg) {
  Prepared p{make(seed), Rng(splitmix64(seed ^ 0xD1B54A32D192ED03ull)), {}};
  AllocatorModel& m = *p.model;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_real_distribution<double> log_size(std::log(double(cfg.warmup_min_size)),
                                                  std::log(double(cfg.warmup_max_size)));
  std::vector<TaggedAddress> live;
  for (std::size_t i = 0; i < cfg.warmup_ops; ++i) {
    if (!live.empty() && coin(p.rng) < cfg.free_probability) {
      std::uniform_int_distribution<std::size_t> pick(0, live.size() - 1);
      const std::size_t k = pick(p.rng);
      m.deallocate(live[k]);
      live[k] = live.back();
      live.pop_back();
    } else {
      live.push_back(m.allocate(static_cast<std::uint64_t>(std::exp(log_size(p.rng)))));
    }
  }
  const TaggedAddress t = m.allocate(cfg.target_size);
  p.target = *m.chunk_at(t.untagged());
  return p;
}

std::uint64_t at_offset(const LiveChunk& target, std::int64_t offset) {
  return target.base() + static_cast<std::uint64_t>(offset);
}

bool inside_target(const LiveChunk& target, std::int64_t offset) {
  return offset >= 0 && static_cast<std::uint64_t>(offset) < target.chunk_bytes;
}

// Allocates same-size chunks until `addr` is covered by a live chunk or the
// groom budget runs out (the address may sit in unmapped space).
void groom(AllocatorModel& m, std::uint64_t addr, const HarnessConfig& cfg) {
  if (m.chunk_at(addr)) return;
  for (std::size_t i = 0; i < cfg.groom_limit; ++i) {
    const TaggedAddress a = m.allocate(cfg.target_size);
    const std::uint64_t len = m.chunk_at(a.untagged())->chunk_bytes;
    if (addr >= a.untagged() && addr < a.untagged() + len) return;
  }
}

bool faults(const AllocatorModel& m, std::uint64_t addr, Tag key) {
  return !m.check_access(make_tagged(addr, key), 1).ok();
}

bool use_after_free(AllocatorModel& m, const LiveChunk& target, std::uint32_t rounds,
                    const HarnessConfig& cfg) {
  m.deallocate(target.addr);
  for (std::uint32_t r = 1; r <= rounds; ++r) {
    std::vector<TaggedAddress> held;
    std::optional<TaggedAddress> back;
    for (std::size_t i = 0; i < cfg.reuse_limit; ++i) {
      const TaggedAddress a = m.allocate(cfg.target_size);
      if (a.untagged() == target.base()) {
        back = a;
        break;
      }
      held.push_back(a);
    }
    for (TaggedAddress h : held) m.deallocate(h);
    if (!back) break;
    if (r < rounds) m.deallocate(*back);
  }
  return faults(m, target.base(), target.addr.tag());
}

bool double_free(AllocatorModel& m, const LiveChunk& target) {
  m.deallocate(target.addr);
  try {
    m.deallocate(target.addr);
  } catch (const DoubleFree&) {
    return true;
  }
  return false;
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial) {
  return splitmix64(splitmix64(seed) + trial);
}

Outcome run_trial(const ModelFactory& make, const Violation& v, std::uint64_t seed,
                  const HarnessConfig& cfg) {
  const bool overflow = v.kind == ViolationKind::AdjacentOverflow ||
                        v.kind == ViolationKind::NonAdjacentOverflow;
  if (overflow && v.offset >= 0 && static_cast<std::uint64_t>(v.offset) < cfg.target_size) {
    throw DomainError("overflow offset " + std::to_string(v.offset) + " is inside the target");
  }
  Prepared p = prepare(make, seed, cfg);
  AllocatorModel& m = *p.model;
  bool detected = false;
  switch (v.kind) {
    case ViolationKind::AdjacentOverflow:
    case ViolationKind::NonAdjacentOverflow: {
      if (inside_target(p.target, v.offset)) {
        throw DomainError("overflow offset " + std::to_string(v.offset) + " is inside the target");
      }
      const std::uint64_t addr = at_offset(p.target, v.offset);
      groom(m, addr, cfg);
      detected = faults(m, addr, p.target.addr.tag());
      break;
    }
    case ViolationKind::UseAfterFree:
      detected = use_after_free(m, p.target, v.realloc_rounds, cfg);
      break;
    case ViolationKind::DoubleFree:
      detected = double_free(m, p.target);
      break;
  }
  return detected ? Outcome::Detected : Outcome::Missed;
}

CampaignResult run_campaign(const ModelFactory& make, const Violation& v, std::uint64_t trials,
                            std::uint64_t seed, const HarnessConfig& cfg) {
  if (trials == 0) throw DomainError("a campaign needs at least one trial");
  std::uint64_t detected = 0;
  for (std::uint64_t i = 0; i < trials; ++i) {
    if (run_trial(make, v, trial_seed(seed, i), cfg) == Outcome::Detected) ++detected;
  }
  return classify(trials, detected);
}

CampaignResult magma_scenario(const ModelFactory& make, std::int64_t low, std::int64_t high,
                              std::uint64_t trials, std::uint64_t seed,
                              const HarnessConfig& cfg) {
  if (trials == 0) throw DomainError("a campaign needs at least one trial");
  if (low > high) throw DomainError("empty offset range");
  std::uint64_t checks = 0;
  std::uint64_t detected = 0;
  for (std::uint64_t i = 0; i < trials; ++i) {
    Prepared p = prepare(make, trial_seed(seed, i), cfg);
    AllocatorModel& m = *p.model;

    // Granules of the sweep not yet backed by a live chunk.
    const std::uint64_t first = at_offset(p.target, low) / kGranuleSize;
    const std::uint64_t last = at_offset(p.target, high) / kGranuleSize;
    std::vector<bool> covered(last - first + 1);
    std::size_t missing = 0;
    for (std::uint64_t g = first; g <= last; ++g) {
      covered[g - first] = m.chunk_at(g * kGranuleSize).has_value();
      if (!covered[g - first]) ++missing;
    }
    for (std::size_t n = 0; n < cfg.groom_limit && missing > 0; ++n) {
      const TaggedAddress a = m.allocate(cfg.target_size);
      const std::uint64_t len = m.chunk_at(a.untagged())->chunk_bytes;
      for (std::uint64_t b = a.untagged(); b < a.untagged() + len; b += kGranuleSize) {
        const std::uint64_t g = b / kGranuleSize;
        if (g >= first && g <= last && !covered[g - first]) {
          covered[g - first] = true;
          --missing;
        }
      }
    }

    for (std::int64_t off = low; off <= high; ++off) {
      if (inside_target(p.target, off)) continue;
      ++checks;
      if (faults(m, at_offset(p.target, off), p.target.addr.tag())) ++detected;
    }
  }
  return classify(checks, detected);
}

}  // namespace ctlab

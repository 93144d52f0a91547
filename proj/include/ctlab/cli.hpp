// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command implementations behind the ctlab tool. Everything here returns
// documents (JSON values, CSV text) so the front end only handles flags,
// files and exit codes.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctlab/config.hpp"
#include "ctlab/detect.hpp"
#include "ctlab/metrics.hpp"
#include "ctlab/monte_carlo.hpp"

namespace ctlab {

using Json = nlohmann::json;

struct TraceEvent {
  enum class Op { Malloc, Free };
  Op op = Op::Malloc;
  std::uint64_t id = 0;
  std::uint64_t size = 0;
};

/// One event per line, {"op":"malloc","id":1,"size":100} or
/// {"op":"free","id":1}. Blank lines are skipped. ParseError carries the
/// 1-based line number.
std::vector<TraceEvent> parse_trace(std::istream& in);

struct Scenario {
  std::string name;
  int cwe = 0;
  /// A violation kind name or "magma".
  std::string kind;
  std::int64_t offset = 0;
  std::uint32_t rounds = 0;
  std::uint64_t trials = 500;
  /// Empty means every model selected on the command line.
  std::vector<std::string> models;
};

/// JSONL, one scenario per line: {"name":..., "cwe":122,
/// "kind":"adjacent-overflow", "offset":32, "trials":500}. Optional keys:
/// rounds, models. ParseError on malformed lines or unknown kinds.
std::vector<Scenario> parse_scenarios(std::istream& in);
/// The bundled set: one or more scenarios for CWE 122, 124, 126, 127, 415
/// and 416 plus the magma sweep.
std::vector<Scenario> default_scenarios();

Json stats_json(const ObjectiveReport& r);
/// stats_json, or null for an empty multiset.
Json stats_json_or_null(const DistanceMultiset& d);
/// "distance,count" header then one row per distinct distance, ascending.
std::string histogram_csv(const DistanceMultiset& d);

inline constexpr const char* kCampaignCsvHeader =
    "model,violation,offset_or_rounds,trials,detected,classification,miss_rate";
std::string campaign_csv_row(const std::string& model, const std::string& violation,
                             const std::string& offset_or_rounds, const CampaignResult& r);

/// Replays a trace through config.strategy. ProtocolError on a free of an
/// id that is not live or a malloc reusing a live id. For clustertag the
/// structural audit runs at the end (InvariantViolation on failure).
Json cmd_replay(const RunConfig& config, const std::vector<TraceEvent>& trace);

struct TemporalOutput {
  Json stats;  ///< {"rounds":..., "arms": {"circular-shift": {...}, "random": {...}}}
  std::string circular_csv;
  std::string random_csv;
};
TemporalOutput cmd_simulate_temporal(const RunConfig& config);

/// Live small chunks after allocating `chunks` blocks of one size, freeing
/// a random half and allocating the same number again.
SnapshotView spatial_workload(AllocatorModel& model, std::uint64_t size, std::size_t chunks,
                              std::uint64_t seed);

struct SpatialOptions {
  std::size_t chunks = 100000;
  std::uint64_t size = 0x20;
};
/// {"density", "model": {...}, "empirical": {strategy: stats or null}}.
Json cmd_analyze_spatial(const RunConfig& config, const SpatialOptions& options = {});
/// model,min,avg,p25,entropy_bits,samples rows from cmd_analyze_spatial.
std::string spatial_csv(const Json& report);

/// Campaign CSV (header always present). `models` empty means all six.
std::string cmd_detect(const RunConfig& config, const std::vector<Scenario>& scenarios,
                       const std::vector<std::string>& models,
                       const HarnessConfig& harness = {});

}  // namespace ctlab

// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctlab/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <istream>
#include <sstream>
#include <unordered_map>

#include "ctlab/baseline.hpp"
#include "ctlab/clustertag_alloc.hpp"
#include "ctlab/errors.hpp"

namespace ctlab {
namespace {

template <typename T>
T required(const Json& j, const char* key, std::size_t line) {
  if (!j.contains(key)) throw ParseError(line, std::string("missing \"") + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(line, std::string("bad value for \"") + key + "\"");
  }
}

template <typename T>
T optional_field(const Json& j, const char* key, T fallback, std::size_t line) {
  return j.contains(key) ? required<T>(j, key, line) : fallback;
}

Json parse_line(const std::string& text, std::size_t line) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(line, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line, "expected a JSON object");
  return j;
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::uint64_t non_negative(const Json& j, const char* key, std::size_t line) {
  const Json& v = j.at(key);
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    throw ParseError(line, std::string("\"") + key + "\" must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::vector<TraceEvent> parse_trace(std::istream& in) {
  std::vector<TraceEvent> out;
  std::string text;
  for (std::size_t line = 1; std::getline(in, text); ++line) {
    if (blank(text)) continue;
    const Json j = parse_line(text, line);
    const auto op = required<std::string>(j, "op", line);
    if (!j.contains("id")) throw ParseError(line, "missing \"id\"");
    TraceEvent e;
    e.id = non_negative(j, "id", line);
    if (op == "malloc") {
      if (!j.contains("size")) throw ParseError(line, "missing \"size\"");
      e.op = TraceEvent::Op::Malloc;
      e.size = non_negative(j, "size", line);
    } else if (op == "free") {
      e.op = TraceEvent::Op::Free;
    } else {
      throw ParseError(line, "unknown op \"" + op + "\"");
    }
    out.push_back(e);
  }
  return out;
}

std::vector<Scenario> parse_scenarios(std::istream& in) {
  std::vector<Scenario> out;
  std::string text;
  for (std::size_t line = 1; std::getline(in, text); ++line) {
    if (blank(text)) continue;
    const Json j = parse_line(text, line);
    Scenario s;
    s.kind = required<std::string>(j, "kind", line);
    if (s.kind != "magma" && !parse_violation(s.kind)) {
      throw ParseError(line, "unknown violation kind \"" + s.kind + "\"");
    }
    s.name = optional_field<std::string>(j, "name", s.kind, line);
    s.cwe = optional_field<int>(j, "cwe", 0, line);
    s.offset = optional_field<std::int64_t>(j, "offset", 0, line);
    s.rounds = optional_field<std::uint32_t>(j, "rounds", 0, line);
    s.trials = optional_field<std::uint64_t>(j, "trials", 500, line);
    s.models = optional_field<std::vector<std::string>>(j, "models", {}, line);
    if (s.trials == 0) throw ParseError(line, "\"trials\" must be at least 1");
    const bool overflow = s.kind == "adjacent-overflow" || s.kind == "non-adjacent-overflow";
    if (overflow && s.offset == 0) throw ParseError(line, "overflow offset must not be 0");
    for (const auto& m : s.models) {
      if (std::find(strategy_names().begin(), strategy_names().end(), m) == strategy_names().end()) {
        throw ParseError(line, "unknown model \"" + m + "\"");
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Scenario> default_scenarios() {
  return {
      {"heap-overflow-adjacent", 122, "adjacent-overflow", 0x20, 0, 500, {}},
      {"heap-overflow-far", 122, "non-adjacent-overflow", 0x1000, 0, 500, {}},
      {"heap-underwrite-adjacent", 124, "adjacent-overflow", -0x10, 0, 500, {}},
      {"heap-over-read", 126, "non-adjacent-overflow", 0x100, 0, 500, {}},
      {"heap-under-read", 127, "non-adjacent-overflow", -0x800, 0, 500, {}},
      {"double-free", 415, "double-free", 0, 0, 500, {}},
      {"use-after-free", 416, "use-after-free", 0, 0, 500, {}},
      {"use-after-free-realloc", 416, "use-after-free", 0, 1, 500, {}},
      {"use-after-free-realloc-15", 416, "use-after-free", 0, 15, 500, {}},
      {"magma", 0, "magma", 0, 0, 500, {}},
  };
}

Json stats_json(const ObjectiveReport& r) {
  return Json{{"min", r.f1_min},
              {"avg", r.f2_avg},
              {"p25", r.p25},
              {"entropy_bits", r.f3_entropy},
              {"samples", r.samples}};
}

Json stats_json_or_null(const DistanceMultiset& d) {
  return d.empty() ? Json(nullptr) : stats_json(objectives(d));
}

std::string histogram_csv(const DistanceMultiset& d) {
  std::string out = "distance,count\n";
  for (const auto& [dist, n] : d.counts()) {
    out += std::to_string(dist) + "," + std::to_string(n) + "\n";
  }
  return out;
}

std::string campaign_csv_row(const std::string& model, const std::string& violation,
                             const std::string& offset_or_rounds, const CampaignResult& r) {
  return model + "," + violation + "," + offset_or_rounds + "," + std::to_string(r.trials) + "," +
         std::to_string(r.detected) + "," + std::string(to_string(r.classification)) + "," +
         format_double(r.miss_rate);
}

Json cmd_replay(const RunConfig& config, const std::vector<TraceEvent>& trace) {
  validate(config);
  auto model = make_model(config, config.strategy, config.seed);
  std::unordered_map<std::uint64_t, TaggedAddress> live;
  for (const TraceEvent& e : trace) {
    if (e.op == TraceEvent::Op::Malloc) {
      if (live.count(e.id) != 0) throw ProtocolError(e.id, "malloc reuses a live id");
      live.emplace(e.id, model->allocate(e.size));
    } else {
      auto it = live.find(e.id);
      if (it == live.end()) throw ProtocolError(e.id, "free of unknown id");
      model->deallocate(it->second);
      live.erase(it);
    }
  }
  if (auto* ct = dynamic_cast<ClusterTagAllocator*>(model.get())) ct->audit();

  const ModelStats s = model->stats();
  return Json{{"model", model->name()},
              {"events", trace.size()},
              {"allocations", s.allocations},
              {"deallocations", s.deallocations},
              {"final_live", s.live_chunks},
              {"peak_live", s.peak_live_chunks},
              {"resident_pages", s.resident_pages},
              {"clusters_placed", s.clusters_placed},
              {"clusters_released", s.clusters_released},
              {"pages_released_fragmented", s.pages_released_fragmented},
              {"spatial", stats_json_or_null(spatial_distances(snapshot_of(*model)))},
              {"temporal", stats_json_or_null(temporal_distances(history_of(model->history())))}};
}

TemporalOutput cmd_simulate_temporal(const RunConfig& config) {
  validate(config);
  if (config.rounds < 1) throw DomainError("rounds must be >= 1");
  MonteCarloConfig mc;
  mc.seed = config.seed;
  mc.rounds = config.rounds;
  mc.quarantine = config.quarantine;
  mc.allocatable = config.allocatable;
  const MonteCarloResult circ = monte_carlo_temporal(TemporalArm::CircularShift, mc);
  const MonteCarloResult rnd = monte_carlo_temporal(TemporalArm::Random, mc);

  TemporalOutput out;
  out.stats = Json{{"rounds", config.rounds},
                   {"quarantine", config.quarantine},
                   {"allocatable", config.allocatable},
                   {"arms",
                    {{"circular-shift", stats_json_or_null(circ.samples)},
                     {"random", stats_json_or_null(rnd.samples)}}}};
  out.circular_csv = histogram_csv(circ.samples);
  out.random_csv = histogram_csv(rnd.samples);
  return out;
}

SnapshotView spatial_workload(AllocatorModel& model, std::uint64_t size, std::size_t chunks,
                              std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TaggedAddress> live;
  live.reserve(chunks);
  for (std::size_t i = 0; i < chunks; ++i) live.push_back(model.allocate(size));
  std::shuffle(live.begin(), live.end(), rng);
  const std::size_t half = chunks / 2;
  for (std::size_t i = 0; i < half; ++i) model.deallocate(live[i]);
  for (std::size_t i = 0; i < half; ++i) live[i] = model.allocate(size);
  return snapshot_of(model);
}

Json cmd_analyze_spatial(const RunConfig& config, const SpatialOptions& options) {
  validate(config);
  const SpatialModelReport m = cluster_spatial_model(config.density);
  Json empirical = Json::object();
  for (const auto& name : strategy_names()) {
    auto model = make_model(config, name, config.seed);
    const SnapshotView snap = spatial_workload(*model, options.size, options.chunks, config.seed);
    empirical[name] = stats_json_or_null(spatial_distances(snap));
  }
  return Json{{"density", config.density},
              {"chunk_size", options.size},
              {"chunks", options.chunks},
              {"model",
               {{"min_chunks", m.min_chunks},
                {"avg_chunks", m.avg_chunks},
                {"entropy_bound_bits", m.entropy_bound_bits}}},
              {"empirical", empirical}};
}

std::string spatial_csv(const Json& report) {
  std::string out = "model,min,avg,p25,entropy_bits,samples\n";
  for (const auto& name : strategy_names()) {
    const Json& s = report.at("empirical").at(name);
    if (s.is_null()) {
      out += name + ",,,,,0\n";
      continue;
    }
    out += name + "," + std::to_string(s.at("min").get<std::uint64_t>()) + "," +
           format_double(s.at("avg").get<double>()) + "," +
           std::to_string(s.at("p25").get<std::uint64_t>()) + "," +
           format_double(s.at("entropy_bits").get<double>()) + "," +
           std::to_string(s.at("samples").get<std::uint64_t>()) + "\n";
  }
  return out;
}

std::string cmd_detect(const RunConfig& config, const std::vector<Scenario>& scenarios,
                       const std::vector<std::string>& models, const HarnessConfig& harness) {
  const std::vector<std::string>& selected = models.empty() ? strategy_names() : models;
  for (const auto& m : selected) {
    RunConfig c = config;
    c.strategy = m;
    if (m == "clustertag") c.tag_bits = 8;
    validate(c);
  }
  std::string out = std::string(kCampaignCsvHeader) + "\n";
  for (const Scenario& s : scenarios) {
    for (const auto& m : selected) {
      if (!s.models.empty() && std::find(s.models.begin(), s.models.end(), m) == s.models.end()) {
        continue;
      }
      const ModelFactory make = model_factory(config, m);
      if (s.kind == "magma") {
        const CampaignResult r =
            magma_scenario(make, kMagmaLowOffset, kMagmaHighOffset, s.trials, config.seed, harness);
        out += campaign_csv_row(m, "magma",
                                std::to_string(kMagmaLowOffset) + ".." + std::to_string(kMagmaHighOffset), r) +
               "\n";
        continue;
      }
      const Violation v{*parse_violation(s.kind), s.offset, s.rounds};
      const CampaignResult r = run_campaign(make, v, s.trials, config.seed, harness);
      const std::string arg = v.kind == ViolationKind::UseAfterFree ? std::to_string(v.realloc_rounds)
                                                                    : std::to_string(v.offset);
      out += campaign_csv_row(m, s.kind, arg, r) + "\n";
    }
  }
  return out;
}

}  // namespace ctlab

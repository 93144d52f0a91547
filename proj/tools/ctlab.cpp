// Copyright 2026 The ctlab Authors
// SPDX-License-Identifier: Apache-2.0
//
// ctlab: trace replay, temporal simulation, spatial analysis and detection
// campaigns. Exit status 0 on success, 1 for bad input, 2 when an internal
// invariant check fails.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "ctlab/cli.hpp"
#include "ctlab/errors.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
  ctlab::RunConfig run;
  std::string output = "json";
  std::string out_dir;
  std::string trace;
  std::string scenarios;
  std::size_t chunks = 100000;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ctlab::DomainError("cannot open " + path);
  return in;
}

void emit(const Options& o, const std::string& file, const std::string& text) {
  if (o.out_dir.empty()) {
    std::cout << text;
    return;
  }
  fs::create_directories(o.out_dir);
  std::ofstream out(fs::path(o.out_dir) / file);
  if (!out) throw ctlab::DomainError("cannot write " + (fs::path(o.out_dir) / file).string());
  out << text;
}

std::string dump(const ctlab::Json& j) { return j.dump(2) + "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctlab: cluster-based tag allocator lab"};
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("--seed", o.run.seed, "PRNG seed");
  app.add_option("--density", o.run.density, "randomization density d")->check(CLI::PositiveNumber);
  app.add_option("--quarantine", o.run.quarantine, "quarantine tags per cluster")->check(CLI::Range(1, 255));
  app.add_option("--tag-bits", o.run.tag_bits, "tag width for baselines")->check(CLI::Range(2, 8));
  app.add_option("--strategy", o.run.strategy, "allocator model")
      ->check(CLI::IsMember(ctlab::strategy_names()));
  app.add_option("--rounds", o.run.rounds, "Monte Carlo rounds");
  app.add_option("--output", o.output, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--out-dir", o.out_dir, "write reports into this directory");

  auto* replay = app.add_subcommand("replay", "replay a JSONL allocation trace");
  replay->add_option("--trace", o.trace, "trace file")->required();
  auto* temporal = app.add_subcommand("simulate-temporal", "single-cluster temporal simulation");
  auto* spatial = app.add_subcommand("analyze-spatial", "spatial collision model and measurements");
  spatial->add_option("--chunks", o.chunks, "live chunks per model")->check(CLI::PositiveNumber);
  auto* detect = app.add_subcommand("detect", "injected-violation campaigns");
  detect->add_option("--scenarios", o.scenarios, "scenario file (default: bundled set)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (replay->parsed()) {
      std::ifstream in = open_input(o.trace);
      emit(o, "replay.json", dump(ctlab::cmd_replay(o.run, ctlab::parse_trace(in))));
    } else if (temporal->parsed()) {
      const auto out = ctlab::cmd_simulate_temporal(o.run);
      if (!o.out_dir.empty()) {
        emit(o, "temporal_stats.json", dump(out.stats));
        emit(o, "temporal_circular-shift.csv", out.circular_csv);
        emit(o, "temporal_random.csv", out.random_csv);
      } else if (o.output == "json") {
        std::cout << dump(out.stats);
      } else if (o.run.strategy == "clustertag") {
        std::cout << out.circular_csv;
      } else if (o.run.strategy == "random") {
        std::cout << out.random_csv;
      } else {
        throw ctlab::DomainError("csv output of simulate-temporal needs --strategy clustertag or random");
      }
    } else if (spatial->parsed()) {
      ctlab::SpatialOptions so;
      so.chunks = o.chunks;
      const auto report = ctlab::cmd_analyze_spatial(o.run, so);
      if (!o.out_dir.empty() || o.output == "json") emit(o, "spatial.json", dump(report));
      if (!o.out_dir.empty() || o.output == "csv") emit(o, "spatial.csv", ctlab::spatial_csv(report));
    } else if (detect->parsed()) {
      std::vector<ctlab::Scenario> scenarios;
      if (o.scenarios.empty()) {
        scenarios = ctlab::default_scenarios();
      } else {
        std::ifstream in = open_input(o.scenarios);
        scenarios = ctlab::parse_scenarios(in);
      }
      std::vector<std::string> models;
      if (app.get_option("--strategy")->count() > 0) models.push_back(o.run.strategy);
      emit(o, "campaigns.csv", ctlab::cmd_detect(o.run, scenarios, models));
    }
  } catch (const ctlab::InvariantViolation& e) {
    std::cerr << "ctlab: invariant violation: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ctlab: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

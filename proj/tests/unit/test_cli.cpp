#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "ctlab/cli.hpp"
#include "ctlab/errors.hpp"

using namespace ctlab;

namespace {

std::vector<TraceEvent> parse_string(const std::string& s) {
  std::istringstream in(s);
  return parse_trace(in);
}

std::vector<Scenario> scenarios_from(const std::string& s) {
  std::istringstream in(s);
  return parse_scenarios(in);
}

void check_stats_schema(const Json& j) {
  REQUIRE(j.is_object());
  CHECK(j.size() == 5);
  CHECK(j.at("min").is_number_unsigned());
  CHECK(j.at("avg").is_number());
  CHECK(j.at("p25").is_number_unsigned());
  CHECK(j.at("entropy_bits").is_number());
  CHECK(j.at("samples").is_number_unsigned());
  CHECK(j.at("min").get<std::uint64_t>() <= j.at("p25").get<std::uint64_t>());
}

void check_stats_schema_or_null(const Json& j) {
  if (!j.is_null()) check_stats_schema(j);
}

// Random well-formed trace: frees only ids that are live.
std::vector<TraceEvent> random_trace(std::size_t events, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TraceEvent> out;
  std::vector<std::uint64_t> live;
  std::uint64_t next_id = 1;
  std::uniform_real_distribution<double> lg(std::log(1.0), std::log(double(0x40000)));
  while (out.size() < events) {
    if (!live.empty() && rng() % 2 == 0) {
      const std::size_t k = rng() % live.size();
      out.push_back({TraceEvent::Op::Free, live[k], 0});
      live[k] = live.back();
      live.pop_back();
    } else {
      out.push_back({TraceEvent::Op::Malloc, next_id, static_cast<std::uint64_t>(std::exp(lg(rng)))});
      live.push_back(next_id++);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("trace parsing") {
  const auto t = parse_string("{\"op\":\"malloc\",\"id\":1,\"size\":32}\n\n  \n{\"op\":\"free\",\"id\":1}\n");
  REQUIRE(t.size() == 2);
  CHECK(t[0].op == TraceEvent::Op::Malloc);
  CHECK(t[0].size == 32);
  CHECK(t[1].op == TraceEvent::Op::Free);
  CHECK(parse_string("").empty());

  auto line_of = [](const std::string& s) -> std::size_t {
    try {
      parse_string(s);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("{\"op\":\"malloc\",\"id\":1,\"size\":32}\n{\"op\":\"malloc\",\"id\":2") == 2);
  CHECK(line_of("\n{\"op\":\"realloc\",\"id\":1}") == 2);
  CHECK(line_of("{\"op\":\"malloc\",\"id\":1}") == 1);
  CHECK(line_of("{\"op\":\"free\"}") == 1);
  CHECK(line_of("{\"op\":\"malloc\",\"id\":-3,\"size\":1}") == 1);
  CHECK(line_of("{\"op\":\"malloc\",\"id\":1,\"size\":\"big\"}") == 1);
  CHECK(line_of("[1,2]") == 1);
}

TEST_CASE("data files parse as expected") {
  std::ifstream good(CTLAB_TEST_DATA "/small_trace.jsonl");
  CHECK_FALSE(parse_trace(good).empty());
  std::ifstream bad(CTLAB_TEST_DATA "/malformed.jsonl");
  CHECK_THROWS_AS(parse_trace(bad), ParseError);
  std::ifstream scen(CTLAB_TEST_DATA "/small_scenarios.jsonl");
  CHECK(parse_scenarios(scen).size() == 3);
}

TEST_CASE("replay protocol errors") {
  RunConfig c;
  const auto unknown = parse_string("{\"op\":\"free\",\"id\":9}");
  try {
    cmd_replay(c, unknown);
    FAIL("expected ProtocolError");
  } catch (const ProtocolError& e) {
    CHECK(e.id() == 9);
  }
  const auto twice = parse_string("{\"op\":\"malloc\",\"id\":1,\"size\":8}\n{\"op\":\"malloc\",\"id\":1,\"size\":8}");
  CHECK_THROWS_AS(cmd_replay(c, twice), ProtocolError);
  const auto again = parse_string(
      "{\"op\":\"malloc\",\"id\":1,\"size\":8}\n{\"op\":\"free\",\"id\":1}\n{\"op\":\"free\",\"id\":1}");
  CHECK_THROWS_AS(cmd_replay(c, again), ProtocolError);
}

TEST_CASE("replay report schema for every strategy") {
  const auto trace = random_trace(3000, 5);
  for (const auto& name : strategy_names()) {
    CAPTURE(name);
    RunConfig c;
    c.strategy = name;
    const Json j = cmd_replay(c, trace);
    CHECK(j.at("model") == name);
    CHECK(j.at("events") == 3000);
    const auto allocs = j.at("allocations").get<std::uint64_t>();
    const auto frees = j.at("deallocations").get<std::uint64_t>();
    CHECK(allocs + frees == 3000);
    CHECK(j.at("final_live").get<std::uint64_t>() == allocs - frees);
    CHECK(j.at("peak_live").get<std::uint64_t>() >= j.at("final_live").get<std::uint64_t>());
    for (const char* k : {"resident_pages", "clusters_placed", "clusters_released",
                          "pages_released_fragmented"}) {
      CHECK(j.at(k).is_number_unsigned());
    }
    // A short trace may leave no same-tag pair (ClusterTag, fixed-temporal).
    check_stats_schema_or_null(j.at("spatial"));
    check_stats_schema_or_null(j.at("temporal"));
    if (name == "random") {
      check_stats_schema(j.at("spatial"));
      check_stats_schema(j.at("temporal"));
    }
  }
}

TEST_CASE("a hundred thousand event replay is deterministic") {
  const auto trace = random_trace(100000, 77);
  RunConfig c;
  c.seed = 3;
  const Json a = cmd_replay(c, trace);
  const Json b = cmd_replay(c, trace);
  CHECK(a == b);
  CHECK(a.at("events") == 100000);
  check_stats_schema_or_null(a.at("spatial"));
  check_stats_schema_or_null(a.at("temporal"));
  c.seed = 4;
  CHECK(cmd_replay(c, trace) != a);
}

TEST_CASE("temporal simulation output") {
  RunConfig c;
  c.rounds = 1;
  const TemporalOutput one = cmd_simulate_temporal(c);
  CHECK(one.stats.at("rounds") == 1);
  CHECK(one.stats.at("arms").at("circular-shift").is_null());
  CHECK(one.circular_csv == "distance,count\n");

  c.rounds = 500;
  const TemporalOutput out = cmd_simulate_temporal(c);
  check_stats_schema(out.stats.at("arms").at("circular-shift"));
  check_stats_schema(out.stats.at("arms").at("random"));
  CHECK(out.stats.at("arms").at("circular-shift").at("min").get<std::uint64_t>() >= 17);

  std::istringstream csv(out.random_csv);
  std::string line;
  std::getline(csv, line);
  CHECK(line == "distance,count");
  std::uint64_t total = 0, prev = 0;
  bool first = true;
  while (std::getline(csv, line)) {
    const auto comma = line.find(',');
    REQUIRE(comma != std::string::npos);
    const std::uint64_t d = std::stoull(line.substr(0, comma));
    if (!first) CHECK(d > prev);
    first = false;
    prev = d;
    total += std::stoull(line.substr(comma + 1));
  }
  CHECK(total == out.stats.at("arms").at("random").at("samples").get<std::uint64_t>());
  CHECK(cmd_simulate_temporal(c).stats == out.stats);

  c.rounds = 0;
  CHECK_THROWS_AS(cmd_simulate_temporal(c), DomainError);
}

TEST_CASE("spatial analysis output") {
  RunConfig c;
  const Json j = cmd_analyze_spatial(c, {4000, 0x20});
  CHECK(j.at("density") == 5);
  CHECK(j.at("model").at("min_chunks") == 256);
  CHECK(j.at("model").at("avg_chunks").get<double>() == doctest::Approx(1280));
  for (const auto& name : strategy_names()) {
    CAPTURE(name);
    check_stats_schema(j.at("empirical").at(name));
  }
  const Json& sticky = j.at("empirical").at("sticky");
  CHECK(sticky.at("min") == 256);
  CHECK(sticky.at("entropy_bits").get<double>() == 0);
  CHECK(j.at("empirical").at("clustertag").at("min").get<std::uint64_t>() >= 256);

  const std::string csv = spatial_csv(j);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "model,min,avg,p25,entropy_bits,samples");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 5);
    ++rows;
  }
  CHECK(rows == strategy_names().size());
}

TEST_CASE("scenario parsing") {
  const auto s = scenarios_from(
      "{\"kind\":\"use-after-free\",\"rounds\":3}\n"
      "{\"name\":\"m\",\"cwe\":122,\"kind\":\"magma\",\"trials\":2,\"models\":[\"sticky\"]}\n");
  REQUIRE(s.size() == 2);
  CHECK(s[0].name == "use-after-free");
  CHECK(s[0].rounds == 3);
  CHECK(s[0].trials == 500);
  CHECK(s[1].models == std::vector<std::string>{"sticky"});
  CHECK_THROWS_AS(scenarios_from("{\"kind\":\"stack-smash\"}"), ParseError);
  CHECK_THROWS_AS(scenarios_from("{\"kind\":\"adjacent-overflow\"}"), ParseError);
  CHECK_THROWS_AS(scenarios_from("{\"kind\":\"double-free\",\"trials\":0}"), ParseError);
  CHECK_THROWS_AS(scenarios_from("{\"kind\":\"double-free\",\"models\":[\"nope\"]}"), ParseError);
  CHECK_THROWS_AS(scenarios_from("{\"rounds\":1}"), ParseError);
  CHECK(default_scenarios().size() == 10);
}

TEST_CASE("detect writes one csv row per scenario and model") {
  RunConfig c;
  HarnessConfig h;
  h.warmup_ops = 200;
  const auto s = scenarios_from(
      "{\"kind\":\"double-free\",\"trials\":3}\n"
      "{\"kind\":\"use-after-free\",\"rounds\":1,\"trials\":3,\"models\":[\"sticky\",\"random\"]}\n"
      "{\"kind\":\"magma\",\"trials\":1,\"models\":[\"clustertag\"]}\n");
  const std::string csv = cmd_detect(c, s, {"clustertag", "sticky"}, h);
  std::istringstream in(csv);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  REQUIRE(lines.size() == 5);
  CHECK(lines[0] == kCampaignCsvHeader);
  CHECK(lines[1] == "clustertag,double-free,0,3,3,TP,0.000000");
  CHECK(lines[2] == "sticky,double-free,0,3,3,TP,0.000000");
  CHECK(lines[3] == "sticky,use-after-free,1,3,0,FN,1.000000");
  CHECK(lines[4].rfind("clustertag,magma,-2095..1791,", 0) == 0);
  CHECK(cmd_detect(c, s, {"clustertag", "sticky"}, h) == csv);
  CHECK(cmd_detect(c, {}, {}, h) == std::string(kCampaignCsvHeader) + "\n");
}

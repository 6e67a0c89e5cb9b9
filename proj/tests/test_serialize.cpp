#include <gtest/gtest.h>

#include "support.hpp"

using namespace trace;
using trace::testing::st;

namespace {

template <typename T>
T round_trip(const T& value) {
  return json::parse(json(value).dump()).get<T>();
}

}  // namespace

TEST(Json, DomainTypesRoundTrip) {
  const auto s = st(3, -2, Heading::SW, 2);
  EXPECT_EQ(round_trip(s), s);
  EXPECT_EQ(json(s)["heading"], "SW");
  const Trajectory t{4, {s, st(2, -1, Heading::SW, 1)}};
  EXPECT_EQ(round_trip(t), t);
  const Observation o{7, 1, 2, 3};
  EXPECT_EQ(round_trip(o), o);
  const OffsetMotif m{{{1, 0, -1, 1}, {0, 0, 0, 0}}, MotifSource::generator};
  EXPECT_EQ(round_trip(m), m);
  const RejectionNote n{ViolationKind::yield, 3};
  EXPECT_EQ(round_trip(n), n);
  EXPECT_EQ(json(n)["violation_kind"], "yield");
  const WindowMetrics wm{2, 10, 3, 3.0 / 13.0, 4};
  EXPECT_EQ(round_trip(wm), wm);
}

TEST(Json, RunConfigRoundTripAndDigest) {
  RunConfig c;
  c.depth = 5;
  c.alpha = 0.5;
  c.seed = 99;
  c.feedback_enabled = false;
  const auto back = round_trip(c);
  EXPECT_EQ(json(back), json(c));
  auto other_seed = c;
  other_seed.seed = 1;
  EXPECT_EQ(config_digest(c), config_digest(other_seed));
  auto other_depth = c;
  other_depth.depth = 4;
  EXPECT_NE(config_digest(c), config_digest(other_depth));
  EXPECT_EQ(config_digest(c).size(), 16U);
}

TEST(Json, RejectsUnknownEnumerations) {
  EXPECT_THROW(json::parse(R"({"x":0,"y":0,"heading":"UP","speed":0})").get<AgentState>(), ParseError);
  EXPECT_THROW(json::parse(R"({"violation_kind":"speeding","step_index":1})").get<RejectionNote>(), ParseError);
  EXPECT_THROW(json::parse(R"({"deltas":[],"source":"oracle"})").get<OffsetMotif>(), ParseError);
  EXPECT_THROW(json::parse(R"({"x":0,"y":0,"speed":0})").get<AgentState>(), json::exception);
}

TEST(Report, JsonLinesRoundTripForEveryMethod) {
  const auto sc = resolve_scenario("t4");
  OracleCache cache;
  std::string lines;
  std::vector<CoverageReport> reports;
  for (auto m : {Method::cot, Method::giot, Method::tot, Method::trace}) {
    RunConfig cfg;
    cfg.seed = 8;
    ScriptedGenerator gen(cfg.seed);
    const auto real = realize(sc, cfg.seed);
    reports.push_back(build_report(run_method(sc, m, gen, cfg, real), sc, &cache));
    lines += to_json_line(reports.back());
  }
  const auto parsed = parse_report_lines(lines);
  ASSERT_EQ(parsed.size(), reports.size());
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    EXPECT_EQ(parsed[i], reports[i]);
    EXPECT_EQ(to_json_line(parsed[i]), to_json_line(reports[i]));
  }
}

TEST(Report, MalformedLineIsLocated) {
  try {
    parse_report_lines("\n{\"scenario_id\": 3}\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line, 2);
  }
}

TEST(Report, CsvRows) {
  CoverageReport r;
  r.scenario_id = "T9";
  r.method = "cot";
  r.seed = 3;
  r.config_digest = "abc";
  WindowReport w;
  w.window = 1;
  w.gamma_star_size = 8;
  w.gamma_dagger_size = 1;
  w.hits = 1;
  w.coverage = 0.125;
  w.metrics = {1, 3, 1, 0.25, 1};
  r.windows = {w, w};
  r.windows[1].window = 2;
  r.windows[1].start_time = 3;
  EXPECT_EQ(csv_rows(r),
            "T9,cot,3,1,0,8,1,1,0.125000,3,1,0.250000,1,abc\n"
            "T9,cot,3,2,3,8,1,1,0.125000,3,1,0.250000,1,abc\n");
  EXPECT_EQ(std::count(kCsvHeader.begin(), kCsvHeader.end(), ','), 13);
}

TEST(Digest, SetDigestIsContentBased) {
  const std::set<Trajectory> a{{0, {st(0, 0, Heading::E, 0)}}, {0, {st(1, 0, Heading::E, 0)}}};
  auto b = a;
  EXPECT_EQ(set_digest(a), set_digest(b));
  b.insert({0, {st(2, 0, Heading::E, 0)}});
  EXPECT_NE(set_digest(a), set_digest(b));
}

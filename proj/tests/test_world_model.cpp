#include <gtest/gtest.h>

#include "support.hpp"

using namespace trace;
using trace::testing::all_states;
using trace::testing::map_of;
using trace::testing::st;

namespace {

const char* kMicroA =
  "6 5\n"
  "......\n"
  ".##...\n"
  "..x.Y.\n"
  ">>>>>>\n"
  "......\n";

const char* kMicroB =
  "5 5\n"
  "..^..\n"
  "#.^.#\n"
  "..^YY\n"
  "x.^..\n"
  "..^..\n"
  "lane_tolerance = 0\n";

}  // namespace

TEST(Kinematic, Examples) {
  const RuleSet rules;
  EXPECT_TRUE(check_kinematic(st(0, 0, Heading::E, 1), st(1, 0, Heading::E, 1), rules));
  EXPECT_TRUE(check_kinematic(st(0, 0, Heading::E, 1), st(2, 0, Heading::E, 2), rules));
  EXPECT_TRUE(check_kinematic(st(0, 0, Heading::E, 1), st(1, -1, Heading::NE, 1), rules));
  // two-unit turn while moving
  EXPECT_FALSE(check_kinematic(st(0, 0, Heading::E, 1), st(0, -1, Heading::N, 1), rules));
  // any heading from rest
  EXPECT_TRUE(check_kinematic(st(0, 0, Heading::E, 0), st(-1, 0, Heading::W, 1), rules));
  // speed jump of two
  EXPECT_FALSE(check_kinematic(st(0, 0, Heading::E, 0), st(2, 0, Heading::E, 2), rules));
  // position does not match speed and heading
  EXPECT_FALSE(check_kinematic(st(0, 0, Heading::E, 1), st(1, 1, Heading::E, 1), rules));
  EXPECT_FALSE(check_kinematic(st(0, 0, Heading::E, 2), st(0, 0, Heading::E, 3), rules));
}

TEST(Compliance, Examples) {
  const auto env = map_of("5 3\n.x...\n>>>>>\n..Y..\n");
  // speed-2 move whose midpoint is restricted
  EXPECT_EQ(first_violation(st(0, 0, Heading::E, 1), st(2, 0, Heading::E, 2), *env), ViolationKind::collision);
  EXPECT_EQ(feasibility(st(0, 0, Heading::E, 1), st(2, 0, Heading::E, 2), *env), 0);
  EXPECT_TRUE(check_kinematic(st(0, 0, Heading::E, 1), st(2, 0, Heading::E, 2), env->rules));
  // heading N on an east lane
  EXPECT_EQ(first_violation(st(1, 2, Heading::N, 0), st(1, 1, Heading::N, 1), *env), ViolationKind::lane);
  // NE is within tolerance
  EXPECT_EQ(feasibility(st(0, 2, Heading::NE, 0), st(1, 1, Heading::NE, 1), *env), 1);
  // yield cap
  EXPECT_EQ(first_violation(st(0, 2, Heading::E, 1), st(2, 2, Heading::E, 2), *env), ViolationKind::yield);
  EXPECT_EQ(feasibility(st(1, 2, Heading::E, 1), st(2, 2, Heading::E, 1), *env), 1);
  // leaving the map
  EXPECT_EQ(feasibility(st(4, 1, Heading::E, 1), st(5, 1, Heading::E, 1), *env), 0);
  EXPECT_EQ(first_violation(st(4, 1, Heading::E, 1), st(5, 1, Heading::E, 1), *env), ViolationKind::collision);
}

TEST(Compliance, DiagonalLineCells) {
  const auto cells = line_cells({0, 0}, {2, 2});
  ASSERT_EQ(cells.size(), 2U);
  EXPECT_EQ(cells[0], (Cell{1, 1}));
  EXPECT_EQ(cells[1], (Cell{2, 2}));
  EXPECT_EQ(line_cells({3, 3}, {3, 3}), (std::vector<Cell>{Cell{3, 3}}));
}

TEST(Successors, MatchBruteForceOnMicroMaps) {
  for (const char* text : {kMicroA, kMicroB}) {
    const auto env = parse_map(text);
    const auto states = all_states(env);
    for (const auto& s : states) {
      std::vector<AgentState> expected;
      for (const auto& n : states) {
        if (feasibility(s, n, env) == 1) expected.push_back(n);
      }
      auto got = successors(s, env);
      std::sort(got.begin(), got.end());
      std::sort(expected.begin(), expected.end());
      ASSERT_EQ(got, expected) << text << " state " << s.x << "," << s.y;
    }
  }
}

TEST(Successors, EnclosedAtRestOnlyTurnsInPlace) {
  const auto env = map_of("3 3\n###\n#.#\n###\n");
  const auto succ = successors(st(1, 1, Heading::E, 0), *env);
  ASSERT_EQ(succ.size(), 8U);
  for (const auto& s : succ) {
    EXPECT_EQ(s.speed, 0);
    EXPECT_EQ(s.cell(), (Cell{1, 1}));
  }
  EXPECT_TRUE(successors(st(1, 1, Heading::E, 2), *env).empty());
}

TEST(MapText, RoundTrip) {
  for (const char* text : {kMicroA, kMicroB}) {
    const auto env = parse_map(text);
    EXPECT_EQ(render_map(env), text);
    EXPECT_EQ(parse_map(render_map(env)), env);
  }
  const auto env = parse_map(kMicroB);
  EXPECT_EQ(env.rules.lane_tolerance, 0);
  EXPECT_TRUE(env.is_yield({3, 2}));
  EXPECT_EQ(env.zone(2, 0).lane_direction, Heading::N);
}

TEST(MapText, ErrorsCarryLineAndColumn) {
  try {
    parse_map("3 2\n...\n.?.\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line, 3);
    EXPECT_EQ(e.column, 2);
  }
  try {
    parse_map("3 2\n...\n..\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line, 3);
  }
  try {
    parse_map("3 1\n...\nspeed_limit = 2\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line, 3);
    EXPECT_NE(std::string(e.what()).find("speed_limit"), std::string::npos);
  }
  EXPECT_THROW(parse_map("0 2\n"), ParseError);
  EXPECT_THROW(parse_map("3 1\n...\nmax_speed = 5\n"), ValidationError);
}

TEST(Feasibility, TrajectoryLevel) {
  const auto env = map_of("5 1\n.....\n");
  const auto ok = trace::testing::traj(0, {st(0, 0, Heading::E, 0), st(1, 0, Heading::E, 1), st(3, 0, Heading::E, 2)});
  EXPECT_TRUE(trajectory_feasible(ok, *env));
  auto bad = ok;
  bad.states[2] = st(4, 0, Heading::E, 2);
  EXPECT_FALSE(trajectory_feasible(bad, *env));
}

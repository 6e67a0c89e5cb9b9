#include <gtest/gtest.h>

#include "support.hpp"

using namespace trace;
using trace::testing::map_of;
using trace::testing::st;

namespace {

GeneratorContext context_on(std::shared_ptr<const EnvMap> env, AgentState anchor) {
  GeneratorContext ctx;
  ctx.env = std::move(env);
  ctx.anchor = anchor;
  ctx.last_obs = {0, anchor.x, anchor.y, 0};
  return ctx;
}

ScriptedParams quiet() {
  ScriptedParams p;
  p.near_miss_rate = 0.0;
  p.weights.exploration_noise = 0.0;
  return p;
}

const char* kOpen =
  "12 7\n"
  "............\n"
  "............\n"
  "............\n"
  ">>>>>>>>>>>>\n"
  "............\n"
  "............\n"
  "............\n";

}  // namespace

TEST(ScriptedGenerator, StraightLaneContinuation) {
  const auto env = map_of(kOpen);
  const auto s = st(3, 3, Heading::E, 1);
  ScriptedParams p;
  p.near_miss_rate = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ScriptedGenerator g(seed, p);
    const auto out = g.propose(context_on(env, s), s, 1);
    ASSERT_EQ(out.size(), 1U);
    EXPECT_EQ(out[0], st(4, 3, Heading::E, 1));
  }
}

TEST(ScriptedGenerator, EnclosedConservativeStopsInPlace) {
  const auto env = map_of("3 3\n###\n#.#\n###\n");
  const auto s = st(1, 1, Heading::E, 0);
  ScriptedParams p;
  p.conservatism = 1.0;
  ScriptedGenerator g(3, p);
  const auto out = g.propose(context_on(env, s), s, 24);
  ASSERT_EQ(out.size(), 8U);
  for (const auto& c : out) {
    EXPECT_EQ(c.cell(), s.cell());
    EXPECT_EQ(c.speed, 0);
  }
}

TEST(ScriptedGenerator, DeterministicPerSeedAndContext) {
  const auto env = map_of(kOpen);
  const auto s = st(5, 1, Heading::SE, 1);
  auto ctx = context_on(env, s);
  ScriptedGenerator a(11), b(11), c(12);
  EXPECT_EQ(a.propose(ctx, s, 5), b.propose(ctx, s, 5));
  bool differs = false;
  for (int i = 0; i < 10 && !differs; ++i) {
    ctx.iteration = i;
    differs = a.propose(ctx, s, 5) != c.propose(ctx, s, 5);
  }
  EXPECT_TRUE(differs);
}

TEST(ScriptedGenerator, RespectsKAndExclusions) {
  const auto env = map_of(kOpen);
  const auto s = st(5, 1, Heading::E, 1);
  auto ctx = context_on(env, s);
  ScriptedGenerator g(1, quiet());
  const auto first = g.propose(ctx, s, 3);
  EXPECT_EQ(first.size(), 3U);
  for (const auto& c : first) ctx.exclusions.insert({s, c});
  const auto second = g.propose(ctx, s, 3);
  for (const auto& c : second) EXPECT_EQ(std::count(first.begin(), first.end(), c), 0);
  EXPECT_TRUE(g.propose(ctx, s, 0).empty());
}

TEST(ScriptedRank, PersistenceIsMaximalForTheSameMotion) {
  const auto env = map_of("9 9\n.........\n.........\n.........\n.........\n.........\n.........\n.........\n.........\n.........\n");
  const auto s = st(4, 4, Heading::NE, 1);
  const auto ctx = context_on(env, s);
  const double best = scripted_rank(s, advance(s, Heading::NE, 1), ctx);
  for (int h = 0; h < kHeadingCount; ++h) {
    for (int v = 0; v <= 2; ++v) {
      const auto c = advance(s, heading_from_index(h), v);
      if (c == advance(s, Heading::NE, 1)) continue;
      EXPECT_LT(scripted_rank(s, c, ctx), best);
    }
  }
}

TEST(ScriptedRank, MotifBonusFavoursAcceptedChanges) {
  const auto env = map_of(kOpen);
  const auto s = st(5, 2, Heading::E, 1);
  auto ctx = context_on(env, s);
  const auto left = advance(s, Heading::NE, 1);
  const double before = scripted_rank(s, left, ctx);
  ctx.accepted_motifs.push_back({{{0, -1, 1, 0}, {0, 0, 0, 0}}, MotifSource::critic});
  EXPECT_DOUBLE_EQ(motif_support(s, left, ctx.accepted_motifs), 1.0);
  EXPECT_DOUBLE_EQ(scripted_rank(s, left, ctx) - before, ScriptedWeights{}.motif_bonus);
  // unchanged motion never draws support
  EXPECT_DOUBLE_EQ(motif_support(s, advance(s, Heading::E, 1), ctx.accepted_motifs), 0.0);

  ScriptedGenerator g(0, quiet());
  ctx.accepted_motifs.assign(4, ctx.accepted_motifs.front());
  EXPECT_EQ(g.propose(ctx, s, 1).front(), left);
}

TEST(ScriptedRank, NotePenaltyTargetsTheCommittedKind) {
  const auto env = map_of(kOpen);
  const auto s = st(5, 2, Heading::E, 1);
  auto ctx = context_on(env, s);
  const auto diagonal = advance(s, Heading::SE, 1);  // SE on an east lane is within tolerance
  const auto lane_break = st(5, 3, Heading::S, 1);    // heading S on an east lane
  ASSERT_EQ(detail::self_check(s, lane_break, *env).size(), 2U);  // also a two-unit turn
  const double clean_before = scripted_rank(s, diagonal, ctx);
  const double bad_before = scripted_rank(s, lane_break, ctx);
  ctx.rejection_notes.assign(10, RejectionNote{ViolationKind::lane, 1});
  EXPECT_DOUBLE_EQ(scripted_rank(s, diagonal, ctx), clean_before);
  EXPECT_LT(scripted_rank(s, lane_break, ctx), bad_before);
}

TEST(Awareness, MonotoneInNotesAndIterations) {
  const auto env = map_of(kOpen);
  auto ctx = context_on(env, st(0, 0, Heading::E, 0));
  const ScriptedWeights w;
  double last = awareness(ctx, ViolationKind::kinematic, w);
  EXPECT_EQ(last, 0.0);
  for (int n = 1; n <= 30; ++n) {
    ctx.rejection_notes.push_back({n % 3 == 0 ? ViolationKind::collision : ViolationKind::kinematic, 1});
    const double a = awareness(ctx, ViolationKind::kinematic, w);
    EXPECT_GE(a, last);
    EXPECT_LT(a, 1.0);
    last = a;
  }
  ctx.iteration = 3;
  EXPECT_GT(awareness(ctx, ViolationKind::kinematic, w), last);
}

TEST(ScriptedGenerator, MoreRejectionFeedbackNeverMeansMoreInvalidProposals) {
  const auto env = map_of(kOpen);
  auto count_invalid = [&](int notes, int iteration) {
    int bad = 0;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      ScriptedGenerator g(seed);
      for (int x = 1; x < 11; ++x) {
        for (int y = 0; y < 7; ++y) {
          const auto s = st(x, y, y == 3 ? Heading::E : Heading::NE, 1);
          auto ctx = context_on(env, s);
          ctx.iteration = iteration;
          ctx.rejection_notes.assign(static_cast<std::size_t>(notes), RejectionNote{ViolationKind::kinematic, 1});
          for (const auto& c : g.propose(ctx, s, 3)) bad += feasibility(s, c, *env) == 0;
        }
      }
    }
    return bad;
  };
  int last = count_invalid(0, 0);
  EXPECT_GT(last, 0);
  for (auto [notes, iteration] : std::vector<std::pair<int, int>>{{5, 1}, {20, 2}, {60, 3}, {200, 6}}) {
    const int now = count_invalid(notes, iteration);
    EXPECT_LE(now, last) << notes << " notes";
    last = now;
  }
  EXPECT_LT(last, count_invalid(0, 0));
}

TEST(ScriptedGenerator, NearMissesAreKinematicallyInfeasible) {
  const auto s = st(5, 5, Heading::E, 1);
  for (std::uint64_t h = 0; h < 16; ++h) {
    const auto v = ScriptedGenerator::near_miss_variant(s, advance(s, Heading::E, 1), h);
    EXPECT_FALSE(check_kinematic(s, v, RuleSet{}));
  }
  const auto rest = st(5, 5, Heading::E, 0);
  EXPECT_FALSE(check_kinematic(rest, ScriptedGenerator::near_miss_variant(rest, advance(rest, Heading::N, 1), 0), RuleSet{}));
}

TEST(ScriptedGenerator, NearMissKeepsTheRankedOrder) {
  const auto env = map_of(kOpen);
  const auto ctx = context_on(env, st(5, 3, Heading::E, 1));
  auto noisy = quiet();
  noisy.near_miss_rate = 1.0;
  ScriptedGenerator clean(4, quiet()), erring(4, noisy);
  const auto want = clean.propose(ctx, ctx.anchor, 4);
  const auto got = erring.propose(ctx, ctx.anchor, 4);
  ASSERT_EQ(got.size(), 4U);
  std::vector<AgentState> feasible;
  int misses = 0;
  for (const auto& c : got) {
    if (feasibility(ctx.anchor, c, *env) == 1) {
      feasible.push_back(c);
    } else {
      ++misses;
    }
  }
  EXPECT_EQ(misses, 1);
  EXPECT_EQ(feasible, std::vector<AgentState>(want.begin(), want.begin() + 3));
}

#include <gtest/gtest.h>

#include "support.hpp"

using namespace trace;
using trace::testing::brute_force_critic;
using trace::testing::map_of;
using trace::testing::st;
using trace::testing::traj;

TEST(ApplyOffsets, FieldWise) {
  const auto base = traj(0, {st(0, 0, Heading::E, 1), st(1, 0, Heading::E, 1), st(2, 0, Heading::E, 1)});
  const auto cf = apply_offsets(base, {{{0, -1, 1, 0}, {1, 0, -1, 1}}});
  EXPECT_EQ(cf.states[0], base.states[0]);
  EXPECT_EQ(cf.states[1], st(1, -1, Heading::NE, 1));
  EXPECT_EQ(cf.states[2], st(3, 0, Heading::SE, 2));
  const auto wrapped = apply_offsets(traj(0, {st(0, 0, Heading::SE, 2), st(1, 1, Heading::SE, 2)}), {{{0, 0, 1, 1}}});
  EXPECT_EQ(wrapped.states[1].heading, Heading::E);
  EXPECT_EQ(wrapped.states[1].speed, 2);
  EXPECT_THROW(apply_offsets(base, {{{0, 0, 0, 0}}}), LengthMismatch);
  EXPECT_THROW(apply_offsets(Trajectory{}, {}), LengthMismatch);
}

TEST(Loss, FeasibilityFraction) {
  const auto env = map_of("6 1\n......\n");
  auto t = traj(0, {st(0, 0, Heading::E, 1), st(1, 0, Heading::E, 1), st(2, 0, Heading::E, 1), st(3, 0, Heading::E, 1)});
  EXPECT_DOUBLE_EQ(loss_feas(t, *env, {3, 3, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(loss_feas(t, *env, {3, 5, 0, 0}), 0.25);
  t.states[3] = st(5, 0, Heading::E, 1);  // position does not follow from the speed
  EXPECT_DOUBLE_EQ(loss_feas(t, *env, {3, 5, 0, 1}), 0.25);
  EXPECT_DOUBLE_EQ(loss_feas(t, *env, {3, 0, 0, 0}), 0.5);
}

TEST(Loss, Divergence) {
  const auto base = traj(0, {st(0, 0, Heading::E, 1), st(1, 0, Heading::E, 1), st(2, 0, Heading::E, 1), st(3, 0, Heading::E, 1)});
  EXPECT_DOUBLE_EQ(loss_div(base, base), 1.0);
  auto cf = base;
  cf.states[2].y = 2;
  cf.states[3].y = -2;
  EXPECT_DOUBLE_EQ(loss_div(base, cf), 0.5);
  EXPECT_THROW(loss_div(base, traj(0, {base.states[0]})), LengthMismatch);
  const auto s = score_counterfactual(base, cf, *map_of("4 1\n....\n"), {0, 0, 0, 0}, 2.0, 3.0);
  EXPECT_DOUBLE_EQ(s.total, 2.0 * s.l_feas + 3.0 * s.l_div);
}

TEST(AdaptProposal, ShiftsMassTowardsAcceptedOffsets) {
  const ProposalWeights prior(3);
  EXPECT_EQ(adapt_proposal(prior, {}), prior);
  for (int step = 0; step < 3; ++step) {
    for (auto c : {ProposalWeights::kHeading, ProposalWeights::kSpeed}) {
      const auto w = prior.weights(step, c);
      EXPECT_DOUBLE_EQ(w[0] + w[1] + w[2], 1.0);
      EXPECT_DOUBLE_EQ(w[0], 1.0 / 3.0);
    }
  }
  const OffsetSequence left{{{0, -1, 1, 0}, {0, 0, 1, -1}, {0, 0, 0, 0}}};
  const auto post = adapt_proposal(prior, {left, left});
  EXPECT_GT(post.weight(0, ProposalWeights::kHeading, 1), prior.weight(0, ProposalWeights::kHeading, 1));
  EXPECT_LT(post.weight(0, ProposalWeights::kHeading, -1), prior.weight(0, ProposalWeights::kHeading, -1));
  EXPECT_GT(post.weight(1, ProposalWeights::kSpeed, -1), prior.weight(1, ProposalWeights::kSpeed, -1));
  EXPECT_DOUBLE_EQ(post.weight(0, ProposalWeights::kHeading, 1), 3.0 / 5.0);
  const auto w = post.weights(2, ProposalWeights::kSpeed);
  EXPECT_DOUBLE_EQ(w[0] + w[1] + w[2], 1.0);
  // adaptation is order-independent
  EXPECT_EQ(adapt_proposal(adapt_proposal(prior, {left}), {left}), post);
}

TEST(Explore, PinnedCorridorHasNoCounterfactuals) {
  const auto env = map_of("7 1\n.......\n");
  const auto base = traj(0, {st(0, 0, Heading::E, 2), st(2, 0, Heading::E, 2), st(4, 0, Heading::E, 2), st(6, 0, Heading::E, 2)});
  RunConfig cfg;
  cfg.critic_samples = 729;
  EXPECT_TRUE(explore(base, *env, {3, 6, 0, 0}, cfg, ProposalWeights(3)).empty());
  EXPECT_TRUE(brute_force_critic(base, *env, {3, 6, 0, 0}, 1, 1, 8).empty());
}

TEST(Explore, DisabledOrTrivialBaseline) {
  const auto env = map_of("4 1\n....\n");
  RunConfig cfg;
  cfg.critic_samples = 0;
  const auto base = traj(0, {st(0, 0, Heading::E, 1), st(1, 0, Heading::E, 1)});
  EXPECT_TRUE(explore(base, *env, {0, 0, 0, 0}, cfg, ProposalWeights(1)).empty());
  cfg.critic_samples = 64;
  EXPECT_TRUE(explore(traj(0, {base.states[0]}), *env, {0, 0, 0, 0}, cfg, ProposalWeights(1)).empty());
}

TEST(Explore, ExhaustiveModeMatchesBruteForce) {
  struct Case {
    const char* map;
    Trajectory base;
    Observation obs;
    int keep;
  };
  const std::vector<Case> cases{
    {"7 7\n.......\n.......\n..#....\n.......\n....x..\n.......\n.......\n",
     traj(0, {st(1, 3, Heading::E, 1), st(2, 3, Heading::E, 1), st(3, 3, Heading::E, 1), st(4, 3, Heading::E, 1)}),
     {3, 4, 3, 1}, 8},
    {"7 7\n.......\n.......\n..#....\n.......\n....x..\n.......\n.......\n",
     traj(0, {st(1, 3, Heading::E, 1), st(2, 3, Heading::E, 1), st(3, 3, Heading::E, 1), st(4, 3, Heading::E, 1)}),
     {3, 4, 3, 1}, 1000},
    {"6 6\n......\n.>>>>.\n.>>>>.\n..Y...\n......\n......\n",
     traj(2, {st(1, 3, Heading::NE, 1), st(2, 2, Heading::NE, 1), st(3, 1, Heading::NE, 1), st(5, 1, Heading::E, 2)}),
     {5, 4, 1, 1}, 5},
    {"5 5\n.....\n.....\n.....\n.....\n.....\n",
     traj(0, {st(2, 2, Heading::N, 0), st(2, 1, Heading::N, 1), st(2, 0, Heading::N, 1)}),
     {0, 2, 2, 0}, 6},
  };
  for (const auto& c : cases) {
    const auto env = parse_map(c.map);
    ASSERT_TRUE(trajectory_feasible(c.base, env));
    RunConfig cfg;
    cfg.critic_samples = 100000;
    cfg.critic_keep = c.keep;
    const auto got = explore(c.base, env, c.obs, cfg, ProposalWeights(3));
    const auto want = brute_force_critic(c.base, env, c.obs, cfg.alpha, cfg.beta, static_cast<std::size_t>(c.keep));
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].trajectory, want[i]) << "rank " << i;
      EXPECT_EQ(apply_offsets(c.base, got[i].offsets), got[i].trajectory);
      EXPECT_EQ(got[i].score.l_feas, 0.0);
    }
  }
}

TEST(Explore, SampledSurvivorsAreValidAndDeterministic) {
  const auto env = map_of("9 9\n.........\n.........\n.........\n...#.....\n.........\n.........\n.........\n.........\n.........\n");
  const auto base = traj(0, {st(1, 4, Heading::E, 1), st(2, 4, Heading::E, 1), st(3, 4, Heading::E, 1), st(4, 4, Heading::E, 1),
                             st(5, 4, Heading::E, 1)});
  RunConfig cfg;
  cfg.critic_samples = 64;
  cfg.seed = 9;
  const Observation obs{0, 1, 4, 0};
  const auto a = explore(base, *env, obs, cfg, ProposalWeights(4), 3);
  const auto b = explore(base, *env, obs, cfg, ProposalWeights(4), 3);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_LE(a.size(), 8U);
  EXPECT_FALSE(a.empty());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].trajectory, b[i].trajectory);
    EXPECT_NE(a[i].trajectory, base);
    EXPECT_TRUE(trajectory_feasible(a[i].trajectory, *env));
    if (i > 0) {
      EXPECT_LE(a[i - 1].score.total, a[i].score.total);
    }
  }
}

#pragma once

// Counterfactual critic: perturbs a baseline trajectory with small per-step
// offsets, scores each counterfactual with
//   L = alpha * L_feas + beta * L_div
// and keeps only world-model-valid, observation-consistent divergent ones.
//
// The proposer is a loss-guided stochastic search. Heading and speed offsets
// are drawn from an adaptive per-step categorical distribution; position
// offsets follow from rolling the motion model forward, so every draw is
// kinematically coherent and only draws whose position offsets stay inside
// {-1, 0, +1} are representable.

#include <array>
#include <cmath>
#include <random>

#include "trace/generators.hpp"

namespace trace {

struct OffsetSequence {
  std::vector<StateOffset> deltas;
  auto operator<=>(const OffsetSequence&) const = default;
};

struct CriticScore {
  double l_feas = 0.0;
  double l_div = 1.0;
  double total = 0.0;
};

inline constexpr std::array<int, 3> kOffsetValues{-1, 0, 1};

/// Applies `offsets` to every state after the (unperturbed) first one.
/// Headings wrap mod 8, speed is clamped to [0, 2], positions are not clamped.
inline Trajectory apply_offsets(const Trajectory& baseline, const OffsetSequence& offsets) {
  if (baseline.empty() || offsets.deltas.size() + 1 != baseline.size()) {
    throw LengthMismatch("offset sequence length " + std::to_string(offsets.deltas.size()) +
                         " does not match baseline suffix length " +
                         std::to_string(baseline.empty() ? 0 : baseline.size() - 1));
  }
  Trajectory out = baseline;
  for (std::size_t i = 1; i < out.states.size(); ++i) {
    const auto& d = offsets.deltas[i - 1];
    auto& s = out.states[i];
    s.x += d.dx;
    s.y += d.dy;
    s.heading = rotate(s.heading, d.dheading);
    s.speed = std::clamp(s.speed + d.dspeed, 0, kMaxSpeedLevel);
  }
  return out;
}

/// Infeasible transitions plus one for an observation contradiction, divided
/// by the number of states.
inline double loss_feas(const Trajectory& traj, const EnvMap& env, const Observation& obs) {
  if (traj.empty()) return 0.0;
  int violations = 0;
  for (std::size_t i = 1; i < traj.states.size(); ++i) {
    if (feasibility(traj.states[i - 1], traj.states[i], env) == 0) ++violations;
  }
  if (!consistent_with(traj, obs)) ++violations;
  return static_cast<double>(violations) / static_cast<double>(traj.size());
}

/// 1 / (1 + D), D the mean Chebyshev distance between corresponding positions.
inline double loss_div(const Trajectory& baseline, const Trajectory& counterfactual) {
  if (baseline.size() != counterfactual.size() || baseline.empty()) {
    throw LengthMismatch("loss_div needs equal, non-empty lengths");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    sum += chebyshev(baseline.states[i].cell(), counterfactual.states[i].cell());
  }
  return 1.0 / (1.0 + sum / static_cast<double>(baseline.size()));
}

inline CriticScore score_counterfactual(const Trajectory& baseline, const Trajectory& cf, const EnvMap& env,
                                        const Observation& obs, double alpha, double beta) {
  CriticScore s;
  s.l_feas = loss_feas(cf, env, obs);
  s.l_div = loss_div(baseline, cf);
  s.total = alpha * s.l_feas + beta * s.l_div;
  return s;
}

// ---------------------------------------------------------------------------
// Proposal distribution
// ---------------------------------------------------------------------------

/// Per-step categorical weights over {-1, 0, +1} for heading and speed
/// offsets, estimated from accepted offsets with add-one smoothing.
class ProposalWeights {
public:
  enum Component : std::size_t { kHeading = 0, kSpeed = 1 };
  using Counts = std::array<std::array<double, 3>, 2>;

  ProposalWeights() : ProposalWeights(1) {}
  explicit ProposalWeights(int steps) : counts_(static_cast<std::size_t>(std::max(1, steps)), Counts{}) {}

  int steps() const { return static_cast<int>(counts_.size()); }

  /// Probability of offset value `value` in {-1, 0, 1}.
  double weight(int step, Component c, int value) const {
    const auto& row = counts_[clamp_step(step)][c];
    const double total = row[0] + row[1] + row[2] + 3.0;
    return (row[static_cast<std::size_t>(value + 1)] + 1.0) / total;
  }

  std::array<double, 3> weights(int step, Component c) const {
    return {weight(step, c, -1), weight(step, c, 0), weight(step, c, 1)};
  }

  void add(int step, Component c, int value) {
    if (step < 0) return;
    if (step >= steps()) counts_.resize(static_cast<std::size_t>(step + 1), Counts{});
    counts_[static_cast<std::size_t>(step)][c][static_cast<std::size_t>(std::clamp(value, -1, 1) + 1)] += 1.0;
  }

  const std::vector<Counts>& counts() const { return counts_; }
  void set_counts(std::vector<Counts> counts) {
    counts_ = std::move(counts);
    if (counts_.empty()) counts_.resize(1, Counts{});
  }

  bool operator==(const ProposalWeights&) const = default;

private:
  std::size_t clamp_step(int step) const {
    return static_cast<std::size_t>(std::clamp(step, 0, steps() - 1));
  }

  std::vector<Counts> counts_;
};

inline ProposalWeights adapt_proposal(ProposalWeights proposal, const std::vector<OffsetSequence>& accepted) {
  for (const auto& seq : accepted) {
    for (std::size_t i = 0; i < seq.deltas.size(); ++i) {
      proposal.add(static_cast<int>(i), ProposalWeights::kHeading, seq.deltas[i].dheading);
      proposal.add(static_cast<int>(i), ProposalWeights::kSpeed, seq.deltas[i].dspeed);
    }
  }
  return proposal;
}

// ---------------------------------------------------------------------------
// Exploration
// ---------------------------------------------------------------------------

struct Counterfactual {
  Trajectory trajectory;
  OffsetSequence offsets;
  CriticScore score;
};

/// Offsets that take `baseline` to `cf` (headings as shortest signed turns).
inline OffsetSequence offsets_between(const Trajectory& baseline, const Trajectory& cf) {
  if (baseline.size() != cf.size() || baseline.empty()) throw LengthMismatch("offsets_between needs equal lengths");
  OffsetSequence seq;
  for (std::size_t i = 1; i < baseline.size(); ++i) {
    const auto& a = baseline.states[i];
    const auto& b = cf.states[i];
    seq.deltas.push_back({b.x - a.x, b.y - a.y, heading_delta(a.heading, b.heading), b.speed - a.speed});
  }
  return seq;
}

/// Index of the first state where the two trajectories differ.
inline std::size_t divergence_step(const Trajectory& a, const Trajectory& b) {
  std::size_t i = 0;
  while (i < a.size() && i < b.size() && a.states[i] == b.states[i]) ++i;
  return i;
}

/// Survivor ordering: total loss, then earliest divergence, then states.
inline bool counterfactual_before(const Trajectory& baseline, const Counterfactual& a, const Counterfactual& b) {
  if (a.score.total != b.score.total) return a.score.total < b.score.total;
  const auto da = divergence_step(baseline, a.trajectory), db = divergence_step(baseline, b.trajectory);
  if (da != db) return da < db;
  return a.trajectory.states < b.trajectory.states;
}

/// Rolls the motion model forward with heading/speed offsets; returns nullopt
/// when a position offset leaves {-1, 0, +1}.
inline std::optional<Trajectory> roll_counterfactual(const Trajectory& baseline,
                                                     const std::vector<std::pair<int, int>>& heading_speed) {
  Trajectory cf = baseline;
  for (std::size_t i = 1; i < cf.states.size(); ++i) {
    const auto& base = baseline.states[i];
    const auto [dh, ds] = heading_speed[i - 1];
    const AgentState next = advance(cf.states[i - 1], rotate(base.heading, dh), std::clamp(base.speed + ds, 0, kMaxSpeedLevel));
    if (std::abs(next.x - base.x) > 1 || std::abs(next.y - base.y) > 1) return std::nullopt;
    cf.states[i] = next;
  }
  return cf;
}

/// Number of distinct heading/speed draws for a suffix of `steps` states,
/// saturating at `cap`.
inline std::uint64_t draw_space_size(std::size_t steps, std::uint64_t cap) {
  std::uint64_t n = 1;
  for (std::size_t i = 0; i < steps; ++i) {
    if (n > cap / 9) return cap;
    n *= 9;
  }
  return n;
}

/// Draws `cfg.critic_samples` offset sequences (all of them when the sample
/// budget covers the whole draw space) and returns at most `cfg.critic_keep`
/// feasible, consistent counterfactuals that differ from the baseline.
inline std::vector<Counterfactual> explore(const Trajectory& baseline, const EnvMap& env, const Observation& obs,
                                           const RunConfig& cfg, const ProposalWeights& proposal,
                                           std::uint64_t stream = 0) {
  std::vector<Counterfactual> survivors;
  if (baseline.size() < 2 || cfg.critic_samples <= 0) return survivors;
  const std::size_t steps = baseline.size() - 1;

  std::set<Trajectory> seen;
  auto consider = [&](const std::vector<std::pair<int, int>>& draw) {
    auto cf = roll_counterfactual(baseline, draw);
    if (!cf || *cf == baseline || seen.count(*cf)) return;
    Counterfactual c{*cf, offsets_between(baseline, *cf), score_counterfactual(baseline, *cf, env, obs, cfg.alpha, cfg.beta)};
    if (c.score.l_feas > 0.0) return;  // any violation disqualifies
    seen.insert(*cf);
    survivors.push_back(std::move(c));
  };

  const auto space = draw_space_size(steps, std::numeric_limits<std::uint64_t>::max() / 16);
  std::vector<std::pair<int, int>> draw(steps, {0, 0});
  if (static_cast<std::uint64_t>(cfg.critic_samples) >= space) {
    for (std::uint64_t code = 0; code < space; ++code) {
      std::uint64_t c = code;
      for (std::size_t i = 0; i < steps; ++i) {
        draw[i] = {static_cast<int>(c % 3) - 1, static_cast<int>((c / 3) % 3) - 1};
        c /= 9;
      }
      consider(draw);
    }
  } else {
    std::mt19937_64 rng(hash_trajectory(hash_combine(cfg.seed, stream), baseline));
    for (int sample = 0; sample < cfg.critic_samples; ++sample) {
      for (std::size_t i = 0; i < steps; ++i) {
        const auto wh = proposal.weights(static_cast<int>(i), ProposalWeights::kHeading);
        const auto ws = proposal.weights(static_cast<int>(i), ProposalWeights::kSpeed);
        std::discrete_distribution<int> dh(wh.begin(), wh.end()), ds(ws.begin(), ws.end());
        draw[i] = {dh(rng) - 1, ds(rng) - 1};
      }
      consider(draw);
    }
  }

  std::sort(survivors.begin(), survivors.end(),
            [&](const Counterfactual& a, const Counterfactual& b) { return counterfactual_before(baseline, a, b); });
  if (survivors.size() > static_cast<std::size_t>(cfg.critic_keep)) survivors.resize(static_cast<std::size_t>(cfg.critic_keep));
  return survivors;
}

}  // namespace trace

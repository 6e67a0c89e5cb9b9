#pragma once

// Hypothesis generators. The scripted generator is a deterministic stand-in
// for a vision-language model: it ranks kinematically plausible next states by
// a persistence-biased score, occasionally emits near-miss infeasible
// candidates, and reacts to the feedback carried in its context.

#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <vector>

#include "trace/world_model.hpp"

namespace trace {

/// Per-step state offset; components are applied field-wise (heading mod 8).
struct StateOffset {
  int dx = 0;
  int dy = 0;
  int dheading = 0;
  int dspeed = 0;

  bool is_zero() const { return dx == 0 && dy == 0 && dheading == 0 && dspeed == 0; }
  auto operator<=>(const StateOffset&) const = default;
};

enum class MotifSource : std::uint8_t { critic, generator };

struct OffsetMotif {
  std::vector<StateOffset> deltas;
  MotifSource source = MotifSource::critic;
  bool operator==(const OffsetMotif&) const = default;
};

struct RejectionNote {
  ViolationKind violation_kind = ViolationKind::kinematic;
  int step_index = 0;
  bool operator==(const RejectionNote&) const = default;
};

/// Everything a generator sees besides the state being expanded.
struct GeneratorContext {
  std::shared_ptr<const EnvMap> env;
  AgentState anchor;
  Observation last_obs;
  std::vector<OffsetMotif> accepted_motifs;
  std::vector<RejectionNote> rejection_notes;
  int iteration = 0;
  /// (from, candidate) pairs the generator must not propose again. Only the
  /// guided-iteration baseline fills this.
  std::set<std::pair<AgentState, AgentState>> exclusions;
};

class Generator {
public:
  virtual ~Generator() = default;
  /// At most `k` candidate next states for `state`; not guaranteed feasible.
  virtual std::vector<AgentState> propose(const GeneratorContext& ctx, const AgentState& state, int k) = 0;
};

// ---------------------------------------------------------------------------
// Scripted generator
// ---------------------------------------------------------------------------

/// Score weights. Every term lies in [0, 1] before weighting.
struct ScriptedWeights {
  double heading_persistence = 2.0;
  double speed_persistence = 1.0;
  double lane_alignment = 0.5;
  double obstacle_proximity = 0.25;
  double motif_bonus = 0.6;
  double note_penalty = 4.0;
  /// Exposure at which awareness of a violation kind reaches one half.
  double awareness_half_exposure = 80.0;
  /// Share of notes of other kinds that still count towards a kind.
  double awareness_spill = 0.25;
  /// Kinematic exposure over which the near-miss rate falls by a factor e.
  double near_miss_decay_exposure = 800.0;
  /// Amplitude of the seeded exploration noise added in `propose`.
  double exploration_noise = 0.3;
  /// Candidates whose summed awareness reaches this are not proposed at all.
  double suppress_awareness = 0.5;
};

struct ScriptedParams {
  ScriptedWeights weights;
  /// In [0, 1]. Scales how strongly visibly blocked motion is avoided; at 1.0
  /// such candidates are never proposed and no near misses are injected.
  double conservatism = 0.0;
  double near_miss_rate = 0.25;
};

inline ScriptedParams scripted_params_for(const RunConfig& cfg) {
  ScriptedParams p;
  p.near_miss_rate = cfg.near_miss_rate;
  return p;
}

/// Exposure to one violation kind: the (partly shared) note count times the
/// number of feedback rounds seen so far, since notes stay in context and are
/// reread every iteration.
inline double exposure(const GeneratorContext& ctx, ViolationKind kind, const ScriptedWeights& w) {
  if (ctx.rejection_notes.empty()) return 0.0;
  const auto own = static_cast<double>(std::count_if(ctx.rejection_notes.begin(), ctx.rejection_notes.end(),
                                                     [&](const RejectionNote& r) { return r.violation_kind == kind; }));
  const double other = static_cast<double>(ctx.rejection_notes.size()) - own;
  return (own + w.awareness_spill * other) * (1.0 + ctx.iteration);
}

/// Awareness in [0, 1) of one violation kind.
inline double awareness(const GeneratorContext& ctx, ViolationKind kind, const ScriptedWeights& w) {
  const double e = exposure(ctx, kind, w);
  return e / (e + w.awareness_half_exposure);
}

namespace detail {

inline bool motion_blocked(const AgentState& from, const AgentState& to, const EnvMap& env) {
  for (Cell c : line_cells(from.cell(), to.cell())) {
    if (!env.passable(c)) return true;
  }
  return false;
}

inline double blocked_neighbour_fraction(Cell c, const EnvMap& env) {
  if (!env.passable(c)) return 1.0;
  int blocked = 0;
  for (int h = 0; h < kHeadingCount; ++h) {
    auto [ux, uy] = unit_step(heading_from_index(h));
    if (!env.passable({c.x + ux, c.y + uy})) ++blocked;
  }
  return blocked / 8.0;
}

/// Violation kinds the generator can recognise in its own candidate.
inline std::vector<ViolationKind> self_check(const AgentState& state, const AgentState& cand, const EnvMap& env) {
  std::vector<ViolationKind> out;
  if (!check_kinematic(state, cand, env.rules)) out.push_back(ViolationKind::kinematic);
  if (motion_blocked(state, cand, env)) out.push_back(ViolationKind::collision);
  if (env.in_bounds(cand.cell())) {
    if (!lane_ok(cand, env)) out.push_back(ViolationKind::lane);
    if (!yield_ok(cand, env)) out.push_back(ViolationKind::yield);
  }
  return out;
}

}  // namespace detail

/// Fraction of non-trivial accepted motif steps whose (dheading, dspeed) equal
/// the candidate's change relative to `state`.
inline double motif_support(const AgentState& state, const AgentState& cand, const std::vector<OffsetMotif>& motifs) {
  const int dh = heading_delta(state.heading, cand.heading);
  const int dv = cand.speed - state.speed;
  if (dh == 0 && dv == 0) return 0.0;
  std::size_t total = 0, hits = 0;
  for (const auto& m : motifs) {
    for (const auto& d : m.deltas) {
      if (d.dheading == 0 && d.dspeed == 0) continue;
      ++total;
      if (d.dheading == dh && d.dspeed == dv) ++hits;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

/// Summed awareness over the violation kinds the candidate visibly commits.
inline double note_awareness(const AgentState& state, const AgentState& candidate, const GeneratorContext& ctx,
                             const ScriptedParams& params) {
  double total = 0.0;
  for (ViolationKind k : detail::self_check(state, candidate, *ctx.env)) {
    double a = awareness(ctx, k, params.weights);
    if (k == ViolationKind::collision) a = std::max(a, params.conservatism);
    total += a;
  }
  return total;
}

/// score = heading persistence + speed persistence + lane alignment
///       - obstacle proximity + motif bonus - rejection-note penalty
inline double scripted_rank(const AgentState& state, const AgentState& candidate, const GeneratorContext& ctx,
                            const ScriptedParams& params = {}) {
  const auto& env = *ctx.env;
  const auto& w = params.weights;
  const double dh = std::abs(heading_delta(state.heading, candidate.heading));
  const double dv = std::min(2, std::abs(candidate.speed - state.speed));

  double lane = 1.0;
  if (env.in_bounds(candidate.cell()) && env.zone(candidate.cell()).kind == ZoneKind::lane) {
    lane = 1.0 - std::abs(heading_delta(*env.zone(candidate.cell()).lane_direction, candidate.heading)) / 4.0;
  }

  double score = w.heading_persistence * (1.0 - dh / 4.0) + w.speed_persistence * (1.0 - dv / 2.0) +
                 w.lane_alignment * lane - w.obstacle_proximity * detail::blocked_neighbour_fraction(candidate.cell(), env) +
                 w.motif_bonus * motif_support(state, candidate, ctx.accepted_motifs);

  return score - w.note_penalty * note_awareness(state, candidate, ctx, params);
}

class ScriptedGenerator final : public Generator {
public:
  explicit ScriptedGenerator(std::uint64_t seed, ScriptedParams params = {}) : seed_(seed), params_(params) {}

  const ScriptedParams& params() const { return params_; }

  std::vector<AgentState> propose(const GeneratorContext& ctx, const AgentState& state, int k) override {
    const auto& env = *ctx.env;
    std::uint64_t key = hash_combine(seed_, static_cast<std::uint64_t>(ctx.iteration));
    key = hash_state(key, ctx.anchor);
    key = hash_state(key, state);

    struct Ranked {
      AgentState s;
      double score;
    };
    std::vector<Ranked> pool;
    const int lo = std::max(0, state.speed - env.rules.max_speed_delta);
    const int hi = std::min(env.rules.max_speed, state.speed + env.rules.max_speed_delta);
    for (int h = 0; h < kHeadingCount; ++h) {
      const Heading heading = heading_from_index(h);
      if (state.speed > 0 && std::abs(heading_delta(state.heading, heading)) > env.rules.max_heading_delta) continue;
      for (int v = lo; v <= hi; ++v) {
        const AgentState cand = advance(state, heading, v);
        if (ctx.exclusions.count({state, cand})) continue;
        if (params_.conservatism >= 1.0 && detail::motion_blocked(state, cand, env)) continue;
        if (note_awareness(state, cand, ctx, params_) >= params_.weights.suppress_awareness) continue;
        const double noise = params_.weights.exploration_noise * unit_interval(hash_state(key, cand));
        pool.push_back({cand, scripted_rank(state, cand, ctx, params_) + noise});
      }
    }
    std::stable_sort(pool.begin(), pool.end(), [](const Ranked& a, const Ranked& b) {
      if (a.score != b.score) return a.score > b.score;
      return std::pair{index_of(a.s.heading), a.s.speed} < std::pair{index_of(b.s.heading), b.s.speed};
    });

    const double near_miss =
      params_.near_miss_rate * (1.0 - params_.conservatism) *
      std::exp(-exposure(ctx, ViolationKind::kinematic, params_.weights) / params_.weights.near_miss_decay_exposure);

    std::vector<AgentState> out;
    const auto push = [&](const AgentState& s) {
      if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    };
    bool injected = false;  // at most one near miss per call
    for (int slot = 0; slot < k && slot < static_cast<int>(pool.size()); ++slot) {
      const AgentState& cand = pool[static_cast<std::size_t>(slot)].s;
      // Not keyed on the iteration, so a slot injected at a lower near-miss
      // rate is also injected at every higher one.
      const std::uint64_t slot_key = hash_combine(hash_state(hash_state(seed_, ctx.anchor), state),
                                                  0x6e6d0000ULL + static_cast<std::uint64_t>(slot));
      if (!injected && unit_interval(slot_key) < near_miss) {
        // The miss goes in ahead of the candidate it garbles and pushes the
        // lowest-ranked one out.
        const AgentState miss = near_miss_variant(state, cand, mix64(slot_key));
        injected = true;
        if (!ctx.exclusions.count({state, miss})) push(miss);
      }
      push(cand);
    }
    if (static_cast<int>(out.size()) > k) out.resize(static_cast<std::size_t>(std::max(k, 0)));
    return out;
  }

  /// A kinematically infeasible neighbour of `cand`: a two-unit turn while
  /// moving, or a two-level speed jump from rest.
  static AgentState near_miss_variant(const AgentState& state, const AgentState& cand, std::uint64_t h) {
    if (state.speed > 0) {
      const int sign = (h & 1U) ? 1 : -1;
      return advance(state, rotate(state.heading, 2 * sign), std::max(1, cand.speed));
    }
    return advance(state, cand.heading, 2);
  }

private:
  std::uint64_t seed_;
  ScriptedParams params_;
};

}  // namespace trace

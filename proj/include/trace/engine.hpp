#pragma once

// The iterative hypothesis loop: tree-of-thought expansion, counterfactual
// enrichment, three-way classification with feedback, and observation-driven
// pruning between measurement windows.

#include <map>
#include <queue>

#include "trace/critic.hpp"

namespace trace {

struct WindowMetrics {
  int window = 0;
  int valid_count = 0;
  int invalid_count = 0;
  double invalid_rate = 0.0;
  int distinct_vlm_valid_count = 0;
  bool operator==(const WindowMetrics&) const = default;
};

/// Bookkeeping for the current measurement window.
struct WindowAccumulator {
  int valid = 0;
  int invalid = 0;
  std::set<Trajectory> generator_paths;  // feasible depth-Δ paths reached by the generator alone
};

struct EngineState {
  TrajectoryTree tree;
  GeneratorContext ctx;
  ProposalWeights proposal;
  std::set<Trajectory> hypotheses;
  int iteration = 0;
  int window = 1;
  int anchor_time = 0;
  std::vector<Observation> window_obs;
  WindowAccumulator accumulator;
  std::vector<OffsetSequence> pending_accepted;
};

inline EngineState make_engine_state(std::shared_ptr<const EnvMap> env, const AgentState& anchor, const Observation& obs,
                                     const RunConfig& cfg) {
  cfg.validate();
  cfg.validate_anchor_time(obs.time);
  if (!state_admissible(anchor, *env)) throw ValidationError("anchor is not an admissible state on this map");
  EngineState st;
  st.tree = TrajectoryTree(anchor, obs.time);
  st.ctx.env = std::move(env);
  st.ctx.anchor = anchor;
  st.ctx.last_obs = obs;
  st.proposal = ProposalWeights(cfg.depth);
  st.anchor_time = obs.time;
  st.window_obs = {obs};
  return st;
}

// ---------------------------------------------------------------------------
// Invariant checks
// ---------------------------------------------------------------------------

/// Throws std::logic_error if any hypothesis is infeasible or contradicts an
/// observation of the current window, or if the tree is malformed.
inline void assert_sound(const EngineState& st, const EnvMap& env, const RunConfig& cfg) {
  if (auto err = st.tree.check_well_formed(cfg.depth)) throw std::logic_error("tree invariant: " + *err);
  for (const auto& t : st.hypotheses) {
    if (!trajectory_feasible(t, env)) throw std::logic_error("unsound hypothesis: infeasible transition");
    if (!consistent_with_all(t, st.window_obs)) throw std::logic_error("unsound hypothesis: contradicts an observation");
  }
  for (const auto& n : st.tree.nodes()) {
    if ((n.tag == NodeTag::feasible || n.tag == NodeTag::edge_case) && n.id != 0 &&
        !trajectory_feasible(st.tree.path_to(n.id), env)) {
      throw std::logic_error("tree invariant: feasible-tagged node on an infeasible path");
    }
  }
}

inline void refresh_hypotheses(EngineState& st, const RunConfig& cfg) {
  st.hypotheses.clear();
  for (auto& t : st.tree.live_paths_at_depth(cfg.depth)) {
    if (consistent_with_all(t, st.window_obs)) st.hypotheses.insert(std::move(t));
  }
}

/// First violation of a proposed transition, observation consistency included.
inline std::optional<ViolationKind> classify_transition(const AgentState& from, const AgentState& to, int to_time,
                                                        const EnvMap& env, const std::vector<Observation>& obs) {
  if (auto v = first_violation(from, to, env)) return v;
  for (const auto& o : obs) {
    if (o.time == to_time && chebyshev(to.cell(), o.cell()) > o.noise_radius) return ViolationKind::observation;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Loop operations
// ---------------------------------------------------------------------------

/// Breadth-first generator expansion from the root to the configured depth.
/// Feasible candidates become (or reuse) child nodes; infeasible ones become
/// implausible leaves and rejection notes. The generator sees the context as
/// it was at the start of the pass.
inline EngineState expand_tree(EngineState st, Generator& generator, const EnvMap& env, const RunConfig& cfg) {
  const GeneratorContext snapshot = st.ctx;
  std::vector<RejectionNote> notes;
  std::vector<int> frontier{0};
  for (int depth = 0; depth < cfg.depth && !frontier.empty(); ++depth) {
    std::vector<int> next;
    for (int id : frontier) {
      const AgentState from = st.tree.node(id).state;
      for (const AgentState& cand : generator.propose(snapshot, from, cfg.branching)) {
        const int time = st.tree.root_time() + depth + 1;
        const auto violation = classify_transition(from, cand, time, env, st.window_obs);
        auto existing = st.tree.find_child(id, cand);
        if (!violation) {
          ++st.accumulator.valid;
          const int child = existing ? *existing : st.tree.add_child(id, cand, NodeTag::proposed);
          if (std::find(next.begin(), next.end(), child) == next.end()) next.push_back(child);
        } else {
          ++st.accumulator.invalid;
          if (!existing) st.tree.add_child(id, cand, NodeTag::implausible);
          notes.push_back({*violation, depth + 1});
        }
      }
    }
    frontier = std::move(next);
  }
  for (int id : frontier) {
    if (st.tree.node(id).depth == cfg.depth && st.tree.path_is_live(id)) {
      st.accumulator.generator_paths.insert(st.tree.path_to(id));
    }
  }
  st.ctx.rejection_notes.insert(st.ctx.rejection_notes.end(), notes.begin(), notes.end());
  refresh_hypotheses(st, cfg);
  assert_sound(st, env, cfg);
  return st;
}

/// Runs the critic on every hypothesis and grafts the new counterfactuals as
/// edge-case nodes; their offsets become accepted motifs.
inline EngineState enrich_with_counterfactuals(EngineState st, const EnvMap& env, const RunConfig& cfg) {
  if (cfg.critic_samples <= 0) return st;
  const Observation& obs = st.window_obs.back();
  const std::vector<Trajectory> baselines(st.hypotheses.begin(), st.hypotheses.end());
  const auto stream = hash_combine(static_cast<std::uint64_t>(st.iteration), static_cast<std::uint64_t>(st.window));
  for (const auto& base : baselines) {
    for (auto& cf : explore(base, env, obs, cfg, st.proposal, stream)) {
      if (st.hypotheses.count(cf.trajectory)) continue;
      st.tree.graft(cf.trajectory, NodeTag::edge_case);
      st.hypotheses.insert(cf.trajectory);
      st.ctx.accepted_motifs.push_back({cf.offsets.deltas, MotifSource::critic});
      st.pending_accepted.push_back(std::move(cf.offsets));
    }
  }
  refresh_hypotheses(st, cfg);
  assert_sound(st, env, cfg);
  return st;
}

/// Classifies generator nodes on hypothesis paths as feasible, carries or
/// clears feedback, and advances the iteration counter.
inline EngineState integrate_feedback(EngineState st, const RunConfig& cfg) {
  for (const auto& n : st.tree.nodes()) {
    if (n.depth != cfg.depth || !st.tree.path_is_live(n.id)) continue;
    for (int a = n.id; a != TrajectoryTree::kNoParent; a = st.tree.node(a).parent_id) {
      if (st.tree.node(a).tag == NodeTag::proposed) st.tree.set_tag(a, NodeTag::feasible);
    }
  }
  if (cfg.feedback_enabled) {
    st.proposal = adapt_proposal(std::move(st.proposal), st.pending_accepted);
  } else {
    st.ctx.accepted_motifs.clear();
    st.ctx.rejection_notes.clear();
  }
  st.pending_accepted.clear();
  st.iteration += 1;
  st.ctx.iteration = st.iteration;
  return st;
}

/// Snaps a measured position to the nearest passable cell (Chebyshev rings,
/// ties in row-major order).
inline Cell snap_to_map(Cell measured, const EnvMap& env) {
  Cell c{std::clamp(measured.x, 0, env.width() - 1), std::clamp(measured.y, 0, env.height() - 1)};
  if (env.passable(c)) return c;
  const int max_r = std::max(env.width(), env.height());
  for (int r = 1; r <= max_r; ++r) {
    for (int y = c.y - r; y <= c.y + r; ++y) {
      for (int x = c.x - r; x <= c.x + r; ++x) {
        if (std::max(std::abs(x - c.x), std::abs(y - c.y)) == r && env.passable({x, y})) return {x, y};
      }
    }
  }
  return c;
}

/// New anchor after a measurement: the measured cell, with the heading and
/// speed most common among the surviving states nearest the measurement.
/// Falls back to the lane direction (or the previous heading) at rest when
/// nothing usable survives.
inline AgentState reanchor(const std::vector<AgentState>& survivors, const Observation& obs, const EnvMap& env,
                           const AgentState& previous) {
  const Cell cell = snap_to_map(obs.cell(), env);
  const auto& zone = env.zone(cell);
  int nearest = std::numeric_limits<int>::max();
  for (const auto& s : survivors) nearest = std::min(nearest, chebyshev(s.cell(), cell));
  std::map<std::pair<int, int>, int> votes;  // (heading index, speed) -> count
  for (const auto& s : survivors) {
    if (chebyshev(s.cell(), cell) == nearest) ++votes[{index_of(s.heading), s.speed}];
  }
  std::optional<std::pair<int, int>> best;
  for (const auto& [key, n] : votes) {
    if (!best || n > votes[*best]) best = key;
  }
  if (best) {
    AgentState a{cell.x, cell.y, heading_from_index(best->first), best->second};
    if (zone.kind == ZoneKind::lane && !lane_ok(a, env)) a.heading = *zone.lane_direction;
    if (!yield_ok(a, env)) a.speed = env.rules.yield_speed_cap;
    if (state_admissible(a, env) && !successors(a, env).empty()) return a;
  }
  const Heading h = zone.kind == ZoneKind::lane ? *zone.lane_direction : previous.heading;
  return {cell.x, cell.y, h, 0};
}

/// Prunes branches inconsistent with `obs`, opens the next window and
/// re-anchors. Feedback context carries over.
inline EngineState on_new_observation(EngineState st, const Observation& obs, const EnvMap& env, const RunConfig& cfg) {
  const std::size_t before = st.hypotheses.size();
  const int depth = obs.time - st.tree.root_time();
  std::vector<AgentState> survivors;
  if (depth >= 0 && depth <= cfg.depth) {
    for (const auto& n : st.tree.nodes()) {
      if (n.depth != depth || !st.tree.path_is_live(n.id)) continue;
      if (chebyshev(n.state.cell(), obs.cell()) > obs.noise_radius) st.tree.tag_subtree(n.id, NodeTag::pruned);
    }
    for (const auto& n : st.tree.nodes()) {
      if (n.depth == depth && st.tree.path_is_live(n.id)) survivors.push_back(n.state);
    }
  }
  st.window_obs.push_back(obs);
  refresh_hypotheses(st, cfg);
  assert_sound(st, env, cfg);
  if (st.hypotheses.size() > before) throw std::logic_error("pruning increased the hypothesis set");

  st.ctx.anchor = reanchor(survivors, obs, env, st.ctx.anchor);
  st.ctx.last_obs = obs;
  st.anchor_time = obs.time;
  st.window += 1;
  return st;
}

/// Starts a fresh tree at the current anchor if the previous window ended.
inline EngineState begin_window(EngineState st) {
  if (st.tree.root().state != st.ctx.anchor || st.tree.root_time() != st.anchor_time) {
    st.tree = TrajectoryTree(st.ctx.anchor, st.anchor_time);
    st.hypotheses.clear();
    st.window_obs = {st.ctx.last_obs};
  }
  st.accumulator = {};
  return st;
}

inline WindowMetrics window_metrics(const EngineState& st) {
  WindowMetrics m;
  m.window = st.window;
  m.valid_count = st.accumulator.valid;
  m.invalid_count = st.accumulator.invalid;
  const int total = m.valid_count + m.invalid_count;
  m.invalid_rate = total == 0 ? 0.0 : static_cast<double>(m.invalid_count) / total;
  m.distinct_vlm_valid_count = static_cast<int>(st.accumulator.generator_paths.size());
  return m;
}

/// One measurement window: expand, enrich, integrate, repeated
/// `cfg.iterations_per_window` times.
inline std::pair<EngineState, WindowMetrics> run_window(EngineState st, Generator& generator, const EnvMap& env,
                                                        const RunConfig& cfg) {
  st = begin_window(std::move(st));
  for (int r = 0; r < cfg.iterations_per_window; ++r) {
    st = expand_tree(std::move(st), generator, env, cfg);
    st = enrich_with_counterfactuals(std::move(st), env, cfg);
    st = integrate_feedback(std::move(st), cfg);
  }
  auto metrics = window_metrics(st);
  return {std::move(st), metrics};
}

}  // namespace trace

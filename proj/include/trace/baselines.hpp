#pragma once

// Comparison strategies over the same generator and world model, and the
// multi-window driver shared by every method.

#include "trace/engine.hpp"
#include "trace/scenarios.hpp"

namespace trace {

enum class Method : std::uint8_t { trace, cot, giot, tot };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::trace: return "trace";
    case Method::cot: return "cot";
    case Method::giot: return "giot";
    case Method::tot: return "tot";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view s) {
  for (auto m : {Method::trace, Method::cot, Method::giot, Method::tot}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

/// Hypotheses and generator statistics of one baseline pass.
struct BaselineResult {
  std::set<Trajectory> hypotheses;
  WindowAccumulator stats;
};

inline GeneratorContext baseline_context(std::shared_ptr<const EnvMap> env, const AgentState& anchor, const Observation& obs) {
  GeneratorContext ctx;
  ctx.env = std::move(env);
  ctx.anchor = anchor;
  ctx.last_obs = obs;
  return ctx;
}

/// Greedy single rollout: the top-ranked feasible candidate at every step.
inline BaselineResult run_cot(Generator& generator, const GeneratorContext& ctx, int start_time,
                              const std::vector<Observation>& obs, const RunConfig& cfg) {
  BaselineResult r;
  const auto& env = *ctx.env;
  Trajectory path{start_time, {ctx.anchor}};
  for (int step = 1; step <= cfg.depth; ++step) {
    std::optional<AgentState> chosen;
    for (const auto& cand : generator.propose(ctx, path.states.back(), cfg.branching)) {
      if (classify_transition(path.states.back(), cand, start_time + step, env, obs)) {
        ++r.stats.invalid;
      } else {
        ++r.stats.valid;
        if (!chosen) chosen = cand;
      }
    }
    if (!chosen) return r;  // dead end
    path.states.push_back(*chosen);
  }
  r.stats.generator_paths.insert(path);
  r.hypotheses.insert(std::move(path));
  return r;
}

/// Guided iteration: `rounds` expansion passes over one accumulating tree,
/// each pass barred from repeating any earlier proposal. Only the final
/// accumulated set is returned.
inline BaselineResult run_giot(int rounds, Generator& generator, GeneratorContext ctx, int start_time,
                               const std::vector<Observation>& obs, const RunConfig& cfg) {
  if (rounds < 1) throw ValidationError("GIoT needs at least one round");
  BaselineResult r;
  const auto& env = *ctx.env;
  TrajectoryTree tree(ctx.anchor, start_time);
  for (int round = 0; round < rounds; ++round) {
    ctx.iteration = round;
    std::set<std::pair<AgentState, AgentState>> proposed;
    std::vector<int> frontier{0};
    for (int depth = 0; depth < cfg.depth && !frontier.empty(); ++depth) {
      std::vector<int> next;
      for (int id : frontier) {
        const AgentState from = tree.node(id).state;
        for (const auto& cand : generator.propose(ctx, from, cfg.branching)) {
          proposed.insert({from, cand});
          auto existing = tree.find_child(id, cand);
          if (classify_transition(from, cand, start_time + depth + 1, env, obs)) {
            ++r.stats.invalid;
            if (!existing) tree.add_child(id, cand, NodeTag::implausible);
          } else {
            ++r.stats.valid;
            const int child = existing ? *existing : tree.add_child(id, cand, NodeTag::proposed);
            if (std::find(next.begin(), next.end(), child) == next.end()) next.push_back(child);
          }
        }
      }
      frontier = std::move(next);
    }
    ctx.exclusions.insert(proposed.begin(), proposed.end());
  }
  for (auto& t : tree.live_paths_at_depth(cfg.depth)) {
    if (consistent_with_all(t, obs)) r.hypotheses.insert(std::move(t));
  }
  r.stats.generator_paths = r.hypotheses;
  return r;
}

/// Tree-of-thought alone: the engine with the critic and feedback disabled.
inline RunConfig tot_config(RunConfig cfg) {
  cfg.critic_samples = 0;
  cfg.feedback_enabled = false;
  return cfg;
}

// ---------------------------------------------------------------------------
// Multi-window driver
// ---------------------------------------------------------------------------

struct WindowOutput {
  int window = 0;
  int start_time = 0;
  AgentState anchor;
  Observation observation;  // the measurement that opened the window
  std::set<Trajectory> hypotheses;
  WindowMetrics metrics;
};

struct RunOutput {
  std::string scenario_id;
  Method method = Method::trace;
  RunConfig config;
  std::vector<WindowOutput> windows;
};

inline WindowMetrics metrics_from(const WindowAccumulator& acc, int window) {
  WindowMetrics m;
  m.window = window;
  m.valid_count = acc.valid;
  m.invalid_count = acc.invalid;
  const int total = acc.valid + acc.invalid;
  m.invalid_rate = total == 0 ? 0.0 : static_cast<double>(acc.invalid) / total;
  m.distinct_vlm_valid_count = static_cast<int>(acc.generator_paths.size());
  return m;
}

/// Runs `method` over every measurement window of a realised scenario. The
/// first observation opens window 1 at the scenario anchor; each later one
/// prunes, re-anchors and opens the next window.
inline RunOutput run_method(const Scenario& sc, Method method, Generator& generator, const RunConfig& cfg,
                            const Realization& real) {
  cfg.validate();
  const auto& env = *sc.env;
  const auto& obs = real.observations;
  if (obs.empty()) throw ValidationError("no observations to run against");
  RunOutput out{sc.id, method, cfg, {}};

  if (method == Method::trace || method == Method::tot) {
    const RunConfig run_cfg = method == Method::tot ? tot_config(cfg) : cfg;
    EngineState st = make_engine_state(sc.env, sc.target_anchor, obs.front(), run_cfg);
    for (std::size_t w = 0; w < obs.size(); ++w) {
      run_cfg.validate_anchor_time(st.anchor_time);
      auto [next, metrics] = run_window(std::move(st), generator, env, run_cfg);
      st = std::move(next);
      out.windows.push_back({st.window, st.anchor_time, st.ctx.anchor, st.ctx.last_obs, st.hypotheses, metrics});
      if (w + 1 < obs.size()) st = on_new_observation(std::move(st), obs[w + 1], env, run_cfg);
    }
    return out;
  }

  AgentState anchor = sc.target_anchor;
  if (!state_admissible(anchor, env)) throw ValidationError("anchor is not an admissible state on this map");
  for (std::size_t w = 0; w < obs.size(); ++w) {
    cfg.validate_anchor_time(obs[w].time);
    const std::vector<Observation> window_obs{obs[w]};
    auto ctx = baseline_context(sc.env, anchor, obs[w]);
    BaselineResult r = method == Method::cot ? run_cot(generator, ctx, obs[w].time, window_obs, cfg)
                                             : run_giot(cfg.giot_rounds, generator, ctx, obs[w].time, window_obs, cfg);
    for (const auto& t : r.hypotheses) {
      if (!trajectory_feasible(t, env) || !consistent_with_all(t, window_obs)) {
        throw std::logic_error("baseline produced an unsound hypothesis");
      }
    }
    out.windows.push_back({static_cast<int>(w + 1), obs[w].time, anchor, obs[w], r.hypotheses,
                           metrics_from(r.stats, static_cast<int>(w + 1))});
    if (w + 1 < obs.size()) {
      const auto& next_obs = obs[w + 1];
      std::vector<AgentState> survivors;
      for (const auto& t : r.hypotheses) {
        if (t.covers(next_obs.time) && consistent_with(t, next_obs)) survivors.push_back(t.at_time(next_obs.time));
      }
      anchor = reanchor(survivors, next_obs, env, anchor);
    }
  }
  return out;
}

}  // namespace trace

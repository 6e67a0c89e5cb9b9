#pragma once

#include <memory>
#include <string>

#include "trace/trace.hpp"

namespace trace::testing {

inline std::shared_ptr<const EnvMap> map_of(const std::string& text) {
  return std::make_shared<const EnvMap>(parse_map(text));
}

inline AgentState st(int x, int y, Heading h, int v) { return {x, y, h, v}; }

inline Trajectory traj(int start, std::vector<AgentState> states) { return {start, std::move(states)}; }

/// Every state on the map, in bounds, any heading, speed 0..2.
inline std::vector<AgentState> all_states(const EnvMap& env) {
  std::vector<AgentState> out;
  for (int y = 0; y < env.height(); ++y) {
    for (int x = 0; x < env.width(); ++x) {
      for (int h = 0; h < kHeadingCount; ++h) {
        for (int v = 0; v <= kMaxSpeedLevel; ++v) out.push_back({x, y, heading_from_index(h), v});
      }
    }
  }
  return out;
}

/// Reference ground truth written without `successors`: at every step it tries
/// every state of the map and keeps those the feasibility function accepts.
inline void naive_extend(Trajectory& path, int depth, const EnvMap& env, const std::vector<Observation>& obs,
                         std::set<Trajectory>& out) {
  if (static_cast<int>(path.size()) == depth + 1) {
    out.insert(path);
    return;
  }
  for (const auto& next : all_states(env)) {
    if (feasibility(path.states.back(), next, env) != 1) continue;
    path.states.push_back(next);
    if (consistent_with_all(path, obs)) naive_extend(path, depth, env, obs, out);
    path.states.pop_back();
  }
}

inline std::set<Trajectory> naive_gamma_star(const AgentState& anchor, const EnvMap& env,
                                             const std::vector<Observation>& obs, int depth, int start_time) {
  std::set<Trajectory> out;
  Trajectory path{start_time, {anchor}};
  if (!consistent_with_all(path, obs)) return out;
  naive_extend(path, depth, env, obs, out);
  return out;
}

struct Ranked {
  Trajectory t;
  double total;
  std::size_t diverge;
};

/// Exhaustive reference: every offset sequence with all four components in
/// {-1, 0, 1}, applied field-wise, scored and ordered independently.
inline std::vector<Trajectory> brute_force_critic(const Trajectory& base, const EnvMap& env, const Observation& obs,
                                           double alpha, double beta, std::size_t keep) {
  const std::size_t steps = base.size() - 1;
  std::size_t space = 1;
  for (std::size_t i = 0; i < steps; ++i) space *= 81;
  std::set<Trajectory> seen;
  std::vector<Ranked> found;
  OffsetSequence seq;
  seq.deltas.resize(steps);
  for (std::size_t code = 0; code < space; ++code) {
    std::size_t c = code;
    for (auto& d : seq.deltas) {
      d.dx = static_cast<int>(c % 3) - 1;
      d.dy = static_cast<int>(c / 3 % 3) - 1;
      d.dheading = static_cast<int>(c / 9 % 3) - 1;
      d.dspeed = static_cast<int>(c / 27 % 3) - 1;
      c /= 81;
    }
    const auto cf = apply_offsets(base, seq);
    if (cf == base || seen.count(cf)) continue;
    bool ok = consistent_with(cf, obs);
    for (std::size_t i = 1; ok && i < cf.size(); ++i) ok = feasibility(cf.states[i - 1], cf.states[i], env) == 1;
    if (!ok) continue;
    seen.insert(cf);
    double dist = 0;
    std::size_t diverge = cf.size();
    for (std::size_t i = 0; i < cf.size(); ++i) {
      dist += chebyshev(cf.states[i].cell(), base.states[i].cell());
      if (diverge == cf.size() && cf.states[i] != base.states[i]) diverge = i;
    }
    found.push_back({cf, beta / (1.0 + dist / static_cast<double>(cf.size())), diverge});
  }
  (void)alpha;  // survivors have zero feasibility loss
  std::sort(found.begin(), found.end(), [](const Ranked& a, const Ranked& b) {
    if (a.total != b.total) return a.total < b.total;
    if (a.diverge != b.diverge) return a.diverge < b.diverge;
    return a.t.states < b.t.states;
  });
  std::vector<Trajectory> out;
  for (std::size_t i = 0; i < found.size() && i < keep; ++i) out.push_back(found[i].t);
  return out;
}

/// Generator that replays fixed candidate lists keyed by the asking state.
class ReplayGenerator final : public Generator {
public:
  std::map<AgentState, std::vector<AgentState>> script;
  int calls = 0;

  std::vector<AgentState> propose(const GeneratorContext&, const AgentState& state, int k) override {
    ++calls;
    auto it = script.find(state);
    if (it == script.end()) return {};
    std::vector<AgentState> out = it->second;
    if (static_cast<int>(out.size()) > k) out.resize(static_cast<std::size_t>(k));
    return out;
  }
};

}  // namespace trace::testing

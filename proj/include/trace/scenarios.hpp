#pragma once

// Scenario files (map + parameter block), the five bundled tasks, and the
// seeded realisation of a hidden target path with noisy sparse observations.

#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "trace/world_model.hpp"

namespace trace {

struct ObserverPose {
  int x = 0;
  int y = 0;
  Heading heading = Heading::E;
  bool operator==(const ObserverPose&) const = default;
};

struct ScheduledObservation {
  int time = 0;
  int noise_radius = 0;
  bool operator==(const ScheduledObservation&) const = default;
};

struct Scenario {
  std::string id;
  std::string description;
  std::shared_ptr<const EnvMap> env;
  AgentState target_anchor;
  ObserverPose observer;  // annotation only
  std::vector<ScheduledObservation> obs_schedule;
  std::map<std::string, std::string> overrides;  // RunConfig keys

  int anchor_time() const { return obs_schedule.empty() ? 0 : obs_schedule.front().time; }
};

/// Checks anchor admissibility, successor existence and schedule ordering.
inline void validate_scenario(const Scenario& sc) {
  const auto& env = *sc.env;
  const auto& a = sc.target_anchor;
  if (!env.in_bounds(a.cell())) throw ValidationError("anchor lies outside the map");
  if (!env.passable(a.cell())) throw ValidationError("anchor lies inside an obstacle or restricted zone");
  if (!state_admissible(a, env)) throw ValidationError("anchor violates lane or yield rules");
  if (successors(a, env).empty()) throw ValidationError("anchor has no feasible successor");
  if (sc.obs_schedule.empty()) throw ValidationError("observation schedule is empty");
  for (std::size_t i = 1; i < sc.obs_schedule.size(); ++i) {
    if (sc.obs_schedule[i].time <= sc.obs_schedule[i - 1].time) {
      throw ValidationError("observation times must be strictly increasing (time " +
                            std::to_string(sc.obs_schedule[i].time) + " repeats or goes back)");
    }
  }
  for (const auto& o : sc.obs_schedule) {
    if (o.noise_radius < 0) throw ValidationError("noise radius must be nonnegative");
  }
}

inline Scenario parse_scenario(std::string_view text) {
  const auto lines = detail::lines_of(text);
  auto [env, i] = parse_map_grid(lines, 0);
  Scenario sc;
  bool in_scenario_block = false;
  bool have_anchor = false;
  for (; i < lines.size(); ++i) {
    const int line_no = static_cast<int>(i + 1);
    const auto line = detail::trim(lines[i]);
    if (detail::is_comment_or_blank(line)) continue;
    if (line == "[scenario]") {
      in_scenario_block = true;
      continue;
    }
    auto kv = split_key_value(line);
    if (!kv) throw ParseError("expected 'key = value' or '[scenario]'", line_no, 1);
    const auto [key, value] = *kv;
    const auto fields = detail::split_ws(value);
    const auto value_col = static_cast<int>(line.find('=') + 2);
    auto need_int = [&](std::string_view s) {
      auto v = detail::parse_number<int>(s);
      if (!v) throw ParseError("expected an integer, got '" + std::string(s) + "'", line_no, value_col);
      return *v;
    };
    auto need_heading = [&](std::string_view s) {
      auto h = parse_heading(s);
      if (!h) throw ParseError("unknown heading '" + std::string(s) + "'", line_no, value_col);
      return *h;
    };
    if (!in_scenario_block) {
      if (!apply_rule_override(env.rules, key, need_int(value))) {
        throw ParseError("unknown rule parameter '" + std::string(key) + "'", line_no, 1);
      }
      continue;
    }
    if (key == "id") {
      sc.id = std::string(value);
    } else if (key == "description") {
      sc.description = std::string(value);
    } else if (key == "anchor") {
      if (fields.size() != 4) throw ParseError("anchor = X Y HEADING SPEED", line_no, value_col);
      sc.target_anchor = {need_int(fields[0]), need_int(fields[1]), need_heading(fields[2]), need_int(fields[3])};
      have_anchor = true;
    } else if (key == "observer") {
      if (fields.size() != 3) throw ParseError("observer = X Y HEADING", line_no, value_col);
      sc.observer = {need_int(fields[0]), need_int(fields[1]), need_heading(fields[2])};
    } else if (key == "obs") {
      if (fields.size() != 2) throw ParseError("obs = TIME NOISE_RADIUS", line_no, value_col);
      sc.obs_schedule.push_back({need_int(fields[0]), need_int(fields[1])});
    } else {
      sc.overrides[std::string(key)] = std::string(value);
    }
  }
  if (sc.id.empty()) throw ParseError("scenario block lacks 'id'");
  if (!have_anchor) throw ParseError("scenario block lacks 'anchor'");
  sc.env = std::make_shared<const EnvMap>(std::move(env));
  validate_scenario(sc);
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

/// Applies scenario-level RunConfig overrides.
[[nodiscard]] inline RunConfig apply_overrides(RunConfig cfg, const std::map<std::string, std::string>& overrides) {
  for (const auto& [key, value] : overrides) {
    auto as_int = [&] {
      auto v = detail::parse_number<int>(value);
      if (!v) throw ValidationError("override '" + key + "' expects an integer");
      return *v;
    };
    if (key == "depth") cfg.depth = as_int();
    else if (key == "branching") cfg.branching = as_int();
    else if (key == "iterations") cfg.iterations_per_window = as_int();
    else if (key == "critic_samples") cfg.critic_samples = as_int();
    else if (key == "critic_keep") cfg.critic_keep = as_int();
    else if (key == "horizon") cfg.horizon = as_int();
    else if (key == "giot_rounds") cfg.giot_rounds = as_int();
    else throw ValidationError("unknown scenario override '" + key + "'");
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Realisation: hidden target path and noisy measurements
// ---------------------------------------------------------------------------

struct Realization {
  Trajectory truth;
  std::vector<Observation> observations;
};

/// Seeded random walk over feasible successors (cruising speed preferred,
/// course kept when possible, dead ends avoided) followed by measurement draws: the true cell displaced
/// uniformly within the noise radius, redrawn until it lands on a passable cell.
namespace detail {
inline bool can_continue(const AgentState& s, const EnvMap& env, int steps) {
  if (steps == 0) return true;
  for (const auto& n : successors(s, env)) {
    if (can_continue(n, env, steps - 1)) return true;
  }
  return false;
}
}  // namespace detail

inline Realization realize(const Scenario& sc, std::uint64_t seed) {
  const auto& env = *sc.env;
  std::mt19937_64 rng(hash_combine(seed, fnv1a64(sc.id)));
  Realization r;
  r.truth.start_time = sc.anchor_time();
  r.truth.states.push_back(sc.target_anchor);
  const int last = sc.obs_schedule.back().time;
  std::bernoulli_distribution keep_course(0.7);
  for (int t = r.truth.start_time; t < last; ++t) {
    const AgentState& cur = r.truth.states.back();
    const auto succ = successors(cur, env);
    std::vector<AgentState> preferred, alive;
    std::optional<AgentState> steady;
    for (const auto& s : succ) {
      if (!detail::can_continue(s, env, 3)) continue;
      alive.push_back(s);
      if (s.speed == 1) preferred.push_back(s);
      if (s.speed == 1 && s.heading == cur.heading) steady = s;
    }
    if (steady && keep_course(rng)) {
      r.truth.states.push_back(*steady);
      continue;
    }
    const auto& pool = !preferred.empty() ? preferred : !alive.empty() ? alive : succ;
    if (pool.empty()) throw ValidationError("scenario " + sc.id + ": target path reached a dead end");
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    r.truth.states.push_back(pool[pick(rng)]);
  }
  for (const auto& so : sc.obs_schedule) {
    const Cell truth = r.truth.at_time(so.time).cell();
    Cell measured = truth;
    if (so.time != sc.anchor_time() && so.noise_radius > 0) {
      std::uniform_int_distribution<int> off(-so.noise_radius, so.noise_radius);
      for (int attempt = 0; attempt < 64; ++attempt) {
        Cell c{truth.x + off(rng), truth.y + off(rng)};
        if (env.passable(c)) {
          measured = c;
          break;
        }
      }
    }
    r.observations.push_back({so.time, measured.x, measured.y, so.noise_radius});
  }
  return r;
}

// ---------------------------------------------------------------------------
// Bundled tasks
// ---------------------------------------------------------------------------

namespace bundled_text {

// Head-on encounter in an open channel: traffic lanes along both banks,
// a yield zone in the encounter area and a restricted fountain.
inline constexpr std::string_view t1 = R"(32 14
################################
################################
#<<<<<<<<<<<<<<<<<<<<<<<<<<<<<<#
#<<<<<<<<<<<<<<<<<<<<<<<<<<<<<<#
#..............................#
#.............YYYY.............#
#.............YYYY.............#
#........xx...YYYY.............#
#........xx...YYYY.............#
#..............................#
#>>>>>>>>>>>>>>>>>>>>>>>>>>>>>>#
#>>>>>>>>>>>>>>>>>>>>>>>>>>>>>>#
################################
################################
[scenario]
id = T1
description = Head-on encounter: reciprocal courses, starboard-pass convention via a yield zone
anchor = 27 6 W 1
observer = 3 6 E
obs = 0 1
obs = 3 1
obs = 6 1
obs = 9 1
obs = 12 1
)";

// Narrow channel, three cells wide, with a branch bending north.
inline constexpr std::string_view t2 = R"(32 16
################....############
################....############
################....############
################....############
################....############
################....############
################....############
################....############
################....############
################....############
................................
................................
................................
################################
################################
################################
[scenario]
id = T2
description = Overtaking in a narrow channel: target ahead of a following observer
anchor = 3 11 E 1
observer = 0 11 E
obs = 0 1
obs = 3 1
obs = 6 1
obs = 9 1
obs = 12 1
)";

// Perpendicular channels crossing; the target's approach carries yield cells.
inline constexpr std::string_view t3 = R"(26 28
###########....###########
###########....###########
###########....###########
###########....###########
###########....###########
###########....###########
###########....###########
###########....###########
..........................
..........................
..........................
..........................
###########YYYY###########
###########YYYY###########
###########....###########
###########....###########
###########....###########
###########....###########
###########....###########
###########....###########
###########....###########
###########....###########
###########....###########
###########....###########
###########....###########
###########....###########
###########....###########
###########....###########
[scenario]
id = T3
description = Crossing situation: target approaches a channel crossing from the south
anchor = 12 26 N 1
observer = 1 9 E
obs = 0 1
obs = 3 1
obs = 6 1
obs = 9 1
obs = 12 1
)";

// Two-lane road with opposing lane directions and shoulders.
inline constexpr std::string_view t4 = R"(32 10
################################
################################
################################
................................
<<<<<<<<<<<<<<<<<<<<<<<<<<<<<<<<
>>>>>>>>>>>>>>>>>>>>>>>>>>>>>>>>
................................
################################
################################
################################
[scenario]
id = T4
description = Overtaking on a two-lane road: observer follows the target
anchor = 4 5 E 1
observer = 1 5 E
obs = 0 1
obs = 3 1
obs = 6 1
obs = 9 1
obs = 12 1
)";

// Northbound road with a free right turn onto an eastbound branch.
inline constexpr std::string_view t5 = R"(28 30
######^^^###################
######^^^###################
######^^^###################
######^^^###################
######^^^###################
######^^^###################
######^^^###################
######^^^###################
######^^^###################
######^^^###################
######^^^###################
######^^^###################
######^^^###################
######^^^###################
######...>>>>>>>>>>>>>>>>>>>
######...>>>>>>>>>>>>>>>>>>>
######...>>>>>>>>>>>>>>>>>>>
######^^^###################
######^^^###################
######^^^###################
######^^^###################
######^^^###################
######^^^###################
######^^^###################
######^^^###################
######^^^###################
######^^^###################
######^^^###################
######^^^###################
######^^^###################
[scenario]
id = T5
description = Right-turn decision point: slight rightward orientation before the junction
anchor = 7 18 NE 1
observer = 7 29 N
obs = 0 1
obs = 3 1
obs = 6 1
obs = 9 1
obs = 12 1
)";

}  // namespace bundled_text

inline const std::vector<std::pair<std::string_view, std::string_view>>& bundled_sources() {
  static const std::vector<std::pair<std::string_view, std::string_view>> sources{
    {"t1", bundled_text::t1}, {"t2", bundled_text::t2}, {"t3", bundled_text::t3},
    {"t4", bundled_text::t4}, {"t5", bundled_text::t5}};
  return sources;
}

inline std::vector<Scenario> bundled() {
  std::vector<Scenario> out;
  for (const auto& [name, text] : bundled_sources()) out.push_back(parse_scenario(text));
  return out;
}

/// Bundled id (t1..t5, case-insensitive) or a path to a scenario file.
inline Scenario resolve_scenario(const std::string& name_or_path) {
  std::string lower;
  for (char c : name_or_path) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  for (const auto& [name, text] : bundled_sources()) {
    if (lower == name) return parse_scenario(text);
  }
  return load_scenario(name_or_path);
}

}  // namespace trace

#pragma once

// Canonical structured-text (JSON) encoding of the domain types. Field names
// follow the type definitions; headings are written as compass names.

#include <nlohmann/json.hpp>

#include "trace/critic.hpp"
#include "trace/engine.hpp"

namespace trace {

using json = nlohmann::json;

inline void to_json(json& j, Heading h) { j = std::string(to_string(h)); }
inline void from_json(const json& j, Heading& h) {
  auto parsed = parse_heading(j.get<std::string>());
  if (!parsed) throw ParseError("unknown heading '" + j.get<std::string>() + "'");
  h = *parsed;
}

inline void to_json(json& j, const AgentState& s) {
  j = json{{"x", s.x}, {"y", s.y}, {"heading", s.heading}, {"speed", s.speed}};
}
inline void from_json(const json& j, AgentState& s) {
  j.at("x").get_to(s.x);
  j.at("y").get_to(s.y);
  j.at("heading").get_to(s.heading);
  j.at("speed").get_to(s.speed);
}

inline void to_json(json& j, const Trajectory& t) { j = json{{"start_time", t.start_time}, {"states", t.states}}; }
inline void from_json(const json& j, Trajectory& t) {
  j.at("start_time").get_to(t.start_time);
  j.at("states").get_to(t.states);
}

inline void to_json(json& j, const Observation& o) {
  j = json{{"time", o.time}, {"measured_x", o.measured_x}, {"measured_y", o.measured_y}, {"noise_radius", o.noise_radius}};
}
inline void from_json(const json& j, Observation& o) {
  j.at("time").get_to(o.time);
  j.at("measured_x").get_to(o.measured_x);
  j.at("measured_y").get_to(o.measured_y);
  j.at("noise_radius").get_to(o.noise_radius);
}

inline void to_json(json& j, const StateOffset& d) {
  j = json{{"dx", d.dx}, {"dy", d.dy}, {"dheading", d.dheading}, {"dspeed", d.dspeed}};
}
inline void from_json(const json& j, StateOffset& d) {
  j.at("dx").get_to(d.dx);
  j.at("dy").get_to(d.dy);
  j.at("dheading").get_to(d.dheading);
  j.at("dspeed").get_to(d.dspeed);
}

inline void to_json(json& j, const OffsetSequence& s) { j = json{{"deltas", s.deltas}}; }
inline void from_json(const json& j, OffsetSequence& s) { j.at("deltas").get_to(s.deltas); }

inline void to_json(json& j, const OffsetMotif& m) {
  j = json{{"deltas", m.deltas}, {"source", m.source == MotifSource::critic ? "critic" : "generator"}};
}
inline void from_json(const json& j, OffsetMotif& m) {
  j.at("deltas").get_to(m.deltas);
  const auto src = j.at("source").get<std::string>();
  if (src == "critic") m.source = MotifSource::critic;
  else if (src == "generator") m.source = MotifSource::generator;
  else throw ParseError("unknown motif source '" + src + "'");
}

inline void to_json(json& j, const RejectionNote& n) {
  j = json{{"violation_kind", std::string(to_string(n.violation_kind))}, {"step_index", n.step_index}};
}
inline void from_json(const json& j, RejectionNote& n) {
  const auto kind = j.at("violation_kind").get<std::string>();
  auto k = parse_violation_kind(kind);
  if (!k) throw ParseError("unknown violation kind '" + kind + "'");
  n.violation_kind = *k;
  j.at("step_index").get_to(n.step_index);
}

inline void to_json(json& j, const WindowMetrics& m) {
  j = json{{"window", m.window},
           {"valid_count", m.valid_count},
           {"invalid_count", m.invalid_count},
           {"invalid_rate", m.invalid_rate},
           {"distinct_vlm_valid_count", m.distinct_vlm_valid_count}};
}
inline void from_json(const json& j, WindowMetrics& m) {
  j.at("window").get_to(m.window);
  j.at("valid_count").get_to(m.valid_count);
  j.at("invalid_count").get_to(m.invalid_count);
  j.at("invalid_rate").get_to(m.invalid_rate);
  j.at("distinct_vlm_valid_count").get_to(m.distinct_vlm_valid_count);
}

inline void to_json(json& j, const RunConfig& c) {
  j = json{{"depth", c.depth},
           {"branching", c.branching},
           {"horizon", c.horizon},
           {"alpha", c.alpha},
           {"beta", c.beta},
           {"critic_samples", c.critic_samples},
           {"critic_keep", c.critic_keep},
           {"seed", c.seed},
           {"feedback_enabled", c.feedback_enabled},
           {"iterations_per_window", c.iterations_per_window},
           {"giot_rounds", c.giot_rounds},
           {"node_budget", c.node_budget},
           {"near_miss_rate", c.near_miss_rate},
           {"generator_timeout_ms", c.generator_timeout_ms}};
}
inline void from_json(const json& j, RunConfig& c) {
  j.at("depth").get_to(c.depth);
  j.at("branching").get_to(c.branching);
  j.at("horizon").get_to(c.horizon);
  j.at("alpha").get_to(c.alpha);
  j.at("beta").get_to(c.beta);
  j.at("critic_samples").get_to(c.critic_samples);
  j.at("critic_keep").get_to(c.critic_keep);
  j.at("seed").get_to(c.seed);
  j.at("feedback_enabled").get_to(c.feedback_enabled);
  j.at("iterations_per_window").get_to(c.iterations_per_window);
  j.at("giot_rounds").get_to(c.giot_rounds);
  j.at("node_budget").get_to(c.node_budget);
  j.at("near_miss_rate").get_to(c.near_miss_rate);
  j.at("generator_timeout_ms").get_to(c.generator_timeout_ms);
}

/// Digest of every config field except the seed, so reports from one sweep
/// share it.
inline std::string config_digest(const RunConfig& c) {
  json j = c;
  j.erase("seed");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

/// Order-independent digest of a trajectory set (sets are ordered already).
inline std::string set_digest(const std::set<Trajectory>& s) {
  std::uint64_t h = fnv1a64("trajectory-set");
  for (const auto& t : s) h = hash_combine(h, fnv1a64(json(t).dump()));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace trace

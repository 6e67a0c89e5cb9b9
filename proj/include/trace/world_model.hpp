#pragma once

// Environment grid, rule set and the binary feasibility function built from a
// kinematic check and a domain compliance check.

#include <charconv>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "trace/core.hpp"

namespace trace {

enum class ZoneKind : std::uint8_t { free, obstacle, restricted, lane };

struct CellZone {
  ZoneKind kind = ZoneKind::free;
  std::optional<Heading> lane_direction;  // present iff kind == lane

  bool navigable() const { return kind == ZoneKind::free || kind == ZoneKind::lane; }
  bool operator==(const CellZone&) const = default;
};

struct RuleSet {
  int max_speed = kMaxSpeedLevel;
  int max_speed_delta = 1;
  int max_heading_delta = 1;  // only enforced while moving
  int yield_speed_cap = 1;
  int lane_tolerance = 1;
  std::set<Cell> yield_cells;

  bool operator==(const RuleSet&) const = default;
};

class EnvMap {
public:
  EnvMap() : EnvMap(1, 1) {}
  EnvMap(int width, int height) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw ValidationError("map dimensions must be positive");
    cells_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool in_bounds(Cell c) const { return in_bounds(c.x, c.y); }

  const CellZone& zone(int x, int y) const { return cells_.at(index(x, y)); }
  const CellZone& zone(Cell c) const { return zone(c.x, c.y); }

  void set_zone(int x, int y, CellZone z) {
    if (z.kind == ZoneKind::lane && !z.lane_direction) throw ValidationError("lane cell without direction");
    if (z.kind != ZoneKind::lane && z.lane_direction) throw ValidationError("direction on a non-lane cell");
    cells_.at(index(x, y)) = z;
  }

  bool is_yield(Cell c) const { return rules.yield_cells.count(c) != 0; }

  /// In bounds and neither obstacle nor restricted.
  bool passable(Cell c) const { return in_bounds(c) && zone(c).navigable(); }

  RuleSet rules;

  bool operator==(const EnvMap&) const = default;

private:
  std::size_t index(int x, int y) const {
    if (!in_bounds(x, y)) throw std::out_of_range("cell outside map");
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_;
  int height_;
  std::vector<CellZone> cells_;
};

// ---------------------------------------------------------------------------
// Map text format
// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

inline std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    out.push_back(text.substr(start, end - start));
    if (end == text.size()) break;
    start = end + 1;
  }
  return out;
}

inline bool is_comment_or_blank(std::string_view line) {
  auto t = trim(line);
  return t.empty() || (t.front() == '#' && t.size() > 1 && t[1] == ' ');
}

}  // namespace detail

inline char zone_symbol(const EnvMap& env, int x, int y) {
  if (env.is_yield({x, y})) return 'Y';
  const auto& z = env.zone(x, y);
  switch (z.kind) {
    case ZoneKind::free: return '.';
    case ZoneKind::obstacle: return '#';
    case ZoneKind::restricted: return 'x';
    case ZoneKind::lane:
      switch (*z.lane_direction) {
        case Heading::E: return '>';
        case Heading::W: return '<';
        case Heading::N: return '^';
        case Heading::S: return 'v';
        default: return '?';
      }
  }
  return '?';
}

/// Applies a `key = value` rule override. Returns false for unknown keys.
inline bool apply_rule_override(RuleSet& rules, std::string_view key, int value) {
  if (value < 0) throw ValidationError("rule parameter " + std::string(key) + " must be nonnegative");
  if (key == "max_speed") {
    if (value > kMaxSpeedLevel) throw ValidationError("max_speed cannot exceed 2");
    rules.max_speed = value;
  } else if (key == "max_speed_delta") {
    rules.max_speed_delta = value;
  } else if (key == "max_heading_delta") {
    rules.max_heading_delta = value;
  } else if (key == "yield_speed_cap") {
    rules.yield_speed_cap = value;
  } else if (key == "lane_tolerance") {
    rules.lane_tolerance = value;
  } else {
    return false;
  }
  return true;
}

struct MapParseResult {
  EnvMap env;
  std::size_t next_line = 0;  // index of the first line after the grid
};

/// Parses the header and grid rows starting at `lines[first]`; comment lines
/// (`# ` followed by text) and blank lines before the header are skipped.
inline MapParseResult parse_map_grid(const std::vector<std::string_view>& lines, std::size_t first) {
  std::size_t i = first;
  while (i < lines.size() && detail::is_comment_or_blank(lines[i])) ++i;
  if (i >= lines.size()) throw ParseError("missing map header 'W H'", static_cast<int>(i + 1), 1);
  auto header = detail::split_ws(detail::trim(lines[i]));
  if (header.size() != 2) throw ParseError("map header must be 'W H'", static_cast<int>(i + 1), 1);
  auto w = detail::parse_number<int>(header[0]);
  auto h = detail::parse_number<int>(header[1]);
  if (!w || !h || *w < 1 || *h < 1) throw ParseError("map dimensions must be positive integers", static_cast<int>(i + 1), 1);

  EnvMap env(*w, *h);
  ++i;
  for (int row = 0; row < *h; ++row, ++i) {
    if (i >= lines.size()) throw ParseError("expected " + std::to_string(*h) + " grid rows", static_cast<int>(i + 1), 1);
    auto line = lines[i];
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (static_cast<int>(line.size()) != *w) {
      throw ParseError("grid row has " + std::to_string(line.size()) + " cells, expected " + std::to_string(*w),
                       static_cast<int>(i + 1), static_cast<int>(std::min<std::size_t>(line.size(), static_cast<std::size_t>(*w)) + 1));
    }
    for (int col = 0; col < *w; ++col) {
      CellZone z;
      switch (line[static_cast<std::size_t>(col)]) {
        case '.': break;
        case '#': z.kind = ZoneKind::obstacle; break;
        case 'x': z.kind = ZoneKind::restricted; break;
        case '>': z = {ZoneKind::lane, Heading::E}; break;
        case '<': z = {ZoneKind::lane, Heading::W}; break;
        case '^': z = {ZoneKind::lane, Heading::N}; break;
        case 'v': z = {ZoneKind::lane, Heading::S}; break;
        case 'Y': env.rules.yield_cells.insert({col, row}); break;
        default:
          throw ParseError(std::string("unknown cell symbol '") + line[static_cast<std::size_t>(col)] + "'",
                           static_cast<int>(i + 1), col + 1);
      }
      env.set_zone(col, row, z);
    }
  }
  return {std::move(env), i};
}

/// Parses a `key = value` line. Returns nullopt for lines without '='.
inline std::optional<std::pair<std::string_view, std::string_view>> split_key_value(std::string_view line) {
  auto eq = line.find('=');
  if (eq == std::string_view::npos) return std::nullopt;
  return std::pair{detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1))};
}

/// Map file: `W H` header, H rows of W symbols, then optional rule overrides.
inline EnvMap parse_map(std::string_view text) {
  const auto lines = detail::lines_of(text);
  auto [env, i] = parse_map_grid(lines, 0);
  for (; i < lines.size(); ++i) {
    if (detail::is_comment_or_blank(lines[i])) continue;
    auto kv = split_key_value(lines[i]);
    if (!kv) throw ParseError("expected 'key = value'", static_cast<int>(i + 1), 1);
    auto value = detail::parse_number<int>(kv->second);
    if (!value) throw ParseError("rule value must be an integer", static_cast<int>(i + 1), 1);
    if (!apply_rule_override(env.rules, kv->first, *value)) {
      throw ParseError("unknown rule parameter '" + std::string(kv->first) + "'", static_cast<int>(i + 1), 1);
    }
  }
  return env;
}

inline std::string render_map(const EnvMap& env) {
  std::ostringstream out;
  out << env.width() << ' ' << env.height() << '\n';
  for (int y = 0; y < env.height(); ++y) {
    for (int x = 0; x < env.width(); ++x) out << zone_symbol(env, x, y);
    out << '\n';
  }
  const RuleSet defaults;
  const auto& r = env.rules;
  if (r.max_speed != defaults.max_speed) out << "max_speed = " << r.max_speed << '\n';
  if (r.max_speed_delta != defaults.max_speed_delta) out << "max_speed_delta = " << r.max_speed_delta << '\n';
  if (r.max_heading_delta != defaults.max_heading_delta) out << "max_heading_delta = " << r.max_heading_delta << '\n';
  if (r.yield_speed_cap != defaults.yield_speed_cap) out << "yield_speed_cap = " << r.yield_speed_cap << '\n';
  if (r.lane_tolerance != defaults.lane_tolerance) out << "lane_tolerance = " << r.lane_tolerance << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Feasibility
// ---------------------------------------------------------------------------

enum class ViolationKind : std::uint8_t { kinematic, collision, lane, yield, observation };

inline std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::kinematic: return "kinematic";
    case ViolationKind::collision: return "collision";
    case ViolationKind::lane: return "lane";
    case ViolationKind::yield: return "yield";
    case ViolationKind::observation: return "observation";
  }
  return "?";
}

inline std::optional<ViolationKind> parse_violation_kind(std::string_view s) {
  for (auto k : {ViolationKind::kinematic, ViolationKind::collision, ViolationKind::lane, ViolationKind::yield,
                 ViolationKind::observation}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

inline bool check_kinematic(const AgentState& prev, const AgentState& next, const RuleSet& rules) {
  if (next.speed < 0 || next.speed > rules.max_speed) return false;
  if (std::abs(next.speed - prev.speed) > rules.max_speed_delta) return false;
  if (prev.speed > 0 && std::abs(heading_delta(prev.heading, next.heading)) > rules.max_heading_delta) return false;
  const auto [ux, uy] = unit_step(next.heading);
  return next.x == prev.x + next.speed * ux && next.y == prev.y + next.speed * uy;
}

/// Cells visited moving from `from` to `to`, excluding `from` (Bresenham).
inline std::vector<Cell> line_cells(Cell from, Cell to) {
  std::vector<Cell> out;
  int x = from.x, y = from.y;
  const int dx = std::abs(to.x - from.x), dy = -std::abs(to.y - from.y);
  const int sx = from.x < to.x ? 1 : -1, sy = from.y < to.y ? 1 : -1;
  int err = dx + dy;
  while (x != to.x || y != to.y) {
    const int e2 = 2 * err;
    if (e2 >= dy) { err += dy; x += sx; }
    if (e2 <= dx) { err += dx; y += sy; }
    out.push_back({x, y});
  }
  if (out.empty()) out.push_back(to);  // stationary: the occupied cell itself
  return out;
}

inline bool lane_ok(const AgentState& s, const EnvMap& env) {
  const auto& z = env.zone(s.cell());
  return z.kind != ZoneKind::lane || std::abs(heading_delta(*z.lane_direction, s.heading)) <= env.rules.lane_tolerance;
}

inline bool yield_ok(const AgentState& s, const EnvMap& env) {
  return !env.is_yield(s.cell()) || s.speed <= env.rules.yield_speed_cap;
}

/// First failing compliance rule, in the order collision, lane, yield.
inline std::optional<ViolationKind> compliance_violation(const AgentState& prev, const AgentState& next,
                                                         const EnvMap& env) {
  for (Cell c : line_cells(prev.cell(), next.cell())) {
    if (!env.passable(c)) return ViolationKind::collision;
  }
  if (!lane_ok(next, env)) return ViolationKind::lane;
  if (!yield_ok(next, env)) return ViolationKind::yield;
  return std::nullopt;
}

inline bool check_compliance(const AgentState& prev, const AgentState& next, const EnvMap& env) {
  return !compliance_violation(prev, next, env).has_value();
}

/// First failing check of the full transition, kinematics first.
inline std::optional<ViolationKind> first_violation(const AgentState& prev, const AgentState& next, const EnvMap& env) {
  if (!env.in_bounds(prev.cell()) || !env.in_bounds(next.cell())) {
    return check_kinematic(prev, next, env.rules) ? ViolationKind::collision : ViolationKind::kinematic;
  }
  if (!check_kinematic(prev, next, env.rules)) return ViolationKind::kinematic;
  return compliance_violation(prev, next, env);
}

/// The binary feasibility function: 1 iff kinematically valid and compliant.
inline int feasibility(const AgentState& prev, const AgentState& next, const EnvMap& env) {
  if (!env.in_bounds(prev.cell()) || !env.in_bounds(next.cell())) return 0;
  return check_kinematic(prev, next, env.rules) && check_compliance(prev, next, env) ? 1 : 0;
}

inline bool trajectory_feasible(const Trajectory& t, const EnvMap& env) {
  for (std::size_t i = 1; i < t.states.size(); ++i) {
    if (feasibility(t.states[i - 1], t.states[i], env) == 0) return false;
  }
  return !t.empty() && env.in_bounds(t.states.front().cell());
}

/// The state reached by moving `speed` cells along `heading` from `from`.
inline AgentState advance(const AgentState& from, Heading heading, int speed) {
  const auto [ux, uy] = unit_step(heading);
  return {from.x + speed * ux, from.y + speed * uy, heading, speed};
}

/// All feasible next states, in (heading, speed) order.
inline std::vector<AgentState> successors(const AgentState& state, const EnvMap& env) {
  std::vector<AgentState> out;
  const int lo = std::max(0, state.speed - env.rules.max_speed_delta);
  const int hi = std::min(env.rules.max_speed, state.speed + env.rules.max_speed_delta);
  for (int h = 0; h < kHeadingCount; ++h) {
    for (int v = lo; v <= hi; ++v) {
      auto next = advance(state, heading_from_index(h), v);
      if (feasibility(state, next, env) == 1) out.push_back(next);
    }
  }
  return out;
}

/// A state the agent may occupy: in bounds, passable, lane and yield compliant.
inline bool state_admissible(const AgentState& s, const EnvMap& env) {
  return env.passable(s.cell()) && s.speed >= 0 && s.speed <= env.rules.max_speed && lane_ok(s, env) &&
         yield_ok(s, env);
}

}  // namespace trace

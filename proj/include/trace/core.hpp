#pragma once

// Domain types shared by every module: discrete agent states, trajectories,
// sparse observations, the hypothesis tree and the run configuration.

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace trace {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, int line = 0, int column = 0)
  : std::runtime_error(format(what, line, column)), line(line), column(column) {}
  int line;
  int column;

private:
  static std::string format(const std::string& what, int line, int column) {
    if (line <= 0) return what;
    return "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what;
  }
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LengthMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct CapacityExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyGroundTruth : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ExternalGeneratorFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Headings
// ---------------------------------------------------------------------------

/// Eight compass headings in 45 degree steps, counter-clockwise from east.
/// Grid rows grow southwards, so north is -y.
enum class Heading : std::uint8_t { E = 0, NE, N, NW, W, SW, S, SE };

inline constexpr int kHeadingCount = 8;
inline constexpr std::array<std::string_view, kHeadingCount> kHeadingNames{
  "E", "NE", "N", "NW", "W", "SW", "S", "SE"};

constexpr int index_of(Heading h) { return static_cast<int>(h); }

constexpr Heading heading_from_index(int i) {
  return static_cast<Heading>(((i % kHeadingCount) + kHeadingCount) % kHeadingCount);
}

constexpr Heading rotate(Heading h, int units) { return heading_from_index(index_of(h) + units); }

/// Signed shortest rotation from `from` to `to`, in [-4, 3].
constexpr int heading_delta(Heading from, Heading to) {
  int d = ((index_of(to) - index_of(from)) % kHeadingCount + kHeadingCount) % kHeadingCount;
  return d >= 4 ? d - kHeadingCount : d;
}

constexpr std::pair<int, int> unit_step(Heading h) {
  constexpr std::array<std::pair<int, int>, kHeadingCount> steps{{
    {1, 0}, {1, -1}, {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1}}};
  return steps[static_cast<std::size_t>(index_of(h))];
}

inline std::string_view to_string(Heading h) { return kHeadingNames[static_cast<std::size_t>(index_of(h))]; }

/// Accepts compass names (E, NE, ...) or a numeric index 0..7.
inline std::optional<Heading> parse_heading(std::string_view text) {
  for (int i = 0; i < kHeadingCount; ++i) {
    if (kHeadingNames[static_cast<std::size_t>(i)] == text) return heading_from_index(i);
  }
  if (text.size() == 1 && text[0] >= '0' && text[0] <= '7') return heading_from_index(text[0] - '0');
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// AgentState / Trajectory / Observation
// ---------------------------------------------------------------------------

struct Cell {
  int x = 0;
  int y = 0;
  auto operator<=>(const Cell&) const = default;
};

inline int chebyshev(Cell a, Cell b) { return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)); }

/// Discrete kinematic state. Coordinates are signed so that perturbed
/// counterfactuals may leave the map and be scored infeasible later.
struct AgentState {
  int x = 0;
  int y = 0;
  Heading heading = Heading::E;
  int speed = 0;

  Cell cell() const { return {x, y}; }
  auto operator<=>(const AgentState&) const = default;
};

inline constexpr int kMaxSpeedLevel = 2;

struct Trajectory {
  int start_time = 0;
  std::vector<AgentState> states;

  std::size_t size() const { return states.size(); }
  bool empty() const { return states.empty(); }
  int end_time() const { return start_time + static_cast<int>(states.size()) - 1; }
  bool covers(int time) const { return !states.empty() && time >= start_time && time <= end_time(); }
  const AgentState& at_time(int time) const { return states.at(static_cast<std::size_t>(time - start_time)); }

  auto operator<=>(const Trajectory&) const = default;
};

/// Exact discrete identity: same start time, same length, same states.
inline bool trajectory_equals(const Trajectory& a, const Trajectory& b) {
  return a.start_time == b.start_time && a.states == b.states;
}

struct Observation {
  int time = 0;
  int measured_x = 0;
  int measured_y = 0;
  int noise_radius = 0;

  Cell cell() const { return {measured_x, measured_y}; }
  auto operator<=>(const Observation&) const = default;
};

/// Observations outside the trajectory's time span are vacuously consistent.
inline bool consistent_with(const Trajectory& traj, const Observation& obs) {
  if (!traj.covers(obs.time)) return true;
  return chebyshev(traj.at_time(obs.time).cell(), obs.cell()) <= obs.noise_radius;
}

inline bool consistent_with_all(const Trajectory& traj, const std::vector<Observation>& observations) {
  return std::all_of(observations.begin(), observations.end(),
                     [&](const Observation& o) { return consistent_with(traj, o); });
}

// ---------------------------------------------------------------------------
// TrajectoryTree
// ---------------------------------------------------------------------------

enum class NodeTag : std::uint8_t { proposed, feasible, implausible, edge_case, pruned };

inline std::string_view to_string(NodeTag t) {
  switch (t) {
    case NodeTag::proposed: return "proposed";
    case NodeTag::feasible: return "feasible";
    case NodeTag::implausible: return "implausible";
    case NodeTag::edge_case: return "edge_case";
    case NodeTag::pruned: return "pruned";
  }
  return "?";
}

/// True for tags whose node may lie on a hypothesis path.
constexpr bool is_live(NodeTag t) {
  return t == NodeTag::proposed || t == NodeTag::feasible || t == NodeTag::edge_case;
}

/// Rooted tree of partial trajectories. Node ids are dense indices; the root
/// is id 0 and sits at `root_time`.
class TrajectoryTree {
public:
  static constexpr int kNoParent = -1;

  struct Node {
    int id = 0;
    int parent_id = kNoParent;
    AgentState state;
    int depth = 0;
    NodeTag tag = NodeTag::proposed;
    std::vector<int> children;
  };

  TrajectoryTree() : TrajectoryTree(AgentState{}, 0) {}

  TrajectoryTree(AgentState root, int root_time) : root_time_(root_time) {
    nodes_.push_back(Node{0, kNoParent, root, 0, NodeTag::feasible, {}});
  }

  const Node& root() const { return nodes_.front(); }
  int root_time() const { return root_time_; }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

  std::optional<int> find_child(int parent, const AgentState& state) const {
    for (int c : node(parent).children) {
      if (node(c).state == state) return c;
    }
    return std::nullopt;
  }

  int add_child(int parent, const AgentState& state, NodeTag tag) {
    const int id = static_cast<int>(nodes_.size());
    const int depth = node(parent).depth + 1;
    nodes_.push_back(Node{id, parent, state, depth, tag, {}});
    nodes_[static_cast<std::size_t>(parent)].children.push_back(id);
    return id;
  }

  void set_tag(int id, NodeTag tag) { nodes_.at(static_cast<std::size_t>(id)).tag = tag; }

  /// Tags `id` and its whole subtree.
  void tag_subtree(int id, NodeTag tag) {
    std::vector<int> stack{id};
    while (!stack.empty()) {
      const int n = stack.back();
      stack.pop_back();
      set_tag(n, tag);
      for (int c : node(n).children) stack.push_back(c);
    }
  }

  Trajectory path_to(int id) const {
    Trajectory t;
    t.start_time = root_time_;
    for (int n = id; n != kNoParent; n = node(n).parent_id) t.states.push_back(node(n).state);
    std::reverse(t.states.begin(), t.states.end());
    return t;
  }

  /// True iff every node from the root to `id` (inclusive) carries a live tag.
  bool path_is_live(int id) const {
    for (int n = id; n != kNoParent; n = node(n).parent_id) {
      if (!is_live(node(n).tag)) return false;
    }
    return true;
  }

  /// Live root-to-node paths ending exactly at `depth`.
  std::vector<Trajectory> live_paths_at_depth(int depth) const {
    std::vector<Trajectory> out;
    for (const auto& n : nodes_) {
      if (n.depth == depth && path_is_live(n.id)) out.push_back(path_to(n.id));
    }
    return out;
  }

  /// Inserts `traj` (whose first state must equal the root) sharing existing
  /// prefixes. Newly created nodes receive `tag`. Returns the number of new nodes.
  int graft(const Trajectory& traj, NodeTag tag) {
    if (traj.empty() || traj.start_time != root_time_ || traj.states.front() != root().state) {
      throw std::invalid_argument("graft: trajectory does not start at the tree root");
    }
    int at = 0;
    int created = 0;
    for (std::size_t i = 1; i < traj.states.size(); ++i) {
      if (auto c = find_child(at, traj.states[i]); c && is_live(node(*c).tag)) {
        at = *c;
      } else {
        at = add_child(at, traj.states[i], tag);
        ++created;
      }
    }
    return created;
  }

  /// Structural invariants; returns a description of the first breach.
  std::optional<std::string> check_well_formed(int max_depth) const {
    if (nodes_.empty() || nodes_.front().parent_id != kNoParent || nodes_.front().depth != 0) {
      return "missing or malformed root";
    }
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      if (n.parent_id < 0 || n.parent_id >= static_cast<int>(i)) return "node without valid parent";
      if (n.depth != node(n.parent_id).depth + 1) return "depth is not parent depth + 1";
      if (n.depth > max_depth) return "node deeper than the configured depth";
    }
    return std::nullopt;
  }

private:
  int root_time_ = 0;
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

struct RunConfig {
  int depth = 4;                 // tree depth
  int branching = 3;             // candidates per generator call
  int horizon = 64;              // last step index hypotheses may reach
  double alpha = 1.0;            // feasibility loss weight
  double beta = 1.0;             // divergence loss weight
  int critic_samples = 64;       // 0 disables the critic
  int critic_keep = 8;
  std::uint64_t seed = 0;
  bool feedback_enabled = true;
  int iterations_per_window = 3;
  int giot_rounds = 3;
  std::uint64_t node_budget = 10'000'000;
  double near_miss_rate = 0.25;  // scripted generator's injected error rate
  int generator_timeout_ms = 30'000;

  bool operator==(const RunConfig&) const = default;

  void validate() const {
    if (depth < 1) throw ValidationError("depth must be >= 1");
    if (branching < 1) throw ValidationError("branching must be >= 1");
    if (alpha < 0.0 || beta < 0.0) throw ValidationError("alpha and beta must be nonnegative");
    if (critic_samples < 0) throw ValidationError("critic_samples must be >= 0");
    if (critic_keep < 1) throw ValidationError("critic_keep must be >= 1");
    if (critic_samples > 0 && critic_keep > critic_samples) {
      throw ValidationError("critic_keep must not exceed critic_samples");
    }
    if (iterations_per_window < 1) throw ValidationError("iterations_per_window must be >= 1");
    if (giot_rounds < 1) throw ValidationError("giot_rounds must be >= 1");
    if (near_miss_rate < 0.0 || near_miss_rate > 1.0) throw ValidationError("near_miss_rate must lie in [0, 1]");
  }

  /// Depth must fit between the anchor time and the horizon.
  void validate_anchor_time(int anchor_time) const {
    if (depth > horizon - anchor_time) {
      throw ValidationError("depth " + std::to_string(depth) + " exceeds horizon - anchor time (" +
                            std::to_string(horizon - anchor_time) + ")");
    }
  }
};

// ---------------------------------------------------------------------------
// Deterministic hashing
// ---------------------------------------------------------------------------

/// splitmix64 finalizer; used to derive independent seeds from structured keys.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return mix64(seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

inline std::uint64_t hash_state(std::uint64_t seed, const AgentState& s) {
  seed = hash_combine(seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(s.x)));
  seed = hash_combine(seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(s.y)));
  seed = hash_combine(seed, static_cast<std::uint64_t>(index_of(s.heading)));
  return hash_combine(seed, static_cast<std::uint64_t>(s.speed));
}

inline std::uint64_t hash_trajectory(std::uint64_t seed, const Trajectory& t) {
  seed = hash_combine(seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(t.start_time)));
  for (const auto& s : t.states) seed = hash_state(seed, s);
  return seed;
}

/// Uniform double in [0, 1) from a hash value.
constexpr double unit_interval(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

/// FNV-1a over bytes; stable digest for report config snapshots and set digests.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace trace

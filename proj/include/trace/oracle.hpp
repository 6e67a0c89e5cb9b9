#pragma once

// Ground-truth enumeration of every feasible, observation-consistent
// depth-limited trajectory, and the coverage metric.

#include <atomic>
#include <future>

#include "trace/world_model.hpp"

namespace trace {

namespace detail {

struct EnumerationJob {
  const EnvMap& env;
  const std::vector<Observation>& obs;
  int depth;
  std::uint64_t budget;
  std::atomic<std::uint64_t>& visited;

  void charge() {
    if (visited.fetch_add(1, std::memory_order_relaxed) + 1 > budget) {
      throw CapacityExceeded("ground-truth enumeration exceeded the node budget of " + std::to_string(budget));
    }
  }

  bool consistent_at(const AgentState& s, int time) const {
    for (const auto& o : obs) {
      if (o.time == time && chebyshev(s.cell(), o.cell()) > o.noise_radius) return false;
    }
    return true;
  }

  void descend(Trajectory& path, std::vector<Trajectory>& out) {
    charge();
    if (static_cast<int>(path.size()) == depth + 1) {
      out.push_back(path);
      return;
    }
    const int time = path.start_time + static_cast<int>(path.size());
    for (const auto& next : successors(path.states.back(), env)) {
      if (!consistent_at(next, time)) continue;
      path.states.push_back(next);
      descend(path, out);
      path.states.pop_back();
    }
  }
};

}  // namespace detail

/// All depth-`depth` trajectories from `anchor` (at `start_time`) whose every
/// transition is feasible and every state matches the observations. Root
/// successors are explored in parallel; the node budget is shared.
inline std::set<Trajectory> enumerate_gamma_star(const AgentState& anchor, const EnvMap& env,
                                                 const std::vector<Observation>& obs_schedule, int depth,
                                                 int start_time = 0, std::uint64_t node_budget = 10'000'000,
                                                 bool parallel = true) {
  std::set<Trajectory> result;
  if (depth < 0 || !env.in_bounds(anchor.cell())) return result;
  std::atomic<std::uint64_t> visited{0};
  detail::EnumerationJob job{env, obs_schedule, depth, node_budget, visited};
  job.charge();
  if (!job.consistent_at(anchor, start_time)) return result;
  if (depth == 0) {
    result.insert(Trajectory{start_time, {anchor}});
    return result;
  }

  const auto first = successors(anchor, env);
  auto branch = [&](const AgentState& next) {
    std::vector<Trajectory> out;
    if (!job.consistent_at(next, start_time + 1)) return out;
    Trajectory path{start_time, {anchor, next}};
    job.descend(path, out);
    return out;
  };

  if (parallel && first.size() > 1) {
    std::vector<std::future<std::vector<Trajectory>>> futures;
    futures.reserve(first.size());
    for (const auto& next : first) futures.push_back(std::async(std::launch::async, branch, next));
    std::exception_ptr failure;
    for (auto& f : futures) {
      try {
        for (auto& t : f.get()) result.insert(std::move(t));
      } catch (...) {
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  } else {
    for (const auto& next : first) {
      for (auto& t : branch(next)) result.insert(std::move(t));
    }
  }
  return result;
}

struct CoverageResult {
  double ratio = 0.0;
  std::size_t hits = 0;
  std::size_t unsound_count = 0;  // members of the method's set outside the ground truth
};

inline CoverageResult coverage(const std::set<Trajectory>& gamma_dagger, const std::set<Trajectory>& gamma_star) {
  if (gamma_star.empty()) throw EmptyGroundTruth("coverage is undefined for an empty ground-truth set");
  CoverageResult r;
  for (const auto& t : gamma_dagger) {
    if (gamma_star.count(t)) ++r.hits;
    else ++r.unsound_count;
  }
  r.ratio = static_cast<double>(r.hits) / static_cast<double>(gamma_star.size());
  return r;
}

}  // namespace trace

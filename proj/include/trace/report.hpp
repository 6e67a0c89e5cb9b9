#pragma once

// Coverage reports: per-window ground truth, coverage, invalid rates and
// diversity, with JSON-lines and CSV encodings.

#include <map>
#include <mutex>
#include <sstream>

#include "trace/baselines.hpp"
#include "trace/oracle.hpp"
#include "trace/serialize.hpp"

namespace trace {

struct WindowReport {
  int window = 0;
  int start_time = 0;
  AgentState anchor;
  std::size_t gamma_star_size = 0;
  std::size_t gamma_dagger_size = 0;
  std::size_t hits = 0;
  std::size_t unsound_count = 0;
  double coverage = 0.0;
  std::string gamma_star_digest;
  WindowMetrics metrics;
  bool operator==(const WindowReport&) const = default;
};

struct CoverageReport {
  std::string scenario_id;
  std::string method;
  std::uint64_t seed = 0;
  RunConfig config;
  std::string config_digest;
  /// Pooled over windows: windows start at distinct times, so their sets are
  /// disjoint and this is exactly |union(dagger) ∩ union(star)| / |union(star)|.
  double coverage = 0.0;
  std::size_t gamma_star_size = 0;
  std::size_t gamma_dagger_size = 0;
  std::size_t hits = 0;
  std::size_t unsound_count = 0;
  std::vector<double> per_window_invalid_rate;
  std::vector<int> per_window_distinct_valid;
  std::vector<WindowReport> windows;
  bool operator==(const CoverageReport&) const = default;
};

/// Memoises ground-truth sets by (anchor, time, observation, depth).
class OracleCache {
public:
  const std::set<Trajectory>& get(const AgentState& anchor, const EnvMap& env, const Observation& obs, int depth,
                                  std::uint64_t budget, const std::string& map_key) {
    const Key key{map_key, anchor, obs, depth};
    {
      std::lock_guard lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    auto set = enumerate_gamma_star(anchor, env, {obs}, depth, obs.time, budget);
    std::lock_guard lock(mutex_);
    return cache_.emplace(key, std::move(set)).first->second;
  }

private:
  using Key = std::tuple<std::string, AgentState, Observation, int>;
  std::mutex mutex_;
  std::map<Key, std::set<Trajectory>> cache_;
};

inline CoverageReport build_report(const RunOutput& run, const Scenario& sc, OracleCache* cache = nullptr) {
  OracleCache local;
  OracleCache& oracle = cache ? *cache : local;
  CoverageReport rep;
  rep.scenario_id = run.scenario_id;
  rep.method = std::string(to_string(run.method));
  rep.seed = run.config.seed;
  rep.config = run.config;
  rep.config_digest = config_digest(run.config);
  const std::string map_key = std::to_string(fnv1a64(render_map(*sc.env)));
  for (const auto& w : run.windows) {
    const auto& star = oracle.get(w.anchor, *sc.env, w.observation, run.config.depth, run.config.node_budget, map_key);
    const auto cov = coverage(w.hypotheses, star);
    WindowReport wr;
    wr.window = w.window;
    wr.start_time = w.start_time;
    wr.anchor = w.anchor;
    wr.gamma_star_size = star.size();
    wr.gamma_dagger_size = w.hypotheses.size();
    wr.hits = cov.hits;
    wr.unsound_count = cov.unsound_count;
    wr.coverage = cov.ratio;
    wr.gamma_star_digest = set_digest(star);
    wr.metrics = w.metrics;
    rep.gamma_star_size += wr.gamma_star_size;
    rep.gamma_dagger_size += wr.gamma_dagger_size;
    rep.hits += wr.hits;
    rep.unsound_count += wr.unsound_count;
    rep.per_window_invalid_rate.push_back(w.metrics.invalid_rate);
    rep.per_window_distinct_valid.push_back(w.metrics.distinct_vlm_valid_count);
    rep.windows.push_back(std::move(wr));
  }
  rep.coverage = rep.gamma_star_size == 0 ? 0.0 : static_cast<double>(rep.hits) / static_cast<double>(rep.gamma_star_size);
  return rep;
}

inline void to_json(json& j, const WindowReport& w) {
  j = json{{"window", w.window},
           {"start_time", w.start_time},
           {"anchor", w.anchor},
           {"gamma_star_size", w.gamma_star_size},
           {"gamma_dagger_size", w.gamma_dagger_size},
           {"hits", w.hits},
           {"unsound_count", w.unsound_count},
           {"coverage", w.coverage},
           {"gamma_star_digest", w.gamma_star_digest},
           {"metrics", w.metrics}};
}
inline void from_json(const json& j, WindowReport& w) {
  j.at("window").get_to(w.window);
  j.at("start_time").get_to(w.start_time);
  j.at("anchor").get_to(w.anchor);
  j.at("gamma_star_size").get_to(w.gamma_star_size);
  j.at("gamma_dagger_size").get_to(w.gamma_dagger_size);
  j.at("hits").get_to(w.hits);
  j.at("unsound_count").get_to(w.unsound_count);
  j.at("coverage").get_to(w.coverage);
  j.at("gamma_star_digest").get_to(w.gamma_star_digest);
  j.at("metrics").get_to(w.metrics);
}

inline void to_json(json& j, const CoverageReport& r) {
  j = json{{"scenario_id", r.scenario_id},
           {"method", r.method},
           {"seed", r.seed},
           {"config", r.config},
           {"config_digest", r.config_digest},
           {"coverage", r.coverage},
           {"gamma_star_size", r.gamma_star_size},
           {"gamma_dagger_size", r.gamma_dagger_size},
           {"hits", r.hits},
           {"unsound_count", r.unsound_count},
           {"per_window_invalid_rate", r.per_window_invalid_rate},
           {"per_window_distinct_valid", r.per_window_distinct_valid},
           {"windows", r.windows}};
}
inline void from_json(const json& j, CoverageReport& r) {
  j.at("scenario_id").get_to(r.scenario_id);
  j.at("method").get_to(r.method);
  j.at("seed").get_to(r.seed);
  j.at("config").get_to(r.config);
  j.at("config_digest").get_to(r.config_digest);
  j.at("coverage").get_to(r.coverage);
  j.at("gamma_star_size").get_to(r.gamma_star_size);
  j.at("gamma_dagger_size").get_to(r.gamma_dagger_size);
  j.at("hits").get_to(r.hits);
  j.at("unsound_count").get_to(r.unsound_count);
  j.at("per_window_invalid_rate").get_to(r.per_window_invalid_rate);
  j.at("per_window_distinct_valid").get_to(r.per_window_distinct_valid);
  j.at("windows").get_to(r.windows);
}

/// One report per line.
inline std::string to_json_line(const CoverageReport& r) { return json(r).dump() + "\n"; }

inline std::vector<CoverageReport> parse_report_lines(std::string_view text) {
  std::vector<CoverageReport> out;
  int line_no = 0;
  for (auto line : detail::lines_of(text)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(json::parse(line).get<CoverageReport>());
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed report record: ") + e.what(), line_no, 1);
    }
  }
  return out;
}

inline constexpr std::string_view kCsvHeader =
  "scenario,method,seed,window,start_time,gamma_star,gamma_dagger,hits,coverage,valid,invalid,invalid_rate,"
  "distinct_vlm_valid,config_digest\n";

inline std::string csv_rows(const CoverageReport& r) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(6);
  for (const auto& w : r.windows) {
    out << r.scenario_id << ',' << r.method << ',' << r.seed << ',' << w.window << ',' << w.start_time << ','
        << w.gamma_star_size << ',' << w.gamma_dagger_size << ',' << w.hits << ',' << w.coverage << ','
        << w.metrics.valid_count << ',' << w.metrics.invalid_count << ',' << w.metrics.invalid_rate << ','
        << w.metrics.distinct_vlm_valid_count << ',' << r.config_digest << '\n';
  }
  return out.str();
}

}  // namespace trace

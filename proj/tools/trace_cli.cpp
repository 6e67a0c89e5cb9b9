// trace: run hypothesis-generation experiments, enumerate ground truth and
// summarise reports.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <map>

#include "trace/trace.hpp"

namespace {

using namespace trace;

struct RunFlags {
  std::string scenario;
  std::string method = "trace";
  std::string generator = "scripted";
  std::string cmd;
  std::uint64_t seed = 0;
  std::optional<int> depth, branching, iterations, critic_samples, critic_keep, giot_rounds;
  std::optional<double> alpha, beta;
  bool no_feedback = false;
  std::string out;
  std::string export_csv;
};

void add_config_flags(CLI::App* sub, RunFlags& f) {
  sub->add_option("--depth", f.depth, "Tree depth");
  sub->add_option("--branching", f.branching, "Candidates per generator call");
  sub->add_option("--iterations", f.iterations, "Iterations per measurement window");
  sub->add_option("--alpha", f.alpha, "Critic feasibility-loss weight");
  sub->add_option("--beta", f.beta, "Critic divergence-loss weight");
  sub->add_option("--critic-samples", f.critic_samples, "Critic draws per hypothesis (0 disables)");
  sub->add_option("--critic-keep", f.critic_keep, "Counterfactuals kept per hypothesis");
  sub->add_option("--giot-rounds", f.giot_rounds, "Rounds of the guided-iteration baseline");
  sub->add_flag("--no-feedback", f.no_feedback, "Clear feedback context every iteration");
}

RunConfig make_config(const Scenario& sc, const RunFlags& f, std::uint64_t seed) {
  RunConfig cfg;
  cfg = apply_overrides(cfg, sc.overrides);
  cfg.seed = seed;
  if (f.depth) cfg.depth = *f.depth;
  if (f.branching) cfg.branching = *f.branching;
  if (f.iterations) cfg.iterations_per_window = *f.iterations;
  if (f.alpha) cfg.alpha = *f.alpha;
  if (f.beta) cfg.beta = *f.beta;
  if (f.critic_samples) cfg.critic_samples = *f.critic_samples;
  if (f.critic_keep) cfg.critic_keep = *f.critic_keep;
  if (f.giot_rounds) cfg.giot_rounds = *f.giot_rounds;
  if (f.no_feedback) cfg.feedback_enabled = false;
  cfg.validate();
  return cfg;
}

Method method_of(const std::string& name) {
  auto m = parse_method(name);
  if (!m) throw ValidationError("unknown method '" + name + "' (expected trace, cot, giot or tot)");
  return *m;
}

std::unique_ptr<Generator> make_generator(const RunFlags& f, const RunConfig& cfg) {
  if (f.generator == "scripted") return std::make_unique<ScriptedGenerator>(cfg.seed, scripted_params_for(cfg));
  if (f.generator == "external") {
    if (f.cmd.empty()) throw ValidationError("--generator external needs --cmd");
    return std::make_unique<ExternalGenerator>(f.cmd, cfg.generator_timeout_ms);
  }
  throw ValidationError("unknown generator '" + f.generator + "' (expected scripted or external)");
}

CoverageReport run_one(const Scenario& sc, Method method, const RunFlags& f, std::uint64_t seed, OracleCache& cache) {
  const RunConfig cfg = make_config(sc, f, seed);
  const Realization real = realize(sc, seed);
  auto generator = make_generator(f, cfg);
  spdlog::debug("running {} on {} with seed {}", to_string(method), sc.id, seed);
  const RunOutput run = run_method(sc, method, *generator, cfg, real);
  CoverageReport rep = build_report(run, sc, &cache);
  spdlog::info("{} {} seed {}: coverage {:.4f} ({} of {}), unsound {}", sc.id, to_string(method), seed, rep.coverage,
               rep.hits, rep.gamma_star_size, rep.unsound_count);
  return rep;
}

void append_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << text;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << text;
}

void emit(const std::vector<CoverageReport>& reports, const RunFlags& f) {
  if (!f.out.empty()) {
    std::string lines;
    for (const auto& r : reports) lines += to_json_line(r);
    append_text(f.out, lines);
  }
  if (!f.export_csv.empty()) {
    std::string csv(kCsvHeader);
    for (const auto& r : reports) csv += csv_rows(r);
    write_text(f.export_csv, csv);
  }
}

int cmd_run(const RunFlags& f) {
  const Scenario sc = resolve_scenario(f.scenario);
  OracleCache cache;
  const auto rep = run_one(sc, method_of(f.method), f, f.seed, cache);
  emit({rep}, f);
  std::cout << sc.id << ' ' << rep.method << " seed=" << rep.seed << " coverage=" << std::fixed << std::setprecision(4)
            << rep.coverage << " hits=" << rep.hits << " gamma_star=" << rep.gamma_star_size
            << " gamma_dagger=" << rep.gamma_dagger_size << " unsound=" << rep.unsound_count << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

struct OracleFlags {
  std::string scenario;
  std::uint64_t seed = 0;
  int depth = 4;
  std::string anchor;
  std::optional<int> time;
  bool list = false;
  std::string out;
};

AgentState parse_anchor_flag(const std::string& text) {
  const auto parts = detail::split_ws(text);
  if (parts.size() != 4) throw ParseError("--anchor expects 'X Y HEADING SPEED'");
  auto x = detail::parse_number<int>(parts[0]);
  auto y = detail::parse_number<int>(parts[1]);
  auto h = parse_heading(parts[2]);
  auto v = detail::parse_number<int>(parts[3]);
  if (!x || !y || !h || !v) throw ParseError("--anchor expects 'X Y HEADING SPEED'");
  return {*x, *y, *h, *v};
}

int cmd_oracle(const OracleFlags& f) {
  const Scenario sc = resolve_scenario(f.scenario);
  const Realization real = realize(sc, f.seed);
  AgentState anchor = sc.target_anchor;
  Observation obs = real.observations.front();
  if (!f.anchor.empty()) anchor = parse_anchor_flag(f.anchor);
  if (f.time) {
    auto it = std::find_if(real.observations.begin(), real.observations.end(),
                           [&](const Observation& o) { return o.time == *f.time; });
    if (it == real.observations.end()) throw ValidationError("no scheduled observation at time " + std::to_string(*f.time));
    obs = *it;
  }
  RunConfig cfg;
  cfg = apply_overrides(cfg, sc.overrides);
  cfg.depth = f.depth;
  cfg.validate();
  cfg.validate_anchor_time(obs.time);
  const auto star = enumerate_gamma_star(anchor, *sc.env, {obs}, cfg.depth, obs.time, cfg.node_budget);
  json j{{"scenario_id", sc.id}, {"anchor", anchor}, {"observation", obs}, {"depth", cfg.depth},
         {"gamma_star_size", star.size()}, {"gamma_star_digest", set_digest(star)}};
  if (f.list) j["trajectories"] = star;
  if (!f.out.empty()) write_text(f.out, j.dump() + "\n");
  std::cout << sc.id << " depth=" << cfg.depth << " gamma_star=" << star.size() << " digest=" << set_digest(star) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open report file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct Aggregate {
  int runs = 0;
  double coverage = 0.0;
  std::vector<double> invalid_rate;
  std::vector<double> distinct_valid;
};

void add_to(Aggregate& a, const CoverageReport& r) {
  ++a.runs;
  a.coverage += r.coverage;
  const auto n = r.per_window_invalid_rate.size();
  if (a.invalid_rate.size() < n) a.invalid_rate.resize(n, 0.0);
  if (a.distinct_valid.size() < n) a.distinct_valid.resize(n, 0.0);
  for (std::size_t w = 0; w < n; ++w) {
    a.invalid_rate[w] += r.per_window_invalid_rate[w];
    a.distinct_valid[w] += r.per_window_distinct_valid[w];
  }
}

void print_tables(const std::vector<CoverageReport>& reports, std::ostream& os) {
  std::map<std::string, std::map<std::string, Aggregate>> agg;  // scenario -> method -> sums
  std::set<std::string> methods;
  for (const auto& r : reports) {
    add_to(agg[r.scenario_id][r.method], r);
    methods.insert(r.method);
  }
  const std::vector<std::string> order{"cot", "giot", "tot", "trace"};
  std::vector<std::string> cols;
  for (const auto& m : order) {
    if (methods.count(m)) cols.push_back(m);
  }

  os << std::fixed << std::setprecision(4);
  os << "Coverage (mean over runs)\n" << std::setw(10) << "scenario";
  for (const auto& m : cols) os << std::setw(10) << m;
  os << '\n';
  for (const auto& [sc, by_method] : agg) {
    os << std::setw(10) << sc;
    for (const auto& m : cols) {
      auto it = by_method.find(m);
      if (it == by_method.end()) os << std::setw(10) << "-";
      else os << std::setw(10) << it->second.coverage / it->second.runs;
    }
    os << '\n';
  }

  auto series = [&](const char* title, auto pick) {
    os << '\n' << title << '\n' << std::setw(10) << "scenario" << std::setw(8) << "method";
    std::size_t windows = 0;
    for (const auto& [sc, by_method] : agg) {
      for (const auto& [m, a] : by_method) windows = std::max(windows, a.invalid_rate.size());
    }
    for (std::size_t w = 0; w < windows; ++w) os << std::setw(10) << ("w" + std::to_string(w + 1));
    os << '\n';
    for (const auto& [sc, by_method] : agg) {
      for (const auto& m : cols) {
        auto it = by_method.find(m);
        if (it == by_method.end()) continue;
        os << std::setw(10) << sc << std::setw(8) << m;
        const auto& values = pick(it->second);
        for (double v : values) os << std::setw(10) << v / it->second.runs;
        os << '\n';
      }
    }
  };
  series("Invalid proposal rate per window (mean over runs)",
         [](const Aggregate& a) -> const std::vector<double>& { return a.invalid_rate; });
  os << std::setprecision(2);
  series("Distinct valid generator paths per window (mean over runs)",
         [](const Aggregate& a) -> const std::vector<double>& { return a.distinct_valid; });
}

int cmd_eval(const std::vector<std::string>& paths) {
  std::vector<CoverageReport> reports;
  for (const auto& p : paths) {
    try {
      for (auto& r : parse_report_lines(read_file(p))) reports.push_back(std::move(r));
    } catch (const ParseError& e) {
      throw ParseError(p + ": " + e.what());
    }
  }
  if (reports.empty()) throw ValidationError("no reports to evaluate");
  std::set<std::string> digests;
  for (const auto& r : reports) digests.insert(r.config_digest);
  if (digests.size() > 1) {
    throw ValidationError("reports come from " + std::to_string(digests.size()) +
                          " different run configurations; refusing to join them");
  }
  print_tables(reports, std::cout);
  return 0;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

int cmd_sweep(const RunFlags& f, std::vector<std::string> scenarios, std::vector<std::string> methods, int seeds) {
  if (seeds < 1) throw ValidationError("--seeds must be >= 1");
  if (scenarios.empty()) {
    for (const auto& [name, text] : bundled_sources()) scenarios.emplace_back(name);
  }
  if (methods.empty()) methods = {"cot", "giot", "tot", "trace"};
  std::vector<Method> ms;
  for (const auto& m : methods) ms.push_back(method_of(m));

  std::vector<CoverageReport> reports;
  for (const auto& name : scenarios) {
    const Scenario sc = resolve_scenario(name);
    OracleCache cache;
    for (Method m : ms) {
      std::vector<std::future<CoverageReport>> runs;
      for (int s = 1; s <= seeds; ++s) {
        runs.push_back(std::async(std::launch::async, [&, s] { return run_one(sc, m, f, static_cast<std::uint64_t>(s), cache); }));
      }
      for (auto& r : runs) reports.push_back(r.get());
    }
  }
  emit(reports, f);
  print_tables(reports, std::cout);
  return 0;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("trace");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%^%l%$: %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("TRACE_LOG")) {
    const std::string level(env);
    if (level == "error") spdlog::set_level(spdlog::level::err);
    else if (level == "info") spdlog::set_level(spdlog::level::info);
    else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Behavior-hypothesis generation experiments"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Run one method over a scenario's observation schedule");
  run->add_option("--scenario", run_flags.scenario, "Bundled id (t1..t5) or scenario file")->required();
  run->add_option("--method", run_flags.method, "trace, cot, giot or tot");
  run->add_option("--generator", run_flags.generator, "scripted or external");
  run->add_option("--cmd", run_flags.cmd, "Peer command for the external generator");
  run->add_option("--seed", run_flags.seed, "Seed");
  run->add_option("--out", run_flags.out, "Append the report (JSON lines) here");
  run->add_option("--export-csv", run_flags.export_csv, "Write per-window rows here");
  add_config_flags(run, run_flags);

  OracleFlags oracle_flags;
  auto* oracle = app.add_subcommand("oracle", "Enumerate the ground-truth set for one window");
  oracle->add_option("--scenario", oracle_flags.scenario, "Bundled id (t1..t5) or scenario file")->required();
  oracle->add_option("--seed", oracle_flags.seed, "Seed of the realised measurements");
  oracle->add_option("--depth", oracle_flags.depth, "Depth");
  oracle->add_option("--anchor", oracle_flags.anchor, "Anchor 'X Y HEADING SPEED' (default: scenario anchor)");
  oracle->add_option("--time", oracle_flags.time, "Observation time opening the window");
  oracle->add_flag("--list", oracle_flags.list, "Include the trajectories in --out");
  oracle->add_option("--out", oracle_flags.out, "Write size and digest (JSON) here");

  std::vector<std::string> eval_paths;
  auto* eval = app.add_subcommand("eval", "Summarise report files");
  eval->add_option("reports", eval_paths, "Report files (JSON lines)")->required();

  RunFlags sweep_flags;
  std::vector<std::string> sweep_scenarios, sweep_methods;
  int sweep_seeds = 10;
  auto* sweep = app.add_subcommand("sweep", "Run methods over seeds 1..S and summarise");
  sweep->add_option("--scenario", sweep_scenarios, "Scenarios (default: all bundled)");
  sweep->add_option("--method", sweep_methods, "Methods (default: all)");
  sweep->add_option("--seeds", sweep_seeds, "Number of seeds");
  sweep->add_option("--generator", sweep_flags.generator, "scripted or external");
  sweep->add_option("--cmd", sweep_flags.cmd, "Peer command for the external generator");
  sweep->add_option("--out", sweep_flags.out, "Append reports (JSON lines) here");
  sweep->add_option("--export-csv", sweep_flags.export_csv, "Write per-window rows here");
  add_config_flags(sweep, sweep_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(run_flags);
    if (*oracle) return cmd_oracle(oracle_flags);
    if (*eval) return cmd_eval(eval_paths);
    if (*sweep) return cmd_sweep(sweep_flags, sweep_scenarios, sweep_methods, sweep_seeds);
  } catch (const CapacityExceeded& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const ExternalGeneratorFailure& e) {
    spdlog::error("external generator: {}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}

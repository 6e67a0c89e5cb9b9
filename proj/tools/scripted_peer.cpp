// Line-protocol peer that answers propose requests with the scripted
// generator. The failure modes exist to exercise the client's error paths.

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <thread>

#include "trace/trace.hpp"

using namespace trace;

namespace {

GeneratorContext context_from(const json& req, std::shared_ptr<const EnvMap>& env_cache, std::string& map_cache) {
  const auto map_text = req.at("map").get<std::string>();
  if (!env_cache || map_text != map_cache) {
    env_cache = std::make_shared<const EnvMap>(parse_map(map_text));
    map_cache = map_text;
  }
  GeneratorContext ctx;
  ctx.env = env_cache;
  req.at("anchor").get_to(ctx.anchor);
  req.at("last_obs").get_to(ctx.last_obs);
  req.at("accepted_motifs").get_to(ctx.accepted_motifs);
  req.at("rejection_notes").get_to(ctx.rejection_notes);
  req.at("iteration").get_to(ctx.iteration);
  return ctx;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scripted generator peer"};
  std::uint64_t seed = 0;
  std::string mode = "normal";
  int after = 0;
  app.add_option("--seed", seed, "Generator seed");
  app.add_option("--mode", mode, "normal, crash, garbage, hang or wrong-type")
    ->check(CLI::IsMember({"normal", "crash", "garbage", "hang", "wrong-type"}));
  app.add_option("--after", after, "Answer this many requests normally before misbehaving");
  CLI11_PARSE(app, argc, argv);

  ScriptedGenerator generator(seed);
  std::shared_ptr<const EnvMap> env;
  std::string map_text;
  std::string line;
  int served = 0;
  while (std::getline(std::cin, line)) {
    if (mode != "normal" && served >= after) {
      if (mode == "crash") return 1;
      if (mode == "garbage") {
        std::cout << "{not json" << std::endl;
        continue;
      }
      if (mode == "wrong-type") {
        std::cout << json{{"type", "status"}}.dump() << std::endl;
        continue;
      }
      std::this_thread::sleep_for(std::chrono::hours(1));
    }
    const json req = json::parse(line);
    const auto ctx = context_from(req, env, map_text);
    const auto states = generator.propose(ctx, req.at("state").get<AgentState>(), req.at("k").get<int>());
    std::cout << json{{"type", "candidates"}, {"states", states}}.dump() << std::endl;
    ++served;
  }
  return 0;
}

#include <fmt/os.h>

#include <fstream>
#include <json.hpp>

#include "ecount/error.hpp"
#include "ecount/rl.hpp"

namespace ecount {

namespace {

using nlohmann::json;

constexpr int kCheckpointVersion = 1;

json net_to_json(const Mlp& net) {
  return {{"layer_sizes", net.layer_sizes()},
          {"params", std::vector<double>(net.params().begin(), net.params().end())}};
}

Mlp net_from_json(const json& j) {
  Mlp net(j.at("layer_sizes").get<std::vector<int>>());
  const auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != net.param_count()) throw Error("checkpoint parameter count mismatch");
  std::copy(params.begin(), params.end(), net.params().begin());
  return net;
}

}  // namespace

void write_agent(const AgentPair& pair, const std::filesystem::path& path) {
  const json j = {
      {"version", kCheckpointVersion},
      {"budget_level_j", pair.budget_level.joules()},
      {"counter_ids", pair.counter_ids},
      {"window_frames", pair.window_frames},
      {"grid_step", pair.grid_step},
      {"scale", {{"mean", pair.scale.mean_scale}, {"std", pair.scale.std_scale}}},
      {"regression",
       {{"actor", net_to_json(pair.regression.actor)},
        {"log_std", pair.regression.log_std},
        {"critic", net_to_json(pair.regression.critic)}}},
      {"classification",
       {{"actor", net_to_json(pair.classification.actor)},
        {"critic", net_to_json(pair.classification.critic)}}},
  };
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump() << "\n";
}

AgentPair read_agent(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  const json j = json::parse(in);
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw Error(path.string() + ": unsupported checkpoint version");
  }
  AgentPair p;
  p.budget_level = Energy::joules(j.at("budget_level_j").get<double>());
  p.counter_ids = j.at("counter_ids").get<std::vector<std::string>>();
  p.window_frames = j.at("window_frames").get<int>();
  p.grid_step = j.at("grid_step").get<int>();
  p.scale = {j.at("scale").at("mean").get<double>(), j.at("scale").at("std").get<double>()};
  p.regression.actor = net_from_json(j.at("regression").at("actor"));
  p.regression.log_std = j.at("regression").at("log_std").get<double>();
  p.regression.critic = net_from_json(j.at("regression").at("critic"));
  p.classification.actor = net_from_json(j.at("classification").at("actor"));
  p.classification.critic = net_from_json(j.at("classification").at("critic"));
  if (p.regression.actor.input_size() != kObservationSize ||
      p.classification.actor.input_size() != kObservationSize) {
    throw Error(path.string() + ": network input size does not match the observation");
  }
  if (p.classification.actor.output_size() != static_cast<int>(p.counter_ids.size())) {
    throw Error(path.string() + ": classification head does not match the counter set");
  }
  return p;
}

void write_training_log(std::span<const EpisodeLog> log, const std::filesystem::path& path) {
  auto out = fmt::output_file(path.string());
  out.print("episode,mean_reward_reg,mean_reward_cls,entropy\n");
  for (const auto& e : log) {
    out.print("{},{:.9g},{:.9g},{:.9g}\n", e.episode, e.mean_reward_reg, e.mean_reward_cls,
              e.entropy);
  }
}

}  // namespace ecount

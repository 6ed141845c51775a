#include <fstream>
#include <json.hpp>

#include "ecount/counter.hpp"
#include "ecount/error.hpp"

namespace ecount {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return json::parse(in);
}

void store(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace

CounterModel read_counter_model(const fs::path& path) {
  const json j = load(path);
  CounterModel m;
  m.counter_id = j.at("counter_id").get<std::string>();
  m.energy_per_frame_j = j.at("energy_per_frame_j").get<double>();
  m.ratio_mean = j.at("ratio_mean").get<double>();
  m.ratio_std = j.at("ratio_std").get<double>();
  m.offset_std = j.at("offset_std").get<double>();
  m.miss_floor = j.at("miss_floor").get<double>();
  m.validate();
  return m;
}

void write_counter_model(const CounterModel& m, const fs::path& path) {
  store({{"counter_id", m.counter_id},
         {"energy_per_frame_j", m.energy_per_frame_j},
         {"ratio_mean", m.ratio_mean},
         {"ratio_std", m.ratio_std},
         {"offset_std", m.offset_std},
         {"miss_floor", m.miss_floor}},
        path);
}

void write_profile(const ErrorProfile& p, const fs::path& path) {
  json j = {{"counter_id", p.counter_id()},
            {"theta", p.theta()},
            {"ratio_samples", p.ratio_samples()},
            {"offset_samples", p.offset_samples()},
            {"dropped_zero_observed", p.dropped_zero_observed()}};
  // Informational only; read_profile recomputes them from the samples.
  if (p.ratio_usable()) j["ratio_moments"] = {{"mean", p.ratio().mean}, {"std", p.ratio().std}};
  if (p.offset_usable()) j["offset_moments"] = {{"mean", p.offset().mean}, {"std", p.offset().std}};
  store(j, path);
}

ErrorProfile read_profile(const fs::path& path) {
  const json j = load(path);
  return ErrorProfile(j.at("counter_id").get<std::string>(), j.at("theta").get<double>(),
                      j.at("ratio_samples").get<std::vector<double>>(),
                      j.at("offset_samples").get<std::vector<double>>(),
                      j.value("dropped_zero_observed", std::size_t{0}));
}

}  // namespace ecount

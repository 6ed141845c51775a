#include <fmt/format.h>
#include <fmt/os.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ecount/error.hpp"
#include "ecount/trace.hpp"

namespace ecount {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

}  // namespace

fs::path sidecar_path(const fs::path& csv_path) {
  fs::path p = csv_path;
  p.replace_extension(".json");
  return p;
}

void write_trace(const CountTrace& trace, const WindowSpec& spec, const fs::path& csv_path) {
  trace.validate(spec);
  {
    auto out = fmt::output_file(csv_path.string());
    out.print("frame_index,count\n");
    for (std::size_t i = 0; i < trace.counts.size(); ++i) out.print("{},{}\n", i, trace.counts[i]);
  }
  json meta = {{"scene_id", trace.scene_id},
               {"fps", trace.fps},
               {"start_epoch", trace.start_epoch},
               {"tau_seconds", spec.tau_seconds}};
  std::ofstream(sidecar_path(csv_path)) << meta.dump(2) << "\n";
}

CountTrace read_trace(const fs::path& csv_path) {
  CountTrace trace;
  {
    auto in = open_in(sidecar_path(csv_path));
    json meta = json::parse(in);
    trace.scene_id = meta.at("scene_id").get<std::string>();
    trace.fps = meta.at("fps").get<int>();
    trace.start_epoch = meta.at("start_epoch").get<std::int64_t>();
  }
  auto in = open_in(csv_path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("frame_index,count", 0) != 0) {
    throw Error(csv_path.string() + ": missing `frame_index,count` header");
  }
  std::size_t expect = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(csv_path.string() + ": malformed row: " + line);
    const auto idx = std::stoull(line.substr(0, comma));
    const int count = std::stoi(line.substr(comma + 1));
    if (idx != expect) throw Error(csv_path.string() + ": frame indices must be consecutive");
    if (count < 0) throw Error(csv_path.string() + ": negative count");
    trace.counts.push_back(count);
    ++expect;
  }
  return trace;
}

DetectionLog read_detection_log(const fs::path& path) {
  auto in = open_in(path);
  DetectionLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line);
    DetectionFrame f;
    f.ts = j.at("ts").get<double>();
    for (const auto& b : j.at("boxes")) {
      f.boxes.push_back({b.at("x0").get<double>(), b.at("y0").get<double>(),
                         b.at("x1").get<double>(), b.at("y1").get<double>(),
                         b.at("class").get<std::string>()});
    }
    log.frames.push_back(std::move(f));
  }
  log.validate();
  return log;
}

void write_detection_log(const DetectionLog& log, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& f : log.frames) {
    json boxes = json::array();
    for (const auto& b : f.boxes) {
      boxes.push_back({{"x0", b.x0}, {"y0", b.y0}, {"x1", b.x1}, {"y1", b.y1}, {"class", b.label}});
    }
    out << json{{"ts", f.ts}, {"boxes", boxes}}.dump() << "\n";
  }
}

RoiSpec read_roi(const fs::path& path) {
  auto in = open_in(path);
  const json j = json::parse(in);
  RoiSpec roi;
  roi.x_min = j.at("x_min").get<double>();
  roi.y_min = j.at("y_min").get<double>();
  roi.x_max = j.at("x_max").get<double>();
  roi.y_max = j.at("y_max").get<double>();
  roi.travel_seconds = j.at("travel_seconds").get<double>();
  roi.validate();
  return roi;
}

}  // namespace ecount

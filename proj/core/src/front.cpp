#include "ecount/front.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/os.h>

#include "ecount/error.hpp"

namespace ecount {

void EnergyModel::validate() const {
  if (!(e_capture_per_frame >= 0.0 && e_wake_capture >= 0.0 && e_wake_process >= 0.0)) {
    throw Error("energy model parameters must be >= 0");
  }
}

std::vector<int> frame_grid(int window_frames, int step) {
  if (step < 1) throw Error("grid step must be >= 1");
  if (window_frames < kMinFrames) throw Error("window shorter than the minimum frame sample");
  std::vector<int> grid;
  for (int n = kMinFrames; n <= window_frames; n += step) grid.push_back(n);
  return grid;
}

int floor_to_grid(int n, int step) {
  if (n < kMinFrames) return kMinFrames - 1;
  return kMinFrames + (n - kMinFrames) / step * step;
}

std::vector<std::size_t> uniform_offsets(std::size_t length, int n, double phase) {
  if (n < 1 || static_cast<std::size_t>(n) > length) {
    throw Error("cannot sample " + std::to_string(n) + " of " + std::to_string(length) + " frames");
  }
  if (!(phase >= 0.0 && phase < 1.0)) throw Error("sampling phase must lie in [0, 1)");
  std::vector<std::size_t> out(static_cast<std::size_t>(n));
  const double stride = static_cast<double>(length) / n;
  for (int k = 0; k < n; ++k) {
    auto off = static_cast<std::size_t>(std::floor((k + phase) * stride));
    out[static_cast<std::size_t>(k)] = std::min(off, length - 1);
  }
  return out;
}

FrontPoint action_outcome(const WindowObservations& window, const CountAction& action,
                          const FrontContext& ctx) {
  if (ctx.bank == nullptr) throw Error("front context has no counter bank");
  if (action.n_frames < kMinFrames) throw Error("count action below the minimum frame sample");
  const auto& counter = ctx.bank->model(action.counter_id);
  auto it = window.find(action.counter_id);
  if (it == window.end()) throw Error("no observations for counter '" + action.counter_id + "'");
  const auto& series = it->second;
  if (static_cast<std::size_t>(action.n_frames) > series.size()) {
    throw Error("count action asks for " + std::to_string(action.n_frames) +
                " frames but the window has " + std::to_string(series.size()));
  }

  // Moments of the whole window at sample size n: the interval a uniform
  // n-frame sample yields in expectation, free of single-draw noise.
  auto stats = sample_stats(series);
  stats.n = action.n_frames;
  const auto ci = approx_ci(stats, ctx.bank->profile(action.counter_id), ctx.alpha, ctx.mode);
  const auto total = mean_to_sum(ci, static_cast<int>(series.size()));

  FrontPoint p;
  p.action = action;
  p.energy = ctx.energy.action_cost(counter, action.n_frames);
  p.ci_width = total.half_width / (ctx.width_scale > 0.0 ? ctx.width_scale
                                                         : std::max(total.center, 1.0));
  return p;
}

std::vector<FrontPoint> lower_envelope(std::vector<FrontPoint> points) {
  std::stable_sort(points.begin(), points.end(), [](const FrontPoint& a, const FrontPoint& b) {
    if (a.energy != b.energy) return a.energy < b.energy;
    return a.ci_width < b.ci_width;
  });
  std::vector<FrontPoint> env;
  for (auto& p : points) {
    if (env.empty() || (p.ci_width < env.back().ci_width && p.energy > env.back().energy)) {
      env.push_back(std::move(p));
    }
  }
  return env;
}

EnergyCIFront build_front(const WindowObservations& window, const FrontContext& ctx,
                          std::span<const int> grid, int window_index) {
  if (grid.empty()) throw Error("empty frame grid");
  if (ctx.bank == nullptr || ctx.bank->models().empty()) throw Error("no counters to evaluate");
  std::vector<FrontPoint> all;
  all.reserve(grid.size() * ctx.bank->models().size());
  for (const auto& m : ctx.bank->models()) {
    const auto avail = window.at(m.counter_id).size();
    for (int n : grid) {
      if (n < kMinFrames) throw Error("frame grid value below the minimum frame sample");
      if (static_cast<std::size_t>(n) > avail) continue;
      all.push_back(action_outcome(window, {m.counter_id, n}, ctx));
    }
  }
  if (all.empty()) throw Error("no feasible count action for window");
  return {window_index, lower_envelope(std::move(all))};
}

double front_gradient(const EnergyCIFront& front, Energy current_energy) {
  const auto& pts = front.points;
  if (pts.empty()) throw Error("empty front");
  if (current_energy < pts.front().energy) {
    throw Error("operating energy below the minimum count action");
  }
  auto it = std::upper_bound(pts.begin(), pts.end(), current_energy,
                             [](Energy e, const FrontPoint& p) { return e < p.energy; });
  // it points just past the operating point.
  if (it == pts.end()) return 0.0;
  const auto& here = *(it - 1);
  return (here.ci_width - it->ci_width) / (it->energy - here.energy).joules();
}

void write_front_csv(const EnergyCIFront& front, const std::filesystem::path& path) {
  auto out = fmt::output_file(path.string());
  out.print("energy_j,ci_width,counter_id,n_frames\n");
  for (const auto& p : front.points) {
    out.print("{:.6f},{:.9g},{},{}\n", p.energy.joules(), p.ci_width, p.action.counter_id,
              p.action.n_frames);
  }
}

}  // namespace ecount

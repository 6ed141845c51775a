#include "ecount/trace.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ecount/error.hpp"
#include "ecount/rng.hpp"

namespace ecount {

void WindowSpec::validate() const {
  if (!(tau_seconds > 0.0)) throw Error("tau_seconds must be positive");
  if (horizon_windows < 1) throw Error("horizon_windows must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
}

int WindowSpec::window_frames(int fps) const {
  if (fps <= 0) throw Error("fps must be positive");
  const double frames = tau_seconds * fps;
  const double rounded = std::round(frames);
  if (rounded < 1.0 || std::abs(frames - rounded) > 1e-9) {
    throw Error("tau_seconds * fps must be a positive whole number of frames");
  }
  return static_cast<int>(rounded);
}

void CountTrace::validate(const WindowSpec& spec) const {
  const auto wf = static_cast<std::size_t>(spec.window_frames(fps));
  if (counts.size() % wf != 0) {
    throw Error("trace length " + std::to_string(counts.size()) +
                " is not a multiple of the window length " + std::to_string(wf));
  }
  if (std::any_of(counts.begin(), counts.end(), [](int c) { return c < 0; })) {
    throw Error("trace contains negative counts");
  }
}

int CountTrace::num_windows(const WindowSpec& spec) const {
  return static_cast<int>(counts.size() / static_cast<std::size_t>(spec.window_frames(fps)));
}

int CountTrace::num_horizons(const WindowSpec& spec) const {
  return num_windows(spec) / spec.horizon_windows;
}

std::span<const int> CountTrace::window(const WindowSpec& spec, int window_index) const {
  const int wf = spec.window_frames(fps);
  if (window_index < 0 || window_index >= num_windows(spec)) {
    throw Error("window index " + std::to_string(window_index) + " out of range");
  }
  return std::span<const int>(counts).subspan(static_cast<std::size_t>(window_index) * wf,
                                              static_cast<std::size_t>(wf));
}

CountTrace CountTrace::horizon(const WindowSpec& spec, int h) const {
  if (h < 0 || h >= num_horizons(spec)) {
    throw Error("horizon index " + std::to_string(h) + " out of range");
  }
  const auto len = static_cast<std::size_t>(spec.window_frames(fps)) * spec.horizon_windows;
  CountTrace out;
  out.scene_id = scene_id;
  out.fps = fps;
  const auto first = counts.begin() + static_cast<std::ptrdiff_t>(len * h);
  out.counts.assign(first, first + static_cast<std::ptrdiff_t>(len));
  out.start_epoch = start_epoch + static_cast<std::int64_t>(len * h) / fps;
  return out;
}

WindowStats window_stats(const CountTrace& trace, const WindowSpec& spec, int window_index) {
  const auto w = trace.window(spec, window_index);
  WindowStats st;
  for (int c : w) st.sum += c;
  st.mean = static_cast<double>(st.sum) / static_cast<double>(w.size());
  double ss = 0.0;
  for (int c : w) ss += (c - st.mean) * (c - st.mean);
  st.std = std::sqrt(ss / static_cast<double>(w.size()));
  return st;
}

CountTrace synth_trace(const DiurnalPattern& pattern, int n_windows, const WindowSpec& spec,
                       std::uint64_t seed, int fps, std::string scene_id) {
  if (n_windows <= 0) throw Error("n_windows must be positive");
  if (pattern.period_windows <= 0) throw Error("period_windows must be positive");
  if (pattern.base_rate < 0.0 || pattern.diurnal_amplitude < 0.0) {
    throw Error("rates must be non-negative");
  }
  spec.validate();
  const int wf = spec.window_frames(fps);
  const double period_s = pattern.period_windows * spec.tau_seconds;
  const double phase_s = pattern.phase_windows * spec.tau_seconds;

  CountTrace trace;
  trace.scene_id = std::move(scene_id);
  trace.fps = fps;
  trace.counts.resize(static_cast<std::size_t>(n_windows) * wf);
  for (std::size_t i = 0; i < trace.counts.size(); ++i) {
    const double t = static_cast<double>(i) / fps;
    const double lambda = std::max(
        0.0, pattern.base_rate + pattern.diurnal_amplitude *
                                     std::sin(2.0 * std::numbers::pi * (t + phase_s) / period_s));
    if (lambda == 0.0) continue;
    KeyedRng rng(seed, i);
    std::poisson_distribution<int> draw(lambda);
    trace.counts[i] = draw(rng);
  }
  return trace;
}

// ---------------------------------------------------------------------------

void DetectionLog::validate() const {
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i > 0 && !(frames[i].ts > frames[i - 1].ts)) {
      throw Error("detection timestamps must be strictly increasing");
    }
    for (const auto& b : frames[i].boxes) {
      if (!(b.x1 > b.x0 && b.y1 > b.y0)) throw Error("detection box with non-positive area");
    }
  }
}

double DetectionLog::span_end() const {
  if (frames.empty()) throw Error("no frames");
  if (frames.size() == 1) return frames.front().ts + 1.0;
  const auto n = frames.size();
  return frames[n - 1].ts + (frames[n - 1].ts - frames[n - 2].ts);
}

void RoiSpec::validate() const {
  if (!(x_min < x_max && y_min < y_max)) throw Error("ROI rectangle is empty");
  if (!(travel_seconds > 0.0)) throw Error("ROI travel_seconds must be positive");
}

bool RoiSpec::intersects(const Box& b) const {
  return b.x0 <= x_max && b.x1 >= x_min && b.y0 <= y_max && b.y1 >= y_min;
}

std::int64_t roi_count(const DetectionLog& log, const RoiSpec& roi, const std::string& label,
                       TimeRange range) {
  if (log.frames.empty()) throw Error("no frames");
  roi.validate();
  constexpr double kEps = 1e-9;
  if (!(range.end > range.begin) || range.begin < log.frames.front().ts - kEps ||
      range.end > log.span_end() + kEps) {
    throw Error("range out of bounds");
  }

  std::int64_t total = 0;
  auto it = log.frames.begin();
  auto last_used = log.frames.end();
  for (long k = 0;; ++k) {
    const double instant = range.begin + static_cast<double>(k) * roi.travel_seconds;
    if (instant >= range.end - kEps) break;
    it = std::lower_bound(it, log.frames.end(), instant - kEps,
                          [](const DetectionFrame& f, double t) { return f.ts < t; });
    if (it == log.frames.end() || it->ts >= range.end - kEps) break;
    // Two instants can resolve to the same frame when frames are sparser than t.
    if (it == last_used) continue;
    last_used = it;
    for (const auto& b : it->boxes) {
      if (b.label == label && roi.intersects(b)) ++total;
    }
  }
  return total;
}

CountTrace ingest_log(const DetectionLog& log, const RoiSpec& roi, const std::string& label,
                      int fps, std::string scene_id) {
  if (log.frames.empty()) throw Error("no frames");
  if (fps <= 0) throw Error("fps must be positive");
  log.validate();
  RoiSpec per_frame = roi;
  per_frame.travel_seconds = 1.0 / fps;

  const double begin = log.frames.front().ts;
  const double span = log.span_end() - begin;
  const auto n = static_cast<std::size_t>(std::floor(span * fps + 1e-9));

  CountTrace trace;
  trace.scene_id = std::move(scene_id);
  trace.fps = fps;
  trace.start_epoch = static_cast<std::int64_t>(std::floor(begin));
  trace.counts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t0 = begin + static_cast<double>(i) / fps;
    const double t1 = begin + static_cast<double>(i + 1) / fps;
    trace.counts.push_back(static_cast<int>(roi_count(log, per_frame, label, {t0, t1})));
  }
  return trace;
}

}  // namespace ecount

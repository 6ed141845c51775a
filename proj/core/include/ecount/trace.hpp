#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ecount {

/// Query window configuration: window length, windows per planning horizon,
/// and the confidence level of every emitted interval.
struct WindowSpec {
  double tau_seconds = 1800.0;
  int horizon_windows = 48;
  double alpha = 0.95;

  void validate() const;
  /// Frames in one window at the given frame rate; throws unless tau*fps is integral.
  int window_frames(int fps) const;
};

/// Per-frame ground-truth object counts for one scene.
struct CountTrace {
  std::string scene_id;
  int fps = 1;
  std::vector<int> counts;
  std::int64_t start_epoch = 0;

  /// Absolute frame number of counts[0]; keys per-frame randomness.
  std::int64_t first_frame() const { return start_epoch * fps; }

  void validate(const WindowSpec& spec) const;
  int num_windows(const WindowSpec& spec) const;
  int num_horizons(const WindowSpec& spec) const;
  std::span<const int> window(const WindowSpec& spec, int window_index) const;
  /// Copy of horizon `h` (horizon_windows whole windows) with start_epoch shifted.
  CountTrace horizon(const WindowSpec& spec, int h) const;
};

struct WindowStats {
  double mean = 0.0;
  double std = 0.0;  ///< population (divide by n)
  std::int64_t sum = 0;
};

WindowStats window_stats(const CountTrace& trace, const WindowSpec& spec, int window_index);

/// Rate model for synthetic scenes:
/// lambda(t) = max(0, base_rate + diurnal_amplitude * sin(2 pi t / period)).
struct DiurnalPattern {
  double base_rate = 1.0;
  double diurnal_amplitude = 0.0;
  int period_windows = 48;
  /// Phase shift in windows; 0 places the rate at base_rate at t = 0.
  double phase_windows = 0.0;
};

CountTrace synth_trace(const DiurnalPattern& pattern, int n_windows, const WindowSpec& spec,
                       std::uint64_t seed, int fps = 1, std::string scene_id = "synthetic");

// ---------------------------------------------------------------------------
// Detection logs and ROI counting

struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  std::string label;
};

struct DetectionFrame {
  double ts = 0.0;  ///< seconds
  std::vector<Box> boxes;
};

struct DetectionLog {
  std::vector<DetectionFrame> frames;

  void validate() const;
  /// End of the covered timespan: last timestamp plus the last frame interval.
  double span_end() const;
};

struct RoiSpec {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
  double travel_seconds = 1.0;

  void validate() const;
  /// Closed-rectangle test: edge-touching boxes intersect.
  bool intersects(const Box& box) const;
};

struct TimeRange {
  double begin = 0.0;
  double end = 0.0;  ///< exclusive
};

/// Counts instances of `label` passing through the ROI over `range`: frames are
/// sampled every roi.travel_seconds starting at range.begin (first frame at or
/// after each sampling instant) and every box intersecting the ROI is counted.
std::int64_t roi_count(const DetectionLog& log, const RoiSpec& roi, const std::string& label,
                       TimeRange range);

/// Per-frame ROI counts at `fps` over the full log, one frame per 1/fps seconds.
CountTrace ingest_log(const DetectionLog& log, const RoiSpec& roi, const std::string& label,
                      int fps, std::string scene_id);

// ---------------------------------------------------------------------------
// Files

/// CSV `frame_index,count` plus a JSON sidecar `{scene_id, fps, start_epoch, tau_seconds}`.
void write_trace(const CountTrace& trace, const WindowSpec& spec,
                 const std::filesystem::path& csv_path);
CountTrace read_trace(const std::filesystem::path& csv_path);
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

/// JSON-lines, one `{ts, boxes:[{x0,y0,x1,y1,class}]}` object per frame.
DetectionLog read_detection_log(const std::filesystem::path& path);
void write_detection_log(const DetectionLog& log, const std::filesystem::path& path);
RoiSpec read_roi(const std::filesystem::path& path);

}  // namespace ecount

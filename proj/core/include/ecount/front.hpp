#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ecount/ci.hpp"
#include "ecount/counter.hpp"
#include "ecount/energy.hpp"

namespace ecount {

/// Minimum frame sample per window for a statistically meaningful estimate.
inline constexpr int kMinFrames = 30;

struct CountAction {
  std::string counter_id;
  int n_frames = kMinFrames;

  friend bool operator==(const CountAction&, const CountAction&) = default;
};

/// Scalar energy parameters. Per-frame capture cost applies to every sampled
/// frame, the counter's own cost to every processed frame, and the two wake
/// costs once per window.
struct EnergyModel {
  double e_capture_per_frame = 0.0;
  double e_wake_capture = 0.0;
  double e_wake_process = 0.0;

  void validate() const;
  Energy per_window_fixed() const { return Energy::joules(e_wake_capture + e_wake_process); }
  Energy per_frame(const CounterModel& counter) const {
    return Energy::joules(e_capture_per_frame + counter.energy_per_frame_j);
  }
  /// Exactly affine in n_frames.
  Energy action_cost(const CounterModel& counter, int n_frames) const {
    return n_frames * per_frame(counter) + per_window_fixed();
  }
};

struct FrontPoint {
  CountAction action;
  Energy energy;
  double ci_width = 0.0;  ///< window-sum half-width over max(expected sum, 1)
};

/// Lower envelope of (energy, width) outcomes for one window: energy strictly
/// increasing, width strictly decreasing.
struct EnergyCIFront {
  int window_index = 0;
  std::vector<FrontPoint> points;
};

/// Candidate frame counts {30, 30 + step, ...} up to window_frames.
std::vector<int> frame_grid(int window_frames, int step = 10);

/// Largest grid value <= n, or kMinFrames - 1 if n is below the grid.
int floor_to_grid(int n, int step = 10);

/// n evenly spaced offsets in [0, length): offset_k = floor((k + phase) * length / n).
std::vector<std::size_t> uniform_offsets(std::size_t length, int n, double phase = 0.0);

/// Full-window observed series of one window, keyed by counter id.
using WindowObservations = std::map<std::string, std::vector<int>>;

struct FrontContext {
  const CounterBank* bank = nullptr;
  EnergyModel energy;
  double alpha = 0.95;
  SigmaMode mode = SigmaMode::textbook;
  /// When positive, widths are half-width / width_scale for every window
  /// (a horizon-level normalizer); otherwise half-width / max(center, 1).
  double width_scale = 0.0;
};

/// Outcome of one count action: energy and the normalized width of the
/// window-sum interval for an n-frame sample, using the moments of the full
/// observed series.
FrontPoint action_outcome(const WindowObservations& window, const CountAction& action,
                          const FrontContext& ctx);

/// Envelope of counters x grid; each point runs a single counter.
EnergyCIFront build_front(const WindowObservations& window, const FrontContext& ctx,
                          std::span<const int> grid, int window_index = 0);

/// Lower envelope of arbitrary points (sorted by energy, strictly improving width).
std::vector<FrontPoint> lower_envelope(std::vector<FrontPoint> points);

/// |d width / d energy| of the segment starting at the operating point at or
/// below current_energy; 0 once the front is exhausted.
double front_gradient(const EnergyCIFront& front, Energy current_energy);

/// CSV `energy_j,ci_width,counter_id,n_frames`.
void write_front_csv(const EnergyCIFront& front, const std::filesystem::path& path);

}  // namespace ecount

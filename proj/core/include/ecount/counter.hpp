#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecount/trace.hpp"

namespace ecount {

/// Parametric stand-in for a neural object counter. Per frame the observed
/// count is round(max(0, kept * r + a)) where kept ~ Binomial(g, 1 - miss_floor),
/// r ~ Normal(ratio_mean, ratio_std) and a ~ Normal(0, offset_std).
struct CounterModel {
  std::string counter_id;
  double energy_per_frame_j = 1.0;
  double ratio_mean = 1.0;
  double ratio_std = 0.0;
  double offset_std = 0.0;
  double miss_floor = 0.0;

  void validate() const;
};

/// Observed count for one frame. `frame` is the absolute frame number, so the
/// same (seed, counter, frame) always yields the same observation.
int observe_frame(const CounterModel& model, int truth, std::int64_t frame, std::uint64_t seed);

CountTrace apply_counter(const CountTrace& truth, const CounterModel& model, std::uint64_t seed);

/// Observations for the frames at `offsets` inside the window starting at
/// absolute frame `window_first_frame`. Equivalent to slicing apply_counter.
std::vector<int> observe_frames(const CounterModel& model, std::span<const int> window_truth,
                                std::int64_t window_first_frame,
                                std::span<const std::size_t> offsets, std::uint64_t seed);

/// Empirical window-level deviations of one counter: ratios mu/mu_x above the
/// threshold theta and offsets mu - mu_x at or below it.
class ErrorProfile {
 public:
  struct Moments {
    double mean = 0.0;
    double std = 0.0;  ///< population std of the stored samples
  };

  ErrorProfile() = default;
  ErrorProfile(std::string counter_id, double theta, std::vector<double> ratio_samples,
               std::vector<double> offset_samples, std::size_t dropped_zero_observed = 0);

  const std::string& counter_id() const { return counter_id_; }
  double theta() const { return theta_; }
  const std::vector<double>& ratio_samples() const { return ratio_samples_; }
  const std::vector<double>& offset_samples() const { return offset_samples_; }
  /// Pairs with mu > theta but mu_x == 0, excluded from the ratio branch.
  std::size_t dropped_zero_observed() const { return dropped_; }

  bool ratio_usable() const { return !ratio_samples_.empty(); }
  bool offset_usable() const { return !offset_samples_.empty(); }

  /// Throw UnprofiledRegime when the branch has no samples.
  const Moments& ratio() const;
  const Moments& offset() const;

 private:
  std::string counter_id_;
  double theta_ = 1.0;
  std::vector<double> ratio_samples_;
  std::vector<double> offset_samples_;
  Moments ratio_{};
  Moments offset_{};
  std::size_t dropped_ = 0;
};

struct MeanPair {
  double truth = 0.0;     ///< mu, the exact window mean
  double observed = 0.0;  ///< mu_x, the counter's window mean
};

inline constexpr double kDefaultTheta = 1.0;

ErrorProfile profile_errors(std::string counter_id, std::span<const MeanPair> pairs,
                            double theta = kDefaultTheta, std::size_t min_pairs = 30);

/// Counter models together with their profiles, looked up by id.
class CounterBank {
 public:
  CounterBank() = default;
  explicit CounterBank(std::vector<CounterModel> models);

  const std::vector<CounterModel>& models() const { return models_; }
  const CounterModel& model(const std::string& id) const;
  std::size_t index_of(const std::string& id) const;
  /// Lowest energy_per_frame_j; ties go to the earlier model.
  const CounterModel& cheapest() const;

  void set_profile(ErrorProfile profile);
  bool has_profile(const std::string& id) const { return profiles_.contains(id); }
  const ErrorProfile& profile(const std::string& id) const;

 private:
  std::vector<CounterModel> models_;
  std::map<std::string, ErrorProfile> profiles_;
};

// ---------------------------------------------------------------------------
// Profile diagnostics

/// Discrete distribution over shared equal-width bins.
struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> probs;
};

inline constexpr int kDefaultHistogramBins = 32;

/// Histograms of `a` and `b` over the pooled [min, max] of both samples.
std::pair<Histogram, Histogram> pooled_histograms(std::span<const double> a,
                                                  std::span<const double> b,
                                                  int bins = kDefaultHistogramBins);

double bhattacharyya(const Histogram& p, const Histogram& q);

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
};

/// Pearson chi-square test of independence on a contingency table of counts.
ChiSquareResult chi_square_independence(const std::vector<std::vector<double>>& table);

// ---------------------------------------------------------------------------
// Files

CounterModel read_counter_model(const std::filesystem::path& path);
void write_counter_model(const CounterModel& model, const std::filesystem::path& path);
/// Raw sample arrays plus theta; moments are recomputed on load.
void write_profile(const ErrorProfile& profile, const std::filesystem::path& path);
ErrorProfile read_profile(const std::filesystem::path& path);

}  // namespace ecount

#include "ecount/counter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ecount/error.hpp"
#include "ecount/rng.hpp"

namespace ecount {

void CounterModel::validate() const {
  if (counter_id.empty()) throw Error("counter_id must not be empty");
  if (!(energy_per_frame_j > 0.0)) throw Error("counter '" + counter_id + "': energy must be > 0");
  if (!(ratio_mean > 0.0)) throw Error("counter '" + counter_id + "': ratio_mean must be > 0");
  if (!(ratio_std >= 0.0) || !std::isfinite(ratio_std) || !(offset_std >= 0.0) ||
      !std::isfinite(offset_std)) {
    throw Error("counter '" + counter_id + "': noise std must be finite and >= 0");
  }
  if (!(miss_floor >= 0.0 && miss_floor <= 1.0)) {
    throw Error("counter '" + counter_id + "': miss_floor must lie in [0, 1]");
  }
}

int observe_frame(const CounterModel& model, int truth, std::int64_t frame, std::uint64_t seed) {
  KeyedRng rng(seed, hash_string(model.counter_id), static_cast<std::uint64_t>(frame));
  int kept = truth;
  if (model.miss_floor > 0.0 && truth > 0) {
    std::binomial_distribution<int> survive(truth, 1.0 - model.miss_floor);
    kept = survive(rng);
  }
  std::normal_distribution<double> unit(0.0, 1.0);
  const double r = model.ratio_mean + model.ratio_std * unit(rng);
  const double a = model.offset_std * unit(rng);
  return static_cast<int>(std::lround(std::max(0.0, kept * r + a)));
}

CountTrace apply_counter(const CountTrace& truth, const CounterModel& model, std::uint64_t seed) {
  CountTrace out = truth;
  const auto first = truth.first_frame();
  for (std::size_t i = 0; i < truth.counts.size(); ++i) {
    out.counts[i] = observe_frame(model, truth.counts[i], first + static_cast<std::int64_t>(i), seed);
  }
  return out;
}

std::vector<int> observe_frames(const CounterModel& model, std::span<const int> window_truth,
                                std::int64_t window_first_frame,
                                std::span<const std::size_t> offsets, std::uint64_t seed) {
  std::vector<int> out;
  out.reserve(offsets.size());
  for (auto off : offsets) {
    if (off >= window_truth.size()) throw Error("frame offset outside window");
    out.push_back(observe_frame(model, window_truth[off],
                                window_first_frame + static_cast<std::int64_t>(off), seed));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

ErrorProfile::Moments moments_of(const std::vector<double>& v) {
  ErrorProfile::Moments m;
  if (v.empty()) return m;
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(ss / static_cast<double>(v.size()));
  return m;
}

}  // namespace

ErrorProfile::ErrorProfile(std::string counter_id, double theta, std::vector<double> ratio_samples,
                           std::vector<double> offset_samples, std::size_t dropped_zero_observed)
    : counter_id_(std::move(counter_id)),
      theta_(theta),
      ratio_samples_(std::move(ratio_samples)),
      offset_samples_(std::move(offset_samples)),
      ratio_(moments_of(ratio_samples_)),
      offset_(moments_of(offset_samples_)),
      dropped_(dropped_zero_observed) {
  if (!(theta_ >= 0.0)) throw Error("theta must be >= 0");
  for (double r : ratio_samples_) {
    if (!(r > 0.0) || !std::isfinite(r)) throw Error("ratio samples must be finite and positive");
  }
}

const ErrorProfile::Moments& ErrorProfile::ratio() const {
  if (!ratio_usable()) throw UnprofiledRegime(counter_id_);
  return ratio_;
}

const ErrorProfile::Moments& ErrorProfile::offset() const {
  if (!offset_usable()) throw UnprofiledRegime(counter_id_);
  return offset_;
}

ErrorProfile profile_errors(std::string counter_id, std::span<const MeanPair> pairs, double theta,
                            std::size_t min_pairs) {
  if (pairs.size() < min_pairs) {
    throw Error("profiling needs at least " + std::to_string(min_pairs) + " window pairs, got " +
                std::to_string(pairs.size()));
  }
  std::vector<double> ratios;
  std::vector<double> offsets;
  std::size_t dropped = 0;
  for (const auto& p : pairs) {
    if (p.truth > theta) {
      if (p.observed == 0.0) {
        ++dropped;
        continue;
      }
      ratios.push_back(p.truth / p.observed);
    } else {
      offsets.push_back(p.truth - p.observed);
    }
  }
  return ErrorProfile(std::move(counter_id), theta, std::move(ratios), std::move(offsets), dropped);
}

// ---------------------------------------------------------------------------

CounterBank::CounterBank(std::vector<CounterModel> models) : models_(std::move(models)) {
  if (models_.empty()) throw Error("counter bank needs at least one counter");
  for (std::size_t i = 0; i < models_.size(); ++i) {
    models_[i].validate();
    for (std::size_t j = 0; j < i; ++j) {
      if (models_[j].counter_id == models_[i].counter_id) {
        throw Error("duplicate counter id '" + models_[i].counter_id + "'");
      }
    }
  }
}

std::size_t CounterBank::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < models_.size(); ++i) {
    if (models_[i].counter_id == id) return i;
  }
  throw Error("unknown counter '" + id + "'");
}

const CounterModel& CounterBank::model(const std::string& id) const { return models_[index_of(id)]; }

const CounterModel& CounterBank::cheapest() const {
  if (models_.empty()) throw Error("empty counter bank");
  return *std::min_element(models_.begin(), models_.end(), [](const auto& a, const auto& b) {
    return a.energy_per_frame_j < b.energy_per_frame_j;
  });
}

void CounterBank::set_profile(ErrorProfile profile) {
  index_of(profile.counter_id());
  auto id = profile.counter_id();
  profiles_.insert_or_assign(std::move(id), std::move(profile));
}

const ErrorProfile& CounterBank::profile(const std::string& id) const {
  auto it = profiles_.find(id);
  if (it == profiles_.end()) throw Error("counter '" + id + "' has no error profile");
  return it->second;
}

// ---------------------------------------------------------------------------

std::pair<Histogram, Histogram> pooled_histograms(std::span<const double> a,
                                                  std::span<const double> b, int bins) {
  if (a.empty() || b.empty()) throw Error("histograms need non-empty samples");
  if (bins < 1) throw Error("bins must be >= 1");
  double lo = std::min(*std::min_element(a.begin(), a.end()), *std::min_element(b.begin(), b.end()));
  double hi = std::max(*std::max_element(a.begin(), a.end()), *std::max_element(b.begin(), b.end()));
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  auto fill = [&](std::span<const double> xs) {
    Histogram h{lo, hi, std::vector<double>(static_cast<std::size_t>(bins), 0.0)};
    for (double x : xs) {
      auto k = static_cast<int>((x - lo) / (hi - lo) * bins);
      k = std::clamp(k, 0, bins - 1);
      h.probs[static_cast<std::size_t>(k)] += 1.0;
    }
    for (double& p : h.probs) p /= static_cast<double>(xs.size());
    return h;
  };
  return {fill(a), fill(b)};
}

double bhattacharyya(const Histogram& p, const Histogram& q) {
  if (p.probs.size() != q.probs.size() || p.lo != q.lo || p.hi != q.hi) {
    throw Error("histograms have mismatched bins");
  }
  auto check = [](const Histogram& h) {
    const double total = std::accumulate(h.probs.begin(), h.probs.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) throw Error("histogram does not sum to 1");
    if (std::any_of(h.probs.begin(), h.probs.end(), [](double x) { return x < 0.0; })) {
      throw Error("histogram has negative mass");
    }
  };
  check(p);
  check(q);
  double bc = 0.0;
  for (std::size_t i = 0; i < p.probs.size(); ++i) bc += std::sqrt(p.probs[i] * q.probs[i]);
  return std::min(bc, 1.0);
}

ChiSquareResult chi_square_independence(const std::vector<std::vector<double>>& table) {
  if (table.empty() || table.front().empty()) throw Error("empty contingency table");
  const std::size_t rows = table.size();
  const std::size_t cols = table.front().size();
  std::vector<double> row_sum(rows, 0.0);
  std::vector<double> col_sum(cols, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (table[i].size() != cols) throw Error("ragged contingency table");
    for (std::size_t j = 0; j < cols; ++j) {
      if (table[i][j] < 0.0) throw Error("negative cell count");
      row_sum[i] += table[i][j];
      col_sum[j] += table[i][j];
      total += table[i][j];
    }
  }
  auto positive = [](double s) { return s > 0.0; };
  if (!std::all_of(row_sum.begin(), row_sum.end(), positive) ||
      !std::all_of(col_sum.begin(), col_sum.end(), positive)) {
    throw Error("contingency table has a zero marginal");
  }
  ChiSquareResult res;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double expected = row_sum[i] * col_sum[j] / total;
      const double d = table[i][j] - expected;
      res.statistic += d * d / expected;
    }
  }
  res.dof = static_cast<int>((rows - 1) * (cols - 1));
  return res;
}

}  // namespace ecount

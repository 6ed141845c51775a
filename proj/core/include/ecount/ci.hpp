#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "ecount/counter.hpp"

namespace ecount {

/// Observed-count statistics on the sampled frames of one window.
struct SampleStats {
  double xbar = 0.0;
  double s = 0.0;  ///< sample std, n - 1 divisor
  int n = 0;
};

inline constexpr int kMinSampleSize = 4;

SampleStats sample_stats(std::span<const int> observed);

/// Which deviation model produced an interval: the multiplicative ratio model
/// (xbar above theta) or the additive offset model.
enum class Branch { ratio, offset };

std::string_view to_string(Branch b);
Branch branch_from_string(std::string_view s);

/// Variance model for the sampling term sigma(mu_x).
///  - textbook: exact std of (S / sqrt(n)) * t with t ~ T(n-1),
///    i.e. sqrt(S^2 / n * (n-1) / (n-3)).
///  - published: sqrt(S^2 (n-1)^2 / (n (n-3)^2)), the closed form as printed
///    in the original derivation. Larger by sqrt((n-1)/(n-3)).
enum class SigmaMode { textbook, published };

std::string_view to_string(SigmaMode m);
SigmaMode sigma_mode_from_string(std::string_view s);

double sigma_mu_x(double s, int n, SigmaMode mode = SigmaMode::textbook);

/// Two-sided critical value z such that P(|Z| <= z) = alpha.
double z_score(double alpha);

/// Standard normal quantile.
double normal_quantile(double p);

struct ConfidenceInterval {
  double center = 0.0;
  double half_width = 0.0;
  double alpha = 0.95;
  Branch branch = Branch::ratio;
  /// Sample provenance; absent for intervals combined across windows.
  std::optional<SampleStats> stats;

  double lower() const { return center - half_width; }
  double upper() const { return center + half_width; }
  bool contains(double x) const { return x >= lower() && x <= upper(); }
  /// sigma(mu) implied by the normal approximation.
  double sigma() const;
};

/// Branch chosen from the observable sample mean: ratio iff xbar > theta.
Branch select_branch(const SampleStats& stats, const ErrorProfile& profile);

/// Interval for the window mean from Monte Carlo draws of
/// (xbar + S/sqrt(n) t) * e' or (xbar + S/sqrt(n) t) + e''. Draw i is keyed by
/// (seed, i), so the result is independent of `threads`.
ConfidenceInterval monte_carlo_ci(const SampleStats& stats, const ErrorProfile& profile,
                                  double alpha, std::int64_t n_sims, std::uint64_t seed,
                                  unsigned threads = 0);

inline constexpr std::int64_t kMinMonteCarloDraws = 10'000;

/// Normal approximation of the same interval: half-width z * sigma(mu).
ConfidenceInterval approx_ci(const SampleStats& stats, const ErrorProfile& profile, double alpha,
                             SigmaMode mode = SigmaMode::textbook);

/// Scales a per-frame mean interval to a window total.
ConfidenceInterval mean_to_sum(const ConfidenceInterval& ci, int frames_in_window);

/// Mean of k equal-length windows, assuming independent windows.
ConfidenceInterval combine_windows(std::span<const ConfidenceInterval> cis, double alpha);

std::string ci_to_json(const ConfidenceInterval& ci);
ConfidenceInterval ci_from_json(const std::string& text);

}  // namespace ecount

#include "ecount/ci.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numbers>
#include <random>
#include <thread>
#include <vector>

#include "ecount/error.hpp"
#include "ecount/rng.hpp"

namespace ecount {

SampleStats sample_stats(std::span<const int> observed) {
  if (observed.size() < static_cast<std::size_t>(kMinSampleSize)) {
    throw Error("insufficient samples: need at least 4, got " + std::to_string(observed.size()));
  }
  SampleStats st;
  st.n = static_cast<int>(observed.size());
  double sum = 0.0;
  for (int x : observed) sum += x;
  st.xbar = sum / st.n;
  double ss = 0.0;
  for (int x : observed) ss += (x - st.xbar) * (x - st.xbar);
  st.s = std::sqrt(ss / (st.n - 1));
  return st;
}

std::string_view to_string(Branch b) { return b == Branch::ratio ? "ratio" : "offset"; }

Branch branch_from_string(std::string_view s) {
  if (s == "ratio") return Branch::ratio;
  if (s == "offset") return Branch::offset;
  throw Error("unknown branch '" + std::string(s) + "'");
}

std::string_view to_string(SigmaMode m) {
  return m == SigmaMode::textbook ? "textbook" : "published";
}

SigmaMode sigma_mode_from_string(std::string_view s) {
  if (s == "textbook") return SigmaMode::textbook;
  if (s == "published") return SigmaMode::published;
  throw Error("unknown sigma mode '" + std::string(s) + "' (expected textbook|published)");
}

double sigma_mu_x(double s, int n, SigmaMode mode) {
  if (n < kMinSampleSize) throw Error("sigma(mu_x) needs n >= 4");
  if (!(s >= 0.0)) throw Error("sample std must be >= 0");
  const double nd = n;
  if (mode == SigmaMode::textbook) return std::sqrt(s * s / nd * (nd - 1.0) / (nd - 3.0));
  return std::sqrt(s * s * (nd - 1.0) * (nd - 1.0) / (nd * (nd - 3.0) * (nd - 3.0)));
}

// Acklam's rational approximation (relative error < 1.2e-9), then one Halley
// step against erfc to reach double precision.
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error("normal quantile needs p in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x = 0.0;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

double z_score(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
  return normal_quantile(1.0 - (1.0 - alpha) / 2.0);
}

double ConfidenceInterval::sigma() const { return half_width / z_score(alpha); }

Branch select_branch(const SampleStats& stats, const ErrorProfile& profile) {
  return stats.xbar > profile.theta() ? Branch::ratio : Branch::offset;
}

namespace {

void check_inputs(const SampleStats& stats, double alpha) {
  if (stats.n < kMinSampleSize) throw Error("interval needs n >= 4");
  if (!(stats.s >= 0.0) || !std::isfinite(stats.xbar)) throw Error("invalid sample statistics");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
}

}  // namespace

ConfidenceInterval monte_carlo_ci(const SampleStats& stats, const ErrorProfile& profile,
                                  double alpha, std::int64_t n_sims, std::uint64_t seed,
                                  unsigned threads) {
  check_inputs(stats, alpha);
  if (n_sims < kMinMonteCarloDraws) throw Error("monte carlo needs at least 10^4 draws");

  ConfidenceInterval ci;
  ci.alpha = alpha;
  ci.stats = stats;
  ci.branch = select_branch(stats, profile);
  const bool ratio = ci.branch == Branch::ratio;
  const auto& samples = ratio ? profile.ratio_samples() : profile.offset_samples();
  const auto& m = ratio ? profile.ratio() : profile.offset();
  ci.center = ratio ? stats.xbar * m.mean : stats.xbar + m.mean;

  const double scale = stats.s / std::sqrt(static_cast<double>(stats.n));
  const double dof = stats.n - 1;
  std::vector<double> dev(static_cast<std::size_t>(n_sims));
  auto simulate = [&](std::int64_t lo, std::int64_t hi) {
    std::student_t_distribution<double> tdist(dof);
    std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
    for (std::int64_t i = lo; i < hi; ++i) {
      KeyedRng rng(seed, static_cast<std::uint64_t>(i));
      tdist.reset();
      const double t = tdist(rng);
      const double e = samples[pick(rng)];
      const double mu_x = stats.xbar + scale * t;
      const double y = ratio ? mu_x * e : mu_x + e;
      dev[static_cast<std::size_t>(i)] = std::abs(y - ci.center);
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::int64_t>(threads, n_sims));
  if (threads <= 1) {
    simulate(0, n_sims);
  } else {
    std::vector<std::jthread> pool;
    const std::int64_t chunk = (n_sims + threads - 1) / threads;
    for (unsigned k = 0; k < threads; ++k) {
      const std::int64_t lo = k * chunk;
      const std::int64_t hi = std::min(n_sims, lo + chunk);
      if (lo < hi) pool.emplace_back(simulate, lo, hi);
    }
  }

  // Smallest w covering at least ceil(alpha * n_sims) draws: that order statistic.
  auto k = static_cast<std::int64_t>(std::ceil(alpha * static_cast<double>(n_sims) - 1e-9));
  k = std::clamp<std::int64_t>(k, 1, n_sims);
  auto nth = dev.begin() + (k - 1);
  std::nth_element(dev.begin(), nth, dev.end());
  ci.half_width = *nth;
  return ci;
}

ConfidenceInterval approx_ci(const SampleStats& stats, const ErrorProfile& profile, double alpha,
                             SigmaMode mode) {
  check_inputs(stats, alpha);
  ConfidenceInterval ci;
  ci.alpha = alpha;
  ci.stats = stats;
  ci.branch = select_branch(stats, profile);
  const double sx = sigma_mu_x(stats.s, stats.n, mode);
  const double var_x = sx * sx;
  double var_mu = 0.0;
  if (ci.branch == Branch::ratio) {
    const auto& e = profile.ratio();
    const double x2 = stats.xbar * stats.xbar;
    var_mu = (var_x + x2) * (e.mean * e.mean + e.std * e.std) - x2 * e.mean * e.mean;
    ci.center = stats.xbar * e.mean;
  } else {
    const auto& e = profile.offset();
    var_mu = var_x + e.std * e.std;
    ci.center = stats.xbar + e.mean;
  }
  ci.half_width = z_score(alpha) * std::sqrt(std::max(0.0, var_mu));
  return ci;
}

ConfidenceInterval mean_to_sum(const ConfidenceInterval& ci, int frames_in_window) {
  if (frames_in_window < 1) throw Error("frames_in_window must be >= 1");
  ConfidenceInterval out = ci;
  out.center = ci.center * frames_in_window;
  out.half_width = ci.half_width * frames_in_window;
  return out;
}

ConfidenceInterval combine_windows(std::span<const ConfidenceInterval> cis, double alpha) {
  if (cis.empty()) throw Error("combine_windows needs at least one interval");
  for (const auto& ci : cis) {
    if (ci.alpha != alpha) throw Error("cannot combine intervals with mixed confidence levels");
  }
  if (cis.size() == 1) return cis.front();
  const double k = static_cast<double>(cis.size());
  const double z = z_score(alpha);
  double center = 0.0;
  double var = 0.0;
  for (const auto& ci : cis) {
    center += ci.center;
    const double sigma = ci.half_width / z;
    var += sigma * sigma;
  }
  ConfidenceInterval out;
  out.alpha = alpha;
  out.branch = cis.front().branch;
  out.center = center / k;
  out.half_width = z * std::sqrt(var) / k;
  return out;
}

std::string ci_to_json(const ConfidenceInterval& ci) {
  nlohmann::json j = {{"center", ci.center},
                      {"half_width", ci.half_width},
                      {"alpha", ci.alpha},
                      {"branch", std::string(to_string(ci.branch))}};
  if (ci.stats) {
    j["n"] = ci.stats->n;
    j["xbar"] = ci.stats->xbar;
    j["s"] = ci.stats->s;
  }
  return j.dump();
}

ConfidenceInterval ci_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ConfidenceInterval ci;
  ci.center = j.at("center").get<double>();
  ci.half_width = j.at("half_width").get<double>();
  ci.alpha = j.at("alpha").get<double>();
  ci.branch = branch_from_string(j.at("branch").get<std::string>());
  if (j.contains("n")) {
    ci.stats = SampleStats{j.at("xbar").get<double>(), j.at("s").get<double>(), j.at("n").get<int>()};
  }
  return ci;
}

}  // namespace ecount

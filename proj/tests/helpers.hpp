#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ecount/counter.hpp"
#include "ecount/front.hpp"
#include "ecount/oracle.hpp"
#include "ecount/rl.hpp"

namespace ecount::testing {

inline CounterModel golden_model(std::string id = "golden", double energy = 24.0) {
  return {std::move(id), energy, 1.0, 0.0, 0.0, 0.0};
}

inline CounterModel noisy_model(std::string id = "noisy", double energy = 2.4) {
  return {std::move(id), energy, 0.85, 0.1, 0.0, 0.0};
}

/// Profile with fixed ratio and offset samples on both branches.
inline ErrorProfile fixed_profile(const std::string& id, std::vector<double> ratios,
                                  std::vector<double> offsets, double theta = 1.0) {
  return ErrorProfile(id, theta, std::move(ratios), std::move(offsets));
}

inline ErrorProfile exact_profile(const std::string& id, double theta = 1.0) {
  return fixed_profile(id, {1.0, 1.0}, {0.0, 0.0}, theta);
}

/// Concave front with a common energy step: widths fall by positive,
/// strictly shrinking decrements.
inline EnergyCIFront concave_front(int index, int points, Energy first, Energy step,
                                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 1.0);
  std::vector<double> decrements(static_cast<std::size_t>(points - 1));
  double d = u(rng) * 0.1;
  for (auto& x : decrements) {
    x = d;
    d *= u(rng) * 0.95;
  }
  double width = 1.0 + u(rng);
  EnergyCIFront f;
  f.window_index = index;
  for (int p = 0; p < points; ++p) {
    f.points.push_back({{"c", kMinFrames + 10 * p}, first + static_cast<std::int64_t>(p) * step, width});
    if (p + 1 < points) width -= decrements[static_cast<std::size_t>(p)];
  }
  return f;
}

/// Minimum mean width over every feasible combination of operating points.
inline double brute_force_best(const std::vector<EnergyCIFront>& fronts, Energy budget) {
  const std::size_t k = fronts.size();
  std::vector<std::size_t> idx(k, 0);
  double best = 1e300;
  while (true) {
    Energy e;
    double w = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      e += fronts[i].points[idx[i]].energy;
      w += fronts[i].points[idx[i]].ci_width;
    }
    if (e <= budget) best = std::min(best, w / static_cast<double>(k));
    std::size_t pos = 0;
    while (pos < k && ++idx[pos] == fronts[pos].points.size()) idx[pos++] = 0;
    if (pos == k) break;
  }
  return best;
}

/// Largest relative gap between the analytic A2C gradient and central
/// differences, visiting every `stride`-th parameter of each network.
inline double a2c_gradient_error(AgentPair pair, const Minibatch& batch, const TrainingConfig& cfg,
                                 std::size_t stride = 1, double h = 1e-5) {
  PairGradients g;
  a2c_loss(pair, batch, cfg, &g);
  double worst = 0.0;
  auto compare = [&](double analytic, double& param) {
    const double keep = param;
    param = keep + h;
    const double up = a2c_loss(pair, batch, cfg, nullptr).total();
    param = keep - h;
    const double down = a2c_loss(pair, batch, cfg, nullptr).total();
    param = keep;
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  };
  auto sweep = [&](Mlp& net, const std::vector<double>& grad) {
    auto params = net.params();
    for (std::size_t i = 0; i < params.size(); i += stride) compare(grad[i], params[i]);
  };
  sweep(pair.regression.actor, g.reg_actor);
  sweep(pair.regression.critic, g.reg_critic);
  sweep(pair.classification.actor, g.cls_actor);
  sweep(pair.classification.critic, g.cls_critic);
  compare(g.reg_log_std, pair.regression.log_std);
  return worst;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("ecount_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace ecount::testing

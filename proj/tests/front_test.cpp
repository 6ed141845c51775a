#include <gtest/gtest.h>

#include <random>

#include "ecount/error.hpp"
#include "ecount/front.hpp"
#include "helpers.hpp"

namespace ecount {
namespace {

std::vector<int> poisson_series(double rate, int frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::poisson_distribution<int> p(rate);
  std::vector<int> out(static_cast<std::size_t>(frames));
  for (auto& c : out) c = p(rng);
  return out;
}

struct Fixture {
  CounterBank bank;
  FrontContext ctx;

  explicit Fixture(std::vector<CounterModel> models, double capture = 1.0)
      : bank(std::move(models)) {
    ctx.bank = &bank;
    ctx.energy.e_capture_per_frame = capture;
  }
};

TEST(FrameGrid, Values) {
  EXPECT_EQ(frame_grid(60), (std::vector<int>{30, 40, 50, 60}));
  EXPECT_EQ(frame_grid(65, 20), (std::vector<int>{30, 50}));
  EXPECT_THROW(frame_grid(29), Error);
  EXPECT_EQ(floor_to_grid(57), 50);
  EXPECT_EQ(floor_to_grid(30), 30);
  EXPECT_EQ(floor_to_grid(29), 29);
}

TEST(UniformOffsets, MaxGapBound) {
  for (std::size_t len : {100u, 1800u, 1801u}) {
    for (int n : {30, 47, 100}) {
      for (double phase : {0.0, 0.3, 0.999}) {
        const auto off = uniform_offsets(len, n, phase);
        ASSERT_EQ(off.size(), static_cast<std::size_t>(n));
        const double bound = 2.0 * static_cast<double>(len) / n;
        for (std::size_t k = 1; k < off.size(); ++k) {
          EXPECT_GT(off[k], off[k - 1]);
          EXPECT_LE(static_cast<double>(off[k] - off[k - 1]), bound);
        }
        EXPECT_LE(static_cast<double>(off.front()), bound);
        EXPECT_LE(static_cast<double>(len - off.back()), bound);
        EXPECT_LT(off.back(), len);
      }
    }
  }
  EXPECT_THROW(uniform_offsets(10, 11), Error);
}

TEST(ActionOutcome, EnergyExample) {
  Fixture f({{"c", 2.0, 1.0, 0.0, 0.0, 0.0}});
  f.bank.set_profile(testing::exact_profile("c"));
  const WindowObservations w{{"c", poisson_series(2.0, 1800, 1)}};
  const auto p = action_outcome(w, {"c", 30}, f.ctx);
  EXPECT_EQ(p.energy, Energy::joules(90.0));
  EXPECT_THROW(action_outcome(w, {"c", 1801}, f.ctx), Error);
  EXPECT_THROW(action_outcome(w, {"c", 29}, f.ctx), Error);
}

TEST(ActionOutcome, MoreFramesNarrowerAndLinearEnergy) {
  Fixture f({{"c", 2.0, 1.0, 0.0, 0.0, 0.0}});
  f.ctx.energy.e_wake_process = 5.0;
  f.bank.set_profile(testing::fixed_profile("c", {0.9, 1.1}, {0.0}));
  const WindowObservations w{{"c", poisson_series(3.0, 1800, 2)}};
  const auto a = action_outcome(w, {"c", 30}, f.ctx);
  const auto b = action_outcome(w, {"c", 120}, f.ctx);
  EXPECT_LT(b.ci_width, a.ci_width);
  const Energy fixed = f.ctx.energy.per_window_fixed();
  EXPECT_EQ(b.energy - fixed, 4 * (a.energy - fixed));
  for (int n = 30; n <= 200; n += 7) {
    EXPECT_EQ(action_outcome(w, {"c", n}, f.ctx).energy,
              n * f.ctx.energy.per_frame(f.bank.model("c")) + fixed);
  }
}

TEST(ActionOutcome, GoldenWidthShrinksLikeInverseRootN) {
  Fixture f({testing::golden_model("g", 1.0)});
  f.bank.set_profile(testing::exact_profile("g"));
  const WindowObservations w{{"g", poisson_series(4.0, 3600, 3)}};
  const double w100 = action_outcome(w, {"g", 100}, f.ctx).ci_width;
  const double w400 = action_outcome(w, {"g", 400}, f.ctx).ci_width;
  const double w1600 = action_outcome(w, {"g", 1600}, f.ctx).ci_width;
  EXPECT_NEAR(w100 / w400, 2.0, 0.05);
  EXPECT_NEAR(w400 / w1600, 2.0, 0.05);
}

TEST(BuildFront, SingleCounterIsItsCurve) {
  Fixture f({{"c", 2.0, 1.0, 0.0, 0.0, 0.0}});
  f.bank.set_profile(testing::fixed_profile("c", {0.95, 1.05}, {0.0}));
  const WindowObservations w{{"c", poisson_series(2.0, 600, 4)}};
  const auto grid = frame_grid(600);
  const auto front = build_front(w, f.ctx, grid, 7);
  EXPECT_EQ(front.window_index, 7);
  ASSERT_EQ(front.points.size(), grid.size());
  EXPECT_EQ(front.points.front().action, (CountAction{"c", 30}));
  EXPECT_THROW(build_front(w, f.ctx, std::span<const int>{}), Error);
}

TEST(BuildFront, DominatedCounterDropped) {
  Fixture f({{"a", 2.0, 1.0, 0.0, 0.0, 0.0}, {"b", 5.0, 1.0, 0.0, 0.0, 0.0}});
  const auto prof = testing::fixed_profile("a", {0.9, 1.0, 1.1}, {0.0});
  f.bank.set_profile(prof);
  f.bank.set_profile(testing::fixed_profile("b", {0.9, 1.0, 1.1}, {0.0}));
  const auto series = poisson_series(3.0, 900, 5);
  const WindowObservations w{{"a", series}, {"b", series}};
  const auto front = build_front(w, f.ctx, frame_grid(900), 0);
  for (const auto& p : front.points) EXPECT_EQ(p.action.counter_id, "a");
}

TEST(BuildFront, CrossingCountersMatchBruteForceEnvelope) {
  // Cheap noisy counter against an exact one at 10x the cost.
  Fixture f({{"cheap", 1.0, 1.0, 0.0, 0.0, 0.0}, {"exact", 10.0, 1.0, 0.0, 0.0, 0.0}}, 0.5);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> e(1.0, 0.08);
  std::vector<double> ratios(200);
  for (auto& r : ratios) r = e(rng);
  f.bank.set_profile(testing::fixed_profile("cheap", ratios, {0.0}));
  f.bank.set_profile(testing::exact_profile("exact"));
  const auto truth = poisson_series(3.0, 1800, 7);
  const WindowObservations w{{"cheap", truth}, {"exact", truth}};
  const auto grid = frame_grid(1800, 100);
  const auto front = build_front(w, f.ctx, grid, 0);

  std::vector<FrontPoint> all;
  for (const auto& id : {"cheap", "exact"}) {
    for (int n : grid) all.push_back(action_outcome(w, {id, n}, f.ctx));
  }
  ASSERT_LE(all.size(), 200u);
  for (const auto& p : front.points) {
    for (const auto& q : all) {
      EXPECT_FALSE(q.energy <= p.energy && q.ci_width < p.ci_width)
          << p.action.counter_id << "/" << p.action.n_frames << " dominated by "
          << q.action.counter_id << "/" << q.action.n_frames;
    }
  }
  // Every evaluated action is matched or beaten by a front point.
  for (const auto& q : all) {
    bool covered = false;
    for (const auto& p : front.points) covered |= p.energy <= q.energy && p.ci_width <= q.ci_width;
    EXPECT_TRUE(covered);
  }
  for (std::size_t i = 1; i < front.points.size(); ++i) {
    EXPECT_GT(front.points[i].energy, front.points[i - 1].energy);
    EXPECT_LT(front.points[i].ci_width, front.points[i - 1].ci_width);
  }
  EXPECT_EQ(front.points.front().action.counter_id, "cheap");
  EXPECT_EQ(front.points.back().action.counter_id, "exact");
  // One switch: once the exact counter takes over it keeps the front.
  int switches = 0;
  for (std::size_t i = 1; i < front.points.size(); ++i) {
    switches += front.points[i].action.counter_id != front.points[i - 1].action.counter_id;
  }
  EXPECT_EQ(switches, 1);
}

TEST(BuildFront, BusyAndQuietWindowsDiffer) {
  Fixture f({{"c", 2.0, 1.0, 0.0, 0.0, 0.0}});
  f.bank.set_profile(testing::fixed_profile("c", {0.9, 1.1}, {-0.05, 0.05}));
  const WindowObservations busy{{"c", poisson_series(6.0, 1800, 8)}};
  const WindowObservations quiet{{"c", poisson_series(0.2, 1800, 9)}};
  const auto grid = frame_grid(1800, 50);
  const auto fb = build_front(busy, f.ctx, grid, 0);
  const auto fq = build_front(quiet, f.ctx, grid, 1);
  ASSERT_EQ(fb.points.front().energy, fq.points.front().energy);
  EXPECT_NE(fb.points.front().ci_width, fq.points.front().ci_width);
}

TEST(FrontGradient, Examples) {
  EnergyCIFront f;
  f.points = {{{"c", 30}, Energy::joules(100), 0.5}, {{"c", 60}, Energy::joules(200), 0.3}};
  EXPECT_NEAR(front_gradient(f, Energy::joules(100)), 0.002, 1e-15);
  EXPECT_NEAR(front_gradient(f, Energy::joules(150)), 0.002, 1e-15);
  EXPECT_EQ(front_gradient(f, Energy::joules(200)), 0.0);
  EXPECT_EQ(front_gradient(f, Energy::joules(1000)), 0.0);
  EXPECT_THROW(front_gradient(f, Energy::joules(99)), Error);
}

TEST(FrontGradient, PositiveUntilExhausted) {
  std::mt19937_64 rng(10);
  const auto f = testing::concave_front(0, 6, Energy::joules(90), Energy::joules(30), rng);
  for (std::size_t i = 0; i + 1 < f.points.size(); ++i) {
    EXPECT_GT(front_gradient(f, f.points[i].energy), 0.0);
  }
  EXPECT_EQ(front_gradient(f, f.points.back().energy), 0.0);
}

TEST(LowerEnvelope, DropsTiesAndDominated) {
  std::vector<FrontPoint> pts{{{"a", 30}, Energy::joules(10), 0.5},
                              {{"b", 30}, Energy::joules(10), 0.4},
                              {{"a", 40}, Energy::joules(20), 0.45},
                              {{"a", 50}, Energy::joules(30), 0.2}};
  const auto env = lower_envelope(pts);
  ASSERT_EQ(env.size(), 2u);
  EXPECT_EQ(env[0].action.counter_id, "b");
  EXPECT_EQ(env[1].action.n_frames, 50);
}

}  // namespace
}  // namespace ecount

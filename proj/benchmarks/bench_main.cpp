#include <benchmark/benchmark.h>

#include <random>

#include "ecount/ci.hpp"
#include "ecount/front.hpp"
#include "ecount/oracle.hpp"
#include "ecount/rl.hpp"
#include "helpers.hpp"

namespace {

using namespace ecount;

ErrorProfile bench_profile() {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> r(0.9, 0.1);
  std::vector<double> ratios(400);
  for (auto& x : ratios) x = r(rng);
  return testing::fixed_profile("c", ratios, {0.0, 0.1, -0.1}, 1.0);
}

void BM_ApproxCi(benchmark::State& state) {
  const auto prof = bench_profile();
  const SampleStats st{3.2, 1.4, 60};
  for (auto _ : state) benchmark::DoNotOptimize(approx_ci(st, prof, 0.95));
}
BENCHMARK(BM_ApproxCi);

void BM_MonteCarloCi(benchmark::State& state) {
  const auto prof = bench_profile();
  const SampleStats st{3.2, 1.4, 60};
  for (auto _ : state) benchmark::DoNotOptimize(monte_carlo_ci(st, prof, 0.95, state.range(0), 7, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MonteCarloCi)->Arg(10'000)->Arg(100'000)->Unit(benchmark::kMillisecond);

void BM_BuildFront(benchmark::State& state) {
  CounterBank bank({testing::noisy_model("tiny"), testing::golden_model()});
  auto p = bench_profile();
  bank.set_profile(ErrorProfile("tiny", 1.0, p.ratio_samples(), p.offset_samples()));
  bank.set_profile(testing::exact_profile("golden"));
  std::mt19937_64 rng(2);
  std::poisson_distribution<int> pois(3.0);
  WindowObservations obs;
  for (const char* id : {"tiny", "golden"}) {
    auto& v = obs[id];
    v.resize(1800);
    for (auto& x : v) x = pois(rng);
  }
  const FrontContext ctx{&bank, {1.0, 0.0, 0.0}, 0.95, SigmaMode::textbook, 0.0};
  const auto grid = frame_grid(1800);
  for (auto _ : state) benchmark::DoNotOptimize(build_front(obs, ctx, grid));
}
BENCHMARK(BM_BuildFront)->Unit(benchmark::kMicrosecond);

void BM_PlanHorizon(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::vector<EnergyCIFront> fronts;
  for (int w = 0; w < 48; ++w) {
    fronts.push_back(testing::concave_front(w, 170, Energy::joules(100), Energy::joules(34), rng));
  }
  const Energy budget = minimum_energy(fronts) + Energy::joules(48 * 34 * 40);
  for (auto _ : state) benchmark::DoNotOptimize(plan_horizon(fronts, budget));
}
BENCHMARK(BM_PlanHorizon)->Unit(benchmark::kMicrosecond);

void BM_MlpForward(benchmark::State& state) {
  const auto pair = AgentPair::create(Energy::joules(36000), {"tiny", "small", "golden"}, 1800, 10, 4);
  Observation obs{};
  for (std::size_t i = 0; i < obs.size(); ++i) obs[i] = 0.1 * static_cast<double>(i);
  for (auto _ : state) benchmark::DoNotOptimize(mlp_forward(pair, obs));
}
BENCHMARK(BM_MlpForward);

}  // namespace
BENCHMARK_MAIN();

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.
#include <fmt/core.h>
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ecount/ci.hpp"
#include "ecount/oracle.hpp"
#include "ecount/pipeline.hpp"
#include "helpers.hpp"

namespace ecount {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::map<int, std::pair<bool, std::string>> results;

void report(int id, bool ok, const std::string& detail, Clock::time_point start) {
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  auto line = fmt::format("criterion {:>2}: {} [{:.1f}s]", id, detail, secs);
  fmt::print(stderr, "{} {}\n", ok ? "pass" : "fail", line);
  results[id] = {ok, std::move(line)};
}

// Every simulated run, for the budget-safety sweep.
struct RunLog {
  std::string label;
  std::vector<HorizonRun> runs;
  bool rl = false;
};
std::vector<RunLog> all_runs;

std::vector<HorizonRun> record(std::string label, std::vector<HorizonRun> runs, bool rl = false) {
  all_runs.push_back({std::move(label), runs, rl});
  return runs;
}

// ---------------------------------------------------------------------------

void coverage_validity() {
  const auto start = Clock::now();
  auto cfg = load_scenario(ECOUNT_DEMO_CONFIG);
  cfg.pattern.base_rate = 2.5;
  cfg.pattern.diurnal_amplitude = 2.2;
  cfg.counters = {{"noisy", 2.4, 0.85, 0.1, 0.0, 0.0}, {"golden", 24.0, 1.0, 0.0, 0.0, 0.0}};
  cfg.train_horizons = 3;
  cfg.validation_horizons = 1;
  cfg.test_horizons = 42;  // 2016 windows
  cfg.budgets_wh_per_day = {10};
  cfg.validate();
  const auto trace = make_scene_trace(cfg);
  auto bank = make_bank(cfg);
  profile_bank(bank, trace, cfg);
  const Energy b = cfg.horizon_budget(10);

  const auto uni = record("uni/noisy coverage scene",
                          simulate_test({PlannerKind::uni, "noisy", nullptr}, trace, bank, cfg, b, 101));
  const auto oracle = record("oracle coverage scene",
                             simulate_test({PlannerKind::oracle, "", nullptr}, trace, bank, cfg, b, 102));
  const auto ru = score(uni), ro = score(oracle);
  const bool ok = ru.windows >= 2000 && ru.coverage >= 0.93 && ru.coverage <= 0.97;
  report(1, ok,
         fmt::format("noisy counter coverage {:.4f} over {} windows (want [0.93, 0.97]); "
                     "oracle mix {:.4f}",
                     ru.coverage, ru.windows, ro.coverage),
         start);
}

void approximation_fidelity() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0, 1);
  double worst = 0.0;
  int worst_case = -1;
  for (int c = 0; c < 200; ++c) {
    const int n = std::array{30, 60, 120}[static_cast<std::size_t>(c % 3)];
    const bool ratio_case = c % 2 == 0;
    std::vector<double> ratios, offsets;
    std::normal_distribution<double> r(0.8 + 0.4 * u(rng), 0.02 + 0.15 * u(rng));
    std::normal_distribution<double> o(-0.2 + 0.4 * u(rng), 0.02 + 0.3 * u(rng));
    for (int i = 0; i < 500; ++i) {
      ratios.push_back(std::max(0.05, r(rng)));
      offsets.push_back(o(rng));
    }
    const auto prof = testing::fixed_profile("c", ratios, offsets, 1.0);
    const SampleStats st = ratio_case ? SampleStats{1.2 + 6 * u(rng), 0.5 + 2.5 * u(rng), n}
                                      : SampleStats{0.1 + 0.8 * u(rng), 0.2 + 0.8 * u(rng), n};
    const double a = approx_ci(st, prof, 0.95, SigmaMode::textbook).half_width;
    const double m = monte_carlo_ci(st, prof, 0.95, 1'000'000, static_cast<std::uint64_t>(c)).half_width;
    const double rel = std::abs(a - m) / m;
    if (rel > worst) worst = rel, worst_case = c;
  }
  report(2, worst <= 0.05,
         fmt::format("max relative gap approx vs MC {:.4f} (case {}) over 200 cases (want <= 0.05)",
                     worst, worst_case),
         start);
}

void sigma_modes() {
  const auto start = Clock::now();
  bool ok = true;
  std::string detail;
  for (int n : {30, 60, 120}) {
    const double s = 1.7;
    const double t = sigma_mu_x(s, n, SigmaMode::textbook);
    const double p = sigma_mu_x(s, n, SigmaMode::published);
    const double factor = std::sqrt((n - 1.0) / (n - 3.0));
    ok &= std::abs(p / t - factor) <= 1e-12;

    // Independent Monte Carlo of S/sqrt(n) * T(n-1).
    std::mt19937_64 gen(static_cast<std::uint64_t>(n));
    std::student_t_distribution<double> td(n - 1.0);
    const int draws = 2'000'000;
    double sum = 0, sq = 0;
    for (int i = 0; i < draws; ++i) {
      const double x = s / std::sqrt(double(n)) * td(gen);
      sum += x;
      sq += x * x;
    }
    const double mean = sum / draws;
    const double mc = std::sqrt(sq / draws - mean * mean);
    const double rel = std::abs(mc - t) / t;
    ok &= rel <= 0.005;
    detail += fmt::format("n={} ratio {:.4f} MC gap {:.4f}; ", n, p / t, rel);
  }
  ok &= std::abs(sigma_mu_x(1, 30, SigmaMode::published) / sigma_mu_x(1, 30) - 1.0364) < 5e-5;
  report(3, ok, detail + "(want factor sqrt((n-1)/(n-3)), MC <= 0.005)", start);
}

void oracle_optimality() {
  const auto start = Clock::now();
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> windows(1, 4), points(2, 6);
  int mismatches = 0;
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Energy step = Energy::joules(1 + rng() % 5);
    std::vector<EnergyCIFront> fronts;
    const int k = windows(rng);
    for (int w = 0; w < k; ++w) {
      fronts.push_back(testing::concave_front(w, points(rng), Energy::joules(10 + rng() % 7), step, rng));
    }
    Energy lo = minimum_energy(fronts), hi;
    for (const auto& f : fronts) hi += f.points.back().energy;
    std::uniform_int_distribution<std::int64_t> pick(lo.microjoules(), hi.microjoules());
    const Energy budget = Energy::microjoules(pick(rng));
    const auto plan = plan_horizon(fronts, budget);
    const double got = plan_quality(plan, fronts);
    const double want = testing::brute_force_best(fronts, budget);
    if (got != want) ++mismatches;
    worst = std::max(worst, std::abs(got - want));
  }
  report(4, mismatches == 0,
         fmt::format("{} of 50 instances differ from brute force (max gap {:.3g})", mismatches, worst),
         start);
}

// Criteria 6 and 7 share one demo-scene training run at the tightest budget.
void demo_scene() {
  auto start = Clock::now();
  const auto cfg = load_scenario(ECOUNT_DEMO_CONFIG);
  const auto trace = make_scene_trace(cfg);
  auto bank = make_bank(cfg);
  profile_bank(bank, trace, cfg);
  const double wh = *std::min_element(cfg.budgets_wh_per_day.begin(), cfg.budgets_wh_per_day.end());
  const Energy b = cfg.horizon_budget(wh);

  const auto trained = train_agents(trace, bank, cfg, b, 7);
  const auto uni_id = pick_uni_counter(trace, bank, cfg, b, 7);
  const auto oracle = record("oracle demo", simulate_test({PlannerKind::oracle, "", nullptr}, trace, bank, cfg, b, 3));
  const auto rl = record("rl demo", simulate_test({PlannerKind::rl, "", &trained.agents}, trace, bank, cfg, b, 3), true);
  const auto uni = record("uni demo", simulate_test({PlannerKind::uni, uni_id, nullptr}, trace, bank, cfg, b, 3));
  const auto golden = record("golden demo",
                             simulate_test({PlannerKind::golden, cfg.golden_counter, nullptr}, trace, bank, cfg, b, 3));
  const double wo = score(oracle).mean_ci_width, wr = score(rl).mean_ci_width;
  const double wu = score(uni).mean_ci_width, wg = score(golden).mean_ci_width;
  const double gain = 1.0 - wo / wg;
  const bool ordered = wo <= wr && wr <= wu && wu <= wg;
  report(6, gain >= 0.30 && ordered,
         fmt::format("at {:g} Wh/day widths oracle {:.4f} rl {:.4f} uni({}) {:.4f} golden {:.4f}; "
                     "oracle narrower than golden by {:.1f}% (want >= 30% and ordered)",
                     wh, wo, wr, uni_id, wu, wg, 100 * gain),
         start);

  const auto imit = evaluate_imitation(rl, trace, bank, cfg, b);
  const double gap = std::abs(wr - wo) / wo;
  report(7, imit.frame_deviation_ratio() <= 0.20 && imit.counter_match_rate >= 0.6 && gap <= 0.15,
         fmt::format("frame deviation {:.1f}% of {:.0f} oracle frames, counter match {:.3f}, "
                     "RL width {:.1f}% from oracle over {} windows (want <= 20%, >= 0.6, <= 15%)",
                     100 * imit.frame_deviation_ratio(), imit.mean_oracle_frames,
                     imit.counter_match_rate, 100 * gap, imit.windows),
         start);

  // Gradient check on a real replayed minibatch from the same scene.
  start = Clock::now();
  const auto plans = training_plans(trace, bank, cfg, b);
  const auto data = make_replay_dataset(trace, bank, cfg, b, plans, trained.agents.scale, 11);
  auto pair = AgentPair::create(b, trained.agents.counter_ids, trained.agents.window_frames,
                                cfg.grid_step, 13);
  pair.scale = trained.agents.scale;
  auto batch = rollout(pair, data.episode(0), cfg.training, bank, cfg.energy, 5, 0);
  batch.resize(16);
  compute_advantages(pair, batch, cfg.training.gamma);
  const double err = testing::a2c_gradient_error(pair, batch, cfg.training);
  const std::size_t largest = std::max({pair.regression.actor.param_count(), pair.regression.critic.param_count(),
                                        pair.classification.actor.param_count(),
                                        pair.classification.critic.param_count()});
  report(8, err <= 1e-4 && largest < 5500,
         fmt::format("max relative FD error {:.2e} over every parameter, largest network {} params "
                     "(want <= 1e-4, < 5500)",
                     err, largest),
         start);
}

void budget_safety() {
  const auto start = Clock::now();
  std::size_t runs = 0, violations = 0, rl_runs = 0;
  double rl_unused = 0.0;
  for (const auto& log : all_runs) {
    for (const auto& r : log.runs) {
      ++runs;
      Energy sum;
      for (const auto& w : r.windows) sum += w.energy;
      if (r.spent > r.budget || sum != r.spent) ++violations;
      if (log.rl) {
        ++rl_runs;
        rl_unused += r.unused().joules();
      }
    }
  }
  report(5, violations == 0 && rl_runs > 0,
         fmt::format("{} violations over {} horizon runs; {} RL runs returned {:.1f} J unused in total",
                     violations, runs, rl_runs, rl_unused),
         start);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool cli(const std::string& args, const fs::path& logs) {
  const std::string cmd = std::string(ECOUNT_CLI_PATH) + " " + args + " >" + (logs / "out.txt").string() +
                          " 2>" + (logs / "err.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) && WEXITSTATUS(status) == 0;
}

void deterministic_replay() {
  const auto start = Clock::now();
  const auto root = fs::temp_directory_path() / "ecount_acceptance_replay";
  fs::remove_all(root);
  fs::create_directories(root);
  auto cfg = load_scenario(ECOUNT_DEMO_CONFIG);
  cfg.spec.tau_seconds = 600;
  cfg.spec.horizon_windows = 24;
  cfg.pattern.period_windows = 24;
  cfg.test_horizons = 2;
  cfg.budgets_wh_per_day = {30, 60};
  cfg.training.episodes = 30;
  const auto cfg_path = root / "config.json";
  std::ofstream(cfg_path) << scenario_to_json(cfg);

  bool all_ok = true;
  auto run_all = [&](const fs::path& out) {
    const auto logs = out / "logs";
    fs::create_directories(logs);
    const auto c = " --config " + cfg_path.string();
    const auto trace = (out / "trace.csv").string(), prof = (out / "profiles").string();
    all_ok &= cli("synth" + c + " --out " + trace, logs);
    all_ok &= cli("profile" + c + " --trace " + trace + " --out-dir " + prof, logs);
    all_ok &= cli("fronts" + c + " --trace " + trace + " --profiles " + prof + " --horizon 0 --out-dir " +
                      (out / "fronts").string(), logs);
    all_ok &= cli("plan" + c + " --trace " + trace + " --profiles " + prof + " --out-dir " +
                      (out / "plans").string(), logs);
    all_ok &= cli("train" + c + " --trace " + trace + " --profiles " + prof + " --seed 5 --out-dir " +
                      (out / "agents").string(), logs);
    for (const char* p : {"oracle", "rl", "uni", "golden"}) {
      all_ok &= cli("simulate" + c + " --trace " + trace + " --profiles " + prof + " --planner " + p +
                        " --agents " + (out / "agents").string() + " --seed 9 --out-dir " +
                        (out / "results").string(), logs);
    }
    all_ok &= cli("report --results " + (out / "results").string() + " --out " + (out / "report.csv").string(),
                  logs);
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(out)) {
      if (e.is_regular_file() && e.path().parent_path() != logs) {
        files[fs::relative(e.path(), out).string()] = slurp(e.path());
      }
    }
    return files;
  };
  const auto a = run_all(root / "a");
  const auto b = run_all(root / "b");
  std::size_t differing = 0;
  for (const auto& [name, content] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != content) ++differing;
  }
  const bool ok = all_ok && a.size() == b.size() && differing == 0 && a.size() > 20;
  report(9, ok,
         fmt::format("{} files per run, {} differ, commands {}", a.size(), differing,
                     all_ok ? "all exited 0" : "had failures"),
         start);
}

void worked_examples() {
  const auto start = Clock::now();
  ConfidenceInterval ci;
  ci.center = 0.5;
  ci.half_width = 0.1;
  const auto s = mean_to_sum(ci, 1800);
  const double z95 = z_score(0.95), z99 = z_score(0.99);
  const bool ok = s.center == 900.0 && s.half_width == 180.0 && std::abs(z95 - 1.96) <= 1e-3 &&
                  std::abs(z99 - 2.576) <= 1e-3;
  report(10, ok,
         fmt::format("[{:g} +- {:g}], z(0.95) {:.4f}, z(0.99) {:.4f}", s.center, s.half_width, z95, z99),
         start);
}

}  // namespace
}  // namespace ecount

int main() {
  using namespace ecount;
  try {
    worked_examples();
    sigma_modes();
    oracle_optimality();
    coverage_validity();
    approximation_fidelity();
    demo_scene();
    budget_safety();
    deterministic_replay();
  } catch (const std::exception& e) {
    fmt::print(stderr, "aborted: {}\n", e.what());
  }
  int failed = 0;
  for (int id = 1; id <= 10; ++id) {
    const auto it = results.find(id);
    const bool ok = it != results.end() && it->second.first;
    failed += !ok;
    fmt::print("{} {}\n", ok ? "PASS" : "FAIL",
               it != results.end() ? it->second.second : fmt::format("criterion {:>2}: not reached", id));
  }
  return failed == 0 ? 0 : 1;
}

#include <gtest/gtest.h>

#include <fstream>
#include <json.hpp>

#include "ecount/error.hpp"
#include "ecount/pipeline.hpp"
#include "helpers.hpp"

namespace ecount {
namespace {

ScenarioConfig small_scenario() {
  auto cfg = load_scenario(ECOUNT_DEMO_CONFIG);
  cfg.spec.tau_seconds = 600;
  cfg.spec.horizon_windows = 24;
  cfg.pattern.period_windows = 24;
  cfg.test_horizons = 3;
  // A third of a day per horizon: 30 Wh/day still buys golden its 30 frames.
  cfg.budgets_wh_per_day = {30, 45, 60};
  cfg.training.episodes = 150;
  return cfg;
}

TEST(Scenario, DemoConfigParses) {
  const auto cfg = load_scenario(ECOUNT_DEMO_CONFIG);
  EXPECT_EQ(cfg.counters.size(), 3u);
  EXPECT_EQ(cfg.golden_counter, "golden");
  EXPECT_EQ(cfg.spec.window_frames(cfg.fps), 1800);
  EXPECT_EQ(cfg.total_horizons(), 14);
  EXPECT_EQ(cfg.first_test_horizon(), 4);
  EXPECT_EQ(cfg.horizon_budget(10), Energy::joules(36000));
}

TEST(Scenario, JsonRoundTrip) {
  const auto cfg = load_scenario(ECOUNT_DEMO_CONFIG);
  const auto again = parse_scenario(scenario_to_json(cfg));
  EXPECT_EQ(scenario_to_json(again), scenario_to_json(cfg));
  EXPECT_EQ(again.training.learning_rate, cfg.training.learning_rate);
  EXPECT_EQ(again.counters[1].counter_id, "small");
}

TEST(Scenario, HorizonBudgetProRates) {
  auto cfg = small_scenario();
  // 24 windows of 10 minutes: a third of a day.
  EXPECT_EQ(cfg.horizon_budget(9), Energy::joules(9 * 3600.0 / 6.0));
}

TEST(Scenario, InvalidInputsRejected) {
  auto j = nlohmann::json::parse(scenario_to_json(load_scenario(ECOUNT_DEMO_CONFIG)));
  auto bad = j;
  bad["split"]["train"] = 2;
  EXPECT_THROW(parse_scenario(bad.dump()), Error);
  bad = j;
  bad["golden_counter"] = "nope";
  EXPECT_THROW(parse_scenario(bad.dump()), Error);
  bad = j;
  bad["window"]["tau_seconds"] = 0.5;
  EXPECT_THROW(parse_scenario(bad.dump()), Error);
  bad = j;
  bad["sigma_mode"] = "fancy";
  EXPECT_THROW(parse_scenario(bad.dump()), Error);
  bad = j;
  bad["budgets_wh_per_day"] = {10, -1};
  EXPECT_THROW(parse_scenario(bad.dump()), Error);
  EXPECT_ANY_THROW(parse_scenario("{not json"));
  EXPECT_THROW(load_scenario("/nonexistent/config.json"), Error);
}

TEST(Profiling, GoldenIsDegenerateAndDeterministic) {
  const auto cfg = small_scenario();
  const auto trace = make_scene_trace(cfg);
  auto bank = make_bank(cfg);
  profile_bank(bank, trace, cfg);
  const auto& g = bank.profile("golden");
  EXPECT_DOUBLE_EQ(g.ratio().mean, 1.0);
  EXPECT_DOUBLE_EQ(g.ratio().std, 0.0);
  if (g.offset_usable()) {
    EXPECT_DOUBLE_EQ(g.offset().mean, 0.0);
    EXPECT_DOUBLE_EQ(g.offset().std, 0.0);
  }
  auto bank2 = make_bank(cfg);
  profile_bank(bank2, trace, cfg);
  EXPECT_EQ(bank2.profile("tiny").ratio_samples(), bank.profile("tiny").ratio_samples());
  EXPECT_EQ(bank.profile("tiny").ratio_samples().size() + bank.profile("tiny").offset_samples().size() +
                bank.profile("tiny").dropped_zero_observed(),
            static_cast<std::size_t>(cfg.train_horizons * cfg.spec.horizon_windows));
}

class PipelineTest : public ::testing::Test {
 protected:
  static inline ScenarioConfig cfg;
  static inline CountTrace trace;
  static inline std::unique_ptr<CounterBank> bank;

  static void SetUpTestSuite() {
    cfg = small_scenario();
    trace = make_scene_trace(cfg);
    bank = std::make_unique<CounterBank>(make_bank(cfg));
    profile_bank(*bank, trace, cfg);
  }
  static void TearDownTestSuite() { bank.reset(); }
};

TEST_F(PipelineTest, TrainingPlansRespectBudget) {
  const Energy b = cfg.horizon_budget(30);
  const auto plans = training_plans(trace, *bank, cfg, b);
  ASSERT_EQ(plans.size(), 3u);
  for (const auto& p : plans) {
    EXPECT_LE(p.spent, b);
    EXPECT_EQ(p.windows.size(), static_cast<std::size_t>(cfg.spec.horizon_windows));
  }
}

TEST_F(PipelineTest, ReplayEpisodesCarryLabels) {
  const Energy b = cfg.horizon_budget(45);
  const auto plans = training_plans(trace, *bank, cfg, b);
  const auto data = make_replay_dataset(trace, *bank, cfg, b, plans, {}, 7);
  EXPECT_EQ(data.horizons, 3);
  const auto e1 = data.episode(1);
  const auto e1b = data.episode(1);
  const auto e4 = data.episode(4);
  ASSERT_EQ(e1.size(), static_cast<std::size_t>(cfg.spec.horizon_windows));
  for (std::size_t t = 0; t < e1.size(); ++t) {
    EXPECT_EQ(e1[t].oracle_frames, plans[1].windows[t].action.n_frames);
    EXPECT_EQ(e1[t].obs, e1b[t].obs);
    EXPECT_GE(e1[t].oracle_counter, 0);
    EXPECT_EQ(e1[t].oracle_frames, e4[t].oracle_frames);
  }
}

TEST_F(PipelineTest, TrainingIsSeedDeterministic) {
  const Energy b = cfg.horizon_budget(45);
  auto small = cfg;
  small.training.episodes = 10;
  const auto a = train_agents(trace, *bank, small, b, 3);
  const auto c = train_agents(trace, *bank, small, b, 3);
  EXPECT_EQ(a.log.size(), 10u);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].mean_reward_reg, c.log[i].mean_reward_reg);
  }
  EXPECT_TRUE(std::equal(a.agents.classification.actor.params().begin(),
                         a.agents.classification.actor.params().end(),
                         c.agents.classification.actor.params().begin()));
}

TEST_F(PipelineTest, ComparisonTableShape) {
  const auto rows = compare_baselines(trace, *bank, cfg, {}, 11);
  ASSERT_EQ(rows.size(), 3u * cfg.budgets_wh_per_day.size());
  std::map<std::string, double> last;
  for (const auto& row : rows) {
    EXPECT_NE(row.planner, "rl");
    EXPECT_EQ(row.report.windows,
              static_cast<std::size_t>(cfg.test_horizons * cfg.spec.horizon_windows));
    EXPECT_LE(row.report.energy_utilization, 1.0);
    // Width is non-increasing as the budget grows (small slack for sampling noise).
    if (last.contains(row.planner)) EXPECT_LE(row.report.mean_ci_width, last[row.planner] * 1.02);
    last[row.planner] = row.report.mean_ci_width;
  }
  for (std::size_t i = 0; i < rows.size(); i += 3) {
    EXPECT_EQ(rows[i].planner, "oracle");
    for (std::size_t k = 1; k < 3; ++k) {
      EXPECT_LE(rows[i].report.mean_ci_width, rows[i + k].report.mean_ci_width * 1.02);
    }
  }
  const auto dir = testing::scratch_dir("comparison");
  write_comparison_csv(rows, dir / "c.csv");
  std::ifstream in(dir / "c.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "budget_wh,planner,counter,windows,coverage,mean_ci_width,mean_error,energy_utilization");
}

TEST_F(PipelineTest, UniCounterIsFeasibleAndBest) {
  const Energy b = cfg.horizon_budget(30);
  const auto id = pick_uni_counter(trace, *bank, cfg, b, 3);
  const int wf = cfg.spec.window_frames(cfg.fps);
  const auto ctx = make_context(cfg, *bank);
  EXPECT_GE(fixed_share_frames(bank->model(id), b, ctx, wf), kMinFrames);
}

TEST_F(PipelineTest, ImitationReportAgainstOracleIsPerfect) {
  // Feeding oracle runs back in gives zero deviation and full agreement.
  const Energy b = cfg.horizon_budget(45);
  const auto runs = simulate_test({PlannerKind::oracle, "", nullptr}, trace, *bank, cfg, b, 5);
  const auto rep = evaluate_imitation(runs, trace, *bank, cfg, b);
  EXPECT_EQ(rep.windows, static_cast<std::size_t>(cfg.test_horizons * cfg.spec.horizon_windows));
  EXPECT_EQ(rep.mean_abs_frame_deviation, 0.0);
  EXPECT_EQ(rep.counter_match_rate, 1.0);
  EXPECT_GT(rep.mean_oracle_frames, 30.0);
}

}  // namespace
}  // namespace ecount

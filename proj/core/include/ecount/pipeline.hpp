#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecount/counter.hpp"
#include "ecount/rl.hpp"
#include "ecount/sim.hpp"
#include "ecount/trace.hpp"

namespace ecount {

/// Scene, counters, energy and split layout for a whole experiment.
///
/// The trace is laid out as consecutive horizons: training first, then one
/// validation horizon, then the held-out test horizons.
struct ScenarioConfig {
  std::string scene_id = "synthetic";
  DiurnalPattern pattern;
  int fps = 1;
  WindowSpec spec;

  std::vector<CounterModel> counters;
  std::string golden_counter;
  EnergyModel energy;

  double theta = kDefaultTheta;
  SigmaMode mode = SigmaMode::textbook;
  int grid_step = 10;
  std::size_t profile_min_pairs = 30;

  int train_horizons = 3;
  int validation_horizons = 1;
  int test_horizons = 10;

  std::vector<double> budgets_wh_per_day;

  std::uint64_t scene_seed = 1;
  std::uint64_t counter_seed = 2;
  TrainingConfig training;

  void validate() const;
  int total_horizons() const { return train_horizons + validation_horizons + test_horizons; }
  int first_validation_horizon() const { return train_horizons; }
  int first_test_horizon() const { return train_horizons + validation_horizons; }
  /// Joules per horizon for a budget in Wh/day (3600 J/Wh, pro-rated when a
  /// horizon is not exactly one day).
  Energy horizon_budget(double wh_per_day) const;
};

ScenarioConfig parse_scenario(std::string_view json_text);
ScenarioConfig load_scenario(const std::filesystem::path& path);
std::string scenario_to_json(const ScenarioConfig& cfg);

CountTrace make_scene_trace(const ScenarioConfig& cfg);
CounterBank make_bank(const ScenarioConfig& cfg);
SimContext make_context(const ScenarioConfig& cfg, const CounterBank& bank);

/// (exact window mean, counter's full-window mean) for every window of the
/// given horizons.
std::vector<MeanPair> profiling_pairs(const CountTrace& trace, const CounterModel& model,
                                      const ScenarioConfig& cfg, int first_horizon,
                                      int n_horizons);

/// Profiles every counter on the training horizons and installs the profiles.
void profile_bank(CounterBank& bank, const CountTrace& trace, const ScenarioConfig& cfg);

/// Oracle plans for each training horizon at one budget level.
std::vector<HorizonPlan> training_plans(const CountTrace& trace, const CounterBank& bank,
                                        const ScenarioConfig& cfg, Energy budget);

/// Replays the training horizons under their oracle plans. Episode i revisits
/// horizon i % train_horizons with a sampling phase keyed by (seed, i); the
/// preceding training horizon is replayed first so observations see a full
/// day of history.
ReplayDataset make_replay_dataset(const CountTrace& trace, const CounterBank& bank,
                                  const ScenarioConfig& cfg, Energy budget,
                                  std::vector<HorizonPlan> plans, const ObservationScale& scale,
                                  std::uint64_t seed);

struct TrainedAgents {
  AgentPair agents;
  std::vector<EpisodeLog> log;
};

TrainedAgents train_agents(const CountTrace& trace, const CounterBank& bank,
                           const ScenarioConfig& cfg, Energy budget, std::uint64_t seed);

/// The single counter with the smallest mean CI width on the validation
/// horizon(s), among counters whose even budget share buys at least 30 frames.
std::string pick_uni_counter(const CountTrace& trace, const CounterBank& bank,
                             const ScenarioConfig& cfg, Energy budget, std::uint64_t seed);

/// Runs a planner over the validation and test horizons in order so the
/// history carries across horizons, and returns only the test runs.
std::vector<HorizonRun> simulate_test(const Planner& planner, const CountTrace& trace,
                                      const CounterBank& bank, const ScenarioConfig& cfg,
                                      Energy budget, std::uint64_t seed);

struct ComparisonRow {
  double budget_wh = 0.0;
  std::string planner;  ///< oracle, rl, golden, uni
  std::string counter;  ///< fixed counter for golden / uni, empty otherwise
  MetricsReport report;
};

/// One row per budget and planner. `agents` holds one pair per budget level in
/// the same order as the config's budgets; pass an empty span to skip the RL rows.
std::vector<ComparisonRow> compare_baselines(const CountTrace& trace, const CounterBank& bank,
                                             const ScenarioConfig& cfg,
                                             std::span<const AgentPair> agents,
                                             std::uint64_t seed);

/// CSV `budget_wh,planner,counter,windows,coverage,mean_ci_width,mean_error,energy_utilization`.
void write_comparison_csv(std::span<const ComparisonRow> rows, const std::filesystem::path& path);

struct ImitationReport {
  std::size_t windows = 0;
  double mean_oracle_frames = 0.0;
  double mean_abs_frame_deviation = 0.0;
  double counter_match_rate = 0.0;
  double frame_deviation_ratio() const {
    return mean_oracle_frames > 0.0 ? mean_abs_frame_deviation / mean_oracle_frames : 0.0;
  }
};

/// Window-by-window comparison of RL actions against the oracle plan of the
/// same test horizon.
ImitationReport evaluate_imitation(std::span<const HorizonRun> rl_runs, const CountTrace& trace,
                                   const CounterBank& bank, const ScenarioConfig& cfg,
                                   Energy budget);

/// Reads a results CSV back into horizon runs; budgets must be supplied since
/// the file only records spending.
std::vector<HorizonRun> read_results_csv(const std::filesystem::path& path, Energy budget);

}  // namespace ecount

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ecount/ci.hpp"
#include "ecount/counter.hpp"
#include "ecount/energy.hpp"
#include "ecount/front.hpp"
#include "ecount/oracle.hpp"
#include "ecount/rl.hpp"
#include "ecount/trace.hpp"

namespace ecount {

enum class PlannerKind {
  oracle,  ///< offline allocation over the horizon's true fronts
  rl,      ///< trained agents with the energy backstop
  golden,  ///< golden counter, equal frames in every window
  uni,     ///< one fixed counter, equal frames in every window
};

std::string_view to_string(PlannerKind k);
PlannerKind planner_from_string(std::string_view s);

struct Planner {
  PlannerKind kind = PlannerKind::oracle;
  std::string counter_id;            ///< golden / uni
  const AgentPair* agents = nullptr;  ///< rl
};

/// Everything a horizon run needs besides the planner, the truth and the budget.
struct SimContext {
  const CounterBank* bank = nullptr;
  EnergyModel energy;
  WindowSpec spec;
  SigmaMode mode = SigmaMode::textbook;
  int grid_step = 10;
  std::uint64_t counter_seed = 0;  ///< keys counter noise per absolute frame

  FrontContext front_context() const { return {bank, energy, spec.alpha, mode}; }
};

struct WindowResult {
  int horizon = 0;
  int window_index = 0;
  CountAction action;
  ConfidenceInterval ci_sum;  ///< window-total scale
  std::int64_t true_sum = 0;
  Energy energy;
};

struct HorizonRun {
  int horizon = 0;
  Energy budget;
  Energy spent;
  std::vector<WindowResult> windows;

  Energy unused() const { return budget - spent; }
};

/// Full-window observations of every counter for window `w` of a horizon.
WindowObservations window_observations(const CountTrace& horizon, int w, const SimContext& ctx);

/// One front per window, built from full-window observations. Widths are
/// normalized by the horizon's mean true window sum.
std::vector<EnergyCIFront> horizon_fronts(const CountTrace& horizon, const SimContext& ctx);

/// Frames per window for the golden / uni planners: the budget split evenly
/// across windows at the counter's cost, floored to the grid. Throws when
/// the share buys fewer than 30 frames.
int fixed_share_frames(const CounterModel& counter, Energy budget, const SimContext& ctx,
                       int window_frames);

/// Executes one horizon window by window: choose the action, sample frames
/// uniformly in time with a seeded phase, observe them through the counter,
/// and materialize the window-total interval. `history` is the stream of
/// emitted summaries before this horizon and is extended in place.
HorizonRun run_horizon(const Planner& planner, const CountTrace& horizon, const SimContext& ctx,
                       Energy budget, std::uint64_t run_seed, int horizon_index,
                       std::vector<WindowSummary>& history);

/// Runs a fixed list of actions (e.g. an oracle plan) through the same
/// sampling path as run_horizon.
HorizonRun execute_actions(std::span<const CountAction> actions, const CountTrace& horizon,
                           const SimContext& ctx, Energy budget, std::uint64_t run_seed,
                           int horizon_index, std::vector<WindowSummary>& history);

struct HorizonMetrics {
  int horizon = 0;
  double coverage = 0.0;
  double mean_ci_width = 0.0;
  double mean_error = 0.0;
  double budget_j = 0.0;
  double spent_j = 0.0;
  double utilization = 0.0;
};

struct MetricsReport {
  std::size_t windows = 0;
  double coverage = 0.0;
  double mean_ci_width = 0.0;  ///< sum of half-widths / sum of centers
  double mean_error = 0.0;     ///< sum |center - truth| / sum truth
  bool mean_ci_width_defined = true;
  bool mean_error_defined = true;
  double energy_utilization = 0.0;  ///< total spent / total budget
  std::vector<HorizonMetrics> horizons;
};

MetricsReport score(std::span<const HorizonRun> runs);

/// CSV `horizon,window,counter_id,n_frames,energy_j,center,half_width,true_sum`.
void write_results_csv(std::span<const HorizonRun> runs, const std::filesystem::path& path);

}  // namespace ecount

#include "ecount/sim.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <algorithm>
#include <cmath>

#include "ecount/error.hpp"
#include "ecount/rng.hpp"

namespace ecount {

std::string_view to_string(PlannerKind k) {
  switch (k) {
    case PlannerKind::oracle: return "oracle";
    case PlannerKind::rl: return "rl";
    case PlannerKind::golden: return "golden";
    case PlannerKind::uni: return "uni";
  }
  return "?";
}

PlannerKind planner_from_string(std::string_view s) {
  if (s == "oracle") return PlannerKind::oracle;
  if (s == "rl") return PlannerKind::rl;
  if (s == "golden") return PlannerKind::golden;
  if (s == "uni") return PlannerKind::uni;
  throw Error("unknown planner '" + std::string(s) + "' (expected oracle|rl|golden|uni)");
}

WindowObservations window_observations(const CountTrace& horizon, int w, const SimContext& ctx) {
  const auto truth = horizon.window(ctx.spec, w);
  const std::int64_t first = horizon.first_frame() + static_cast<std::int64_t>(w) *
                                                         static_cast<std::int64_t>(truth.size());
  WindowObservations obs;
  for (const auto& m : ctx.bank->models()) {
    auto& series = obs[m.counter_id];
    series.resize(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      series[i] = observe_frame(m, truth[i], first + static_cast<std::int64_t>(i), ctx.counter_seed);
    }
  }
  return obs;
}

std::vector<EnergyCIFront> horizon_fronts(const CountTrace& horizon, const SimContext& ctx) {
  const int wf = ctx.spec.window_frames(horizon.fps);
  const auto grid = frame_grid(wf, ctx.grid_step);
  auto fctx = ctx.front_context();
  const int n = horizon.num_windows(ctx.spec);
  // The planner knows the horizon's true counts; one normalizer for all
  // windows keeps the mean of per-window widths proportional to sum(hw) / sum(truth).
  double total = 0.0;
  for (int c : horizon.counts) total += c;
  fctx.width_scale = std::max(total / n, 1.0);
  std::vector<EnergyCIFront> fronts;
  fronts.reserve(static_cast<std::size_t>(n));
  for (int w = 0; w < n; ++w) {
    fronts.push_back(build_front(window_observations(horizon, w, ctx), fctx, grid, w));
  }
  return fronts;
}

int fixed_share_frames(const CounterModel& counter, Energy budget, const SimContext& ctx,
                       int window_frames) {
  const Energy share = Energy::microjoules(budget.microjoules() / ctx.spec.horizon_windows);
  const int n = largest_affordable(counter, share, ctx.energy, window_frames, ctx.grid_step);
  if (n < kMinFrames) {
    throw Error(fmt::format("budget infeasible for counter '{}': an even share of {:.3f} J per "
                            "window buys fewer than {} frames",
                            counter.counter_id, share.joules(), kMinFrames));
  }
  return n;
}

namespace {

struct Executed {
  WindowResult result;
  WindowSummary summary;
};

Executed execute_window(const CountAction& action, const CountTrace& horizon, int w,
                        const SimContext& ctx, std::uint64_t run_seed, int horizon_index) {
  const auto truth = horizon.window(ctx.spec, w);
  const auto& counter = ctx.bank->model(action.counter_id);
  const std::int64_t first = horizon.first_frame() + static_cast<std::int64_t>(w) *
                                                         static_cast<std::int64_t>(truth.size());
  KeyedRng phase_rng(run_seed, static_cast<std::uint64_t>(horizon_index),
                     static_cast<std::uint64_t>(w));
  const auto offsets = uniform_offsets(truth.size(), action.n_frames, phase_rng.uniform());
  const auto observed = observe_frames(counter, truth, first, offsets, ctx.counter_seed);
  const auto stats = sample_stats(observed);
  const auto ci = approx_ci(stats, ctx.bank->profile(action.counter_id), ctx.spec.alpha, ctx.mode);

  Executed ex;
  ex.result.horizon = horizon_index;
  ex.result.window_index = w;
  ex.result.action = action;
  ex.result.ci_sum = mean_to_sum(ci, static_cast<int>(truth.size()));
  for (int g : truth) ex.result.true_sum += g;
  ex.result.energy = ctx.energy.action_cost(counter, action.n_frames);
  ex.summary = {ci.center, stats.s};
  return ex;
}

void check_context(const SimContext& ctx) {
  if (ctx.bank == nullptr) throw Error("simulation context has no counter bank");
  ctx.spec.validate();
  ctx.energy.validate();
}

}  // namespace

HorizonRun execute_actions(std::span<const CountAction> actions, const CountTrace& horizon,
                           const SimContext& ctx, Energy budget, std::uint64_t run_seed,
                           int horizon_index, std::vector<WindowSummary>& history) {
  check_context(ctx);
  const int n = horizon.num_windows(ctx.spec);
  if (static_cast<int>(actions.size()) != n) throw Error("one action per window required");
  EnergyLedger ledger(budget);
  HorizonRun run;
  run.horizon = horizon_index;
  run.budget = budget;
  for (int w = 0; w < n; ++w) {
    auto ex = execute_window(actions[static_cast<std::size_t>(w)], horizon, w, ctx, run_seed,
                             horizon_index);
    ledger.spend(ex.result.energy);
    run.windows.push_back(std::move(ex.result));
    history.push_back(ex.summary);
  }
  run.spent = ledger.spent();
  return run;
}

HorizonRun run_horizon(const Planner& planner, const CountTrace& horizon, const SimContext& ctx,
                       Energy budget, std::uint64_t run_seed, int horizon_index,
                       std::vector<WindowSummary>& history) {
  check_context(ctx);
  const int n = horizon.num_windows(ctx.spec);
  if (n != ctx.spec.horizon_windows) throw Error("trace slice is not exactly one horizon");
  const Energy floor = bare_minimum(n, *ctx.bank, ctx.energy);
  if (budget < floor) {
    throw Error(fmt::format("budget below bare minimum: need {:.3f} J, short by {:.3f} J",
                            floor.joules(), (floor - budget).joules()));
  }
  const int wf = ctx.spec.window_frames(horizon.fps);

  switch (planner.kind) {
    case PlannerKind::oracle: {
      const auto fronts = horizon_fronts(horizon, ctx);
      const auto plan = plan_horizon(fronts, budget);
      std::vector<CountAction> actions;
      for (const auto& pw : plan.windows) actions.push_back(pw.action);
      return execute_actions(actions, horizon, ctx, budget, run_seed, horizon_index, history);
    }
    case PlannerKind::golden:
    case PlannerKind::uni: {
      const auto& counter = ctx.bank->model(planner.counter_id);
      const int frames = fixed_share_frames(counter, budget, ctx, wf);
      const std::vector<CountAction> actions(static_cast<std::size_t>(n),
                                             CountAction{counter.counter_id, frames});
      return execute_actions(actions, horizon, ctx, budget, run_seed, horizon_index, history);
    }
    case PlannerKind::rl: {
      if (planner.agents == nullptr) throw Error("rl planner requires trained agents");
      const auto& agents = *planner.agents;
      if (agents.window_frames != wf) throw Error("agents were trained for a different window");
      EnergyLedger ledger(budget);
      HorizonRun run;
      run.horizon = horizon_index;
      run.budget = budget;
      for (int w = 0; w < n; ++w) {
        const auto obs = build_observation(history, static_cast<int>(history.size()), ctx.spec,
                                           agents.scale);
        const auto action = act(agents, obs, ledger, n - w, *ctx.bank, ctx.energy);
        auto ex = execute_window(action, horizon, w, ctx, run_seed, horizon_index);
        ledger.spend(ex.result.energy);
        run.windows.push_back(std::move(ex.result));
        history.push_back(ex.summary);
      }
      run.spent = ledger.spent();
      return run;
    }
  }
  throw Error("unhandled planner");
}

MetricsReport score(std::span<const HorizonRun> runs) {
  MetricsReport rep;
  double sum_width = 0.0, sum_center = 0.0, sum_abs_err = 0.0, sum_truth = 0.0;
  std::size_t covered = 0;
  Energy total_budget, total_spent;
  for (const auto& run : runs) {
    HorizonMetrics hm;
    hm.horizon = run.horizon;
    double w = 0.0, c = 0.0, e = 0.0, g = 0.0;
    std::size_t cov = 0;
    for (const auto& r : run.windows) {
      const double truth = static_cast<double>(r.true_sum);
      if (std::abs(truth - r.ci_sum.center) <= r.ci_sum.half_width) ++cov;
      w += r.ci_sum.half_width;
      c += r.ci_sum.center;
      e += std::abs(r.ci_sum.center - truth);
      g += truth;
    }
    const auto nw = run.windows.size();
    hm.coverage = nw ? static_cast<double>(cov) / static_cast<double>(nw) : 0.0;
    hm.mean_ci_width = c > 0.0 ? w / c : std::nan("");
    hm.mean_error = g > 0.0 ? e / g : std::nan("");
    hm.budget_j = run.budget.joules();
    hm.spent_j = run.spent.joules();
    hm.utilization = run.budget > Energy{} ? hm.spent_j / hm.budget_j : 0.0;
    rep.horizons.push_back(hm);

    rep.windows += nw;
    covered += cov;
    sum_width += w;
    sum_center += c;
    sum_abs_err += e;
    sum_truth += g;
    total_budget += run.budget;
    total_spent += run.spent;
  }
  if (rep.windows == 0) throw Error("cannot score an empty result set");
  rep.coverage = static_cast<double>(covered) / static_cast<double>(rep.windows);
  rep.mean_ci_width_defined = sum_center > 0.0;
  rep.mean_ci_width = rep.mean_ci_width_defined ? sum_width / sum_center : std::nan("");
  rep.mean_error_defined = sum_truth > 0.0;
  rep.mean_error = rep.mean_error_defined ? sum_abs_err / sum_truth : std::nan("");
  rep.energy_utilization =
      total_budget > Energy{} ? total_spent.joules() / total_budget.joules() : 0.0;
  return rep;
}

void write_results_csv(std::span<const HorizonRun> runs, const std::filesystem::path& path) {
  auto out = fmt::output_file(path.string());
  out.print("horizon,window,counter_id,n_frames,energy_j,center,half_width,true_sum\n");
  for (const auto& run : runs) {
    for (const auto& r : run.windows) {
      out.print("{},{},{},{},{:.6f},{:.6f},{:.6f},{}\n", r.horizon, r.window_index,
                r.action.counter_id, r.action.n_frames, r.energy.joules(), r.ci_sum.center,
                r.ci_sum.half_width, r.true_sum);
    }
  }
}

}  // namespace ecount

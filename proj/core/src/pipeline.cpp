#include "ecount/pipeline.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <sstream>

#include "ecount/error.hpp"
#include "ecount/rng.hpp"

namespace ecount {

namespace fs = std::filesystem;
using nlohmann::json;

void ScenarioConfig::validate() const {
  spec.validate();
  spec.window_frames(fps);
  if (counters.empty()) throw Error("scenario needs at least one counter");
  for (const auto& c : counters) c.validate();
  energy.validate();
  if (train_horizons < kMinTrainingHorizons) {
    throw Error(fmt::format("need at least {} training horizons", kMinTrainingHorizons));
  }
  if (validation_horizons < 1 || test_horizons < 1) {
    throw Error("need at least one validation and one test horizon");
  }
  if (grid_step < 1) throw Error("grid_step must be positive");
  if (!(theta >= 0.0)) throw Error("theta must be non-negative");
  for (double b : budgets_wh_per_day) {
    if (!(b > 0.0)) throw Error("budgets must be positive");
  }
  if (!golden_counter.empty()) {
    bool found = false;
    for (const auto& c : counters) found = found || c.counter_id == golden_counter;
    if (!found) throw Error("golden counter '" + golden_counter + "' is not in the counter set");
  }
}

Energy ScenarioConfig::horizon_budget(double wh_per_day) const {
  const double horizon_seconds = spec.tau_seconds * spec.horizon_windows;
  return Energy::joules(wh_per_day * 3600.0 * horizon_seconds / 86400.0);
}

namespace {

CounterModel counter_from_json(const json& j) {
  CounterModel m;
  m.counter_id = j.at("counter_id").get<std::string>();
  m.energy_per_frame_j = j.at("energy_per_frame_j").get<double>();
  m.ratio_mean = j.value("ratio_mean", 1.0);
  m.ratio_std = j.value("ratio_std", 0.0);
  m.offset_std = j.value("offset_std", 0.0);
  m.miss_floor = j.value("miss_floor", 0.0);
  return m;
}

json counter_to_json(const CounterModel& m) {
  return {{"counter_id", m.counter_id},   {"energy_per_frame_j", m.energy_per_frame_j},
          {"ratio_mean", m.ratio_mean},   {"ratio_std", m.ratio_std},
          {"offset_std", m.offset_std},   {"miss_floor", m.miss_floor}};
}

ScenarioConfig from_json(const json& j) {
  ScenarioConfig c;
  c.scene_id = j.value("scene_id", c.scene_id);
  c.fps = j.value("fps", c.fps);
  if (j.contains("window")) {
    const auto& w = j.at("window");
    c.spec.tau_seconds = w.value("tau_seconds", c.spec.tau_seconds);
    c.spec.horizon_windows = w.value("horizon_windows", c.spec.horizon_windows);
    c.spec.alpha = w.value("alpha", c.spec.alpha);
  }
  if (j.contains("pattern")) {
    const auto& p = j.at("pattern");
    c.pattern.base_rate = p.value("base_rate", c.pattern.base_rate);
    c.pattern.diurnal_amplitude = p.value("diurnal_amplitude", c.pattern.diurnal_amplitude);
    c.pattern.period_windows = p.value("period_windows", c.spec.horizon_windows);
    c.pattern.phase_windows = p.value("phase_windows", c.pattern.phase_windows);
  }
  for (const auto& cj : j.at("counters")) c.counters.push_back(counter_from_json(cj));
  c.golden_counter = j.value("golden_counter", std::string{});
  if (j.contains("energy")) {
    const auto& e = j.at("energy");
    c.energy.e_capture_per_frame = e.value("capture_per_frame_j", 0.0);
    c.energy.e_wake_capture = e.value("wake_capture_j", 0.0);
    c.energy.e_wake_process = e.value("wake_process_j", 0.0);
  }
  c.theta = j.value("theta", c.theta);
  c.mode = sigma_mode_from_string(j.value("sigma_mode", std::string("textbook")));
  c.grid_step = j.value("grid_step", c.grid_step);
  c.profile_min_pairs = j.value("profile_min_pairs", c.profile_min_pairs);
  if (j.contains("split")) {
    const auto& s = j.at("split");
    c.train_horizons = s.value("train", c.train_horizons);
    c.validation_horizons = s.value("validation", c.validation_horizons);
    c.test_horizons = s.value("test", c.test_horizons);
  }
  c.budgets_wh_per_day = j.value("budgets_wh_per_day", std::vector<double>{});
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    c.scene_seed = s.value("scene", c.scene_seed);
    c.counter_seed = s.value("counter", c.counter_seed);
  }
  if (j.contains("training")) {
    const auto& t = j.at("training");
    auto& tc = c.training;
    tc.episodes = t.value("episodes", tc.episodes);
    tc.gamma = t.value("gamma", tc.gamma);
    tc.learning_rate = t.value("learning_rate", tc.learning_rate);
    tc.entropy_coef = t.value("entropy_coef", tc.entropy_coef);
    tc.value_coef = t.value("value_coef", tc.value_coef);
    tc.affordability_penalty = t.value("affordability_penalty", tc.affordability_penalty);
    tc.max_grad_norm = t.value("max_grad_norm", tc.max_grad_norm);
  }
  c.validate();
  return c;
}

}  // namespace

ScenarioConfig parse_scenario(std::string_view json_text) {
  return from_json(json::parse(json_text));
}

ScenarioConfig load_scenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string scenario_to_json(const ScenarioConfig& c) {
  json counters = json::array();
  for (const auto& m : c.counters) counters.push_back(counter_to_json(m));
  const auto& t = c.training;
  const json j = {
      {"scene_id", c.scene_id},
      {"fps", c.fps},
      {"window",
       {{"tau_seconds", c.spec.tau_seconds},
        {"horizon_windows", c.spec.horizon_windows},
        {"alpha", c.spec.alpha}}},
      {"pattern",
       {{"base_rate", c.pattern.base_rate},
        {"diurnal_amplitude", c.pattern.diurnal_amplitude},
        {"period_windows", c.pattern.period_windows},
        {"phase_windows", c.pattern.phase_windows}}},
      {"counters", counters},
      {"golden_counter", c.golden_counter},
      {"energy",
       {{"capture_per_frame_j", c.energy.e_capture_per_frame},
        {"wake_capture_j", c.energy.e_wake_capture},
        {"wake_process_j", c.energy.e_wake_process}}},
      {"theta", c.theta},
      {"sigma_mode", std::string(to_string(c.mode))},
      {"grid_step", c.grid_step},
      {"profile_min_pairs", c.profile_min_pairs},
      {"split",
       {{"train", c.train_horizons}, {"validation", c.validation_horizons},
        {"test", c.test_horizons}}},
      {"budgets_wh_per_day", c.budgets_wh_per_day},
      {"seeds", {{"scene", c.scene_seed}, {"counter", c.counter_seed}}},
      {"training",
       {{"episodes", t.episodes},
        {"gamma", t.gamma},
        {"learning_rate", t.learning_rate},
        {"entropy_coef", t.entropy_coef},
        {"value_coef", t.value_coef},
        {"affordability_penalty", t.affordability_penalty},
        {"max_grad_norm", t.max_grad_norm}}},
  };
  return j.dump(2);
}

CountTrace make_scene_trace(const ScenarioConfig& cfg) {
  return synth_trace(cfg.pattern, cfg.total_horizons() * cfg.spec.horizon_windows, cfg.spec,
                     cfg.scene_seed, cfg.fps, cfg.scene_id);
}

CounterBank make_bank(const ScenarioConfig& cfg) { return CounterBank(cfg.counters); }

SimContext make_context(const ScenarioConfig& cfg, const CounterBank& bank) {
  SimContext ctx;
  ctx.bank = &bank;
  ctx.energy = cfg.energy;
  ctx.spec = cfg.spec;
  ctx.mode = cfg.mode;
  ctx.grid_step = cfg.grid_step;
  ctx.counter_seed = cfg.counter_seed;
  return ctx;
}

namespace {

void require_horizons(const CountTrace& trace, const ScenarioConfig& cfg, int last_exclusive) {
  if (trace.num_horizons(cfg.spec) < last_exclusive) {
    throw Error(fmt::format("trace holds {} horizons, the split needs {}",
                            trace.num_horizons(cfg.spec), last_exclusive));
  }
}

}  // namespace

std::vector<MeanPair> profiling_pairs(const CountTrace& trace, const CounterModel& model,
                                      const ScenarioConfig& cfg, int first_horizon,
                                      int n_horizons) {
  require_horizons(trace, cfg, first_horizon + n_horizons);
  const int wf = cfg.spec.window_frames(trace.fps);
  std::vector<MeanPair> pairs;
  const int w0 = first_horizon * cfg.spec.horizon_windows;
  const int w1 = w0 + n_horizons * cfg.spec.horizon_windows;
  for (int w = w0; w < w1; ++w) {
    const auto truth = trace.window(cfg.spec, w);
    const std::int64_t first = trace.first_frame() + static_cast<std::int64_t>(w) * wf;
    double t = 0.0, o = 0.0;
    for (int i = 0; i < wf; ++i) {
      t += truth[static_cast<std::size_t>(i)];
      o += observe_frame(model, truth[static_cast<std::size_t>(i)], first + i, cfg.counter_seed);
    }
    pairs.push_back({t / wf, o / wf});
  }
  return pairs;
}

void profile_bank(CounterBank& bank, const CountTrace& trace, const ScenarioConfig& cfg) {
  for (const auto& m : bank.models()) {
    const auto pairs = profiling_pairs(trace, m, cfg, 0, cfg.train_horizons);
    bank.set_profile(profile_errors(m.counter_id, pairs, cfg.theta, cfg.profile_min_pairs));
  }
}

std::vector<HorizonPlan> training_plans(const CountTrace& trace, const CounterBank& bank,
                                        const ScenarioConfig& cfg, Energy budget) {
  require_horizons(trace, cfg, cfg.train_horizons);
  const auto ctx = make_context(cfg, bank);
  std::vector<HorizonPlan> plans;
  for (int h = 0; h < cfg.train_horizons; ++h) {
    const auto fronts = horizon_fronts(trace.horizon(cfg.spec, h), ctx);
    plans.push_back(plan_horizon(fronts, budget));
  }
  return plans;
}

namespace {

std::vector<CountAction> plan_actions(const HorizonPlan& plan) {
  std::vector<CountAction> actions;
  actions.reserve(plan.windows.size());
  for (const auto& w : plan.windows) actions.push_back(w.action);
  return actions;
}

/// Summaries emitted while executing each training horizon's plan once.
std::vector<WindowSummary> training_summaries(const CountTrace& trace, const CounterBank& bank,
                                              const ScenarioConfig& cfg, Energy budget,
                                              std::span<const HorizonPlan> plans,
                                              std::uint64_t seed) {
  const auto ctx = make_context(cfg, bank);
  std::vector<WindowSummary> history;
  for (int h = 0; h < cfg.train_horizons; ++h) {
    execute_actions(plan_actions(plans[static_cast<std::size_t>(h)]),
                    trace.horizon(cfg.spec, h), ctx, budget, seed, h, history);
  }
  return history;
}

struct ReplayState {
  std::vector<CountTrace> horizons;
  CounterBank bank;
  ScenarioConfig cfg;
  Energy budget;
  std::vector<HorizonPlan> plans;
  ObservationScale scale;
  std::uint64_t seed = 0;
};

}  // namespace

ReplayDataset make_replay_dataset(const CountTrace& trace, const CounterBank& bank,
                                  const ScenarioConfig& cfg, Energy budget,
                                  std::vector<HorizonPlan> plans, const ObservationScale& scale,
                                  std::uint64_t seed) {
  require_horizons(trace, cfg, cfg.train_horizons);
  if (static_cast<int>(plans.size()) != cfg.train_horizons) {
    throw Error("one oracle plan per training horizon required");
  }
  auto state = std::make_shared<ReplayState>();
  for (int h = 0; h < cfg.train_horizons; ++h) state->horizons.push_back(trace.horizon(cfg.spec, h));
  state->bank = bank;
  state->cfg = cfg;
  state->budget = budget;
  state->plans = std::move(plans);
  state->scale = scale;
  state->seed = seed;

  ReplayDataset data;
  data.horizons = cfg.train_horizons;
  data.episode = [state](int i) {
    const auto& s = *state;
    const auto ctx = make_context(s.cfg, s.bank);
    const int h = i % s.cfg.train_horizons;
    const std::uint64_t run_seed = KeyedRng(s.seed, static_cast<std::uint64_t>(i))();
    std::vector<WindowSummary> history;
    if (h > 0) {
      execute_actions(plan_actions(s.plans[static_cast<std::size_t>(h - 1)]),
                      s.horizons[static_cast<std::size_t>(h - 1)], ctx, s.budget, run_seed, h - 1,
                      history);
    }
    const int base = static_cast<int>(history.size());
    const auto& plan = s.plans[static_cast<std::size_t>(h)];
    execute_actions(plan_actions(plan), s.horizons[static_cast<std::size_t>(h)], ctx, s.budget,
                    run_seed, h, history);

    const int n = s.cfg.spec.horizon_windows;
    Episode ep;
    ep.reserve(static_cast<std::size_t>(n));
    Energy spent;
    for (int w = 0; w < n; ++w) {
      const auto& pw = plan.windows[static_cast<std::size_t>(w)];
      TrainingStep step;
      step.obs = build_observation(history, base + w, s.cfg.spec, s.scale);
      step.oracle_frames = pw.action.n_frames;
      step.oracle_counter = static_cast<int>(s.bank.index_of(pw.action.counter_id));
      step.available = s.budget - spent - bare_minimum(n - w - 1, s.bank, s.cfg.energy);
      spent += pw.energy;
      ep.push_back(step);
    }
    return ep;
  };
  return data;
}

TrainedAgents train_agents(const CountTrace& trace, const CounterBank& bank,
                           const ScenarioConfig& cfg, Energy budget, std::uint64_t seed) {
  auto plans = training_plans(trace, bank, cfg, budget);
  const auto summaries = training_summaries(trace, bank, cfg, budget, plans, seed);
  const auto scale = fit_observation_scale(summaries);

  std::vector<std::string> ids;
  for (const auto& m : bank.models()) ids.push_back(m.counter_id);
  TrainedAgents out;
  out.agents = AgentPair::create(budget, ids, cfg.spec.window_frames(trace.fps), cfg.grid_step,
                                 KeyedRng(seed, hash_string("init"))());
  out.agents.scale = scale;
  const auto data = make_replay_dataset(trace, bank, cfg, budget, std::move(plans), scale,
                                        KeyedRng(seed, hash_string("replay"))());
  out.log = a2c_train(out.agents, data, cfg.training, bank, cfg.energy,
                      KeyedRng(seed, hash_string("a2c"))());
  return out;
}

std::string pick_uni_counter(const CountTrace& trace, const CounterBank& bank,
                             const ScenarioConfig& cfg, Energy budget, std::uint64_t seed) {
  require_horizons(trace, cfg, cfg.first_test_horizon());
  const auto ctx = make_context(cfg, bank);
  const int wf = cfg.spec.window_frames(trace.fps);
  std::string best;
  double best_width = 0.0;
  for (const auto& m : bank.models()) {
    try {
      fixed_share_frames(m, budget, ctx, wf);
    } catch (const Error&) {
      continue;
    }
    const Planner planner{PlannerKind::uni, m.counter_id, nullptr};
    std::vector<HorizonRun> runs;
    std::vector<WindowSummary> history;
    for (int h = cfg.first_validation_horizon(); h < cfg.first_test_horizon(); ++h) {
      runs.push_back(run_horizon(planner, trace.horizon(cfg.spec, h), ctx, budget, seed, h, history));
    }
    const auto rep = score(runs);
    if (!rep.mean_ci_width_defined) continue;
    if (best.empty() || rep.mean_ci_width < best_width) {
      best = m.counter_id;
      best_width = rep.mean_ci_width;
    }
  }
  if (best.empty()) throw Error("no single counter is affordable at this budget");
  return best;
}

std::vector<HorizonRun> simulate_test(const Planner& planner, const CountTrace& trace,
                                      const CounterBank& bank, const ScenarioConfig& cfg,
                                      Energy budget, std::uint64_t seed) {
  require_horizons(trace, cfg, cfg.total_horizons());
  const auto ctx = make_context(cfg, bank);
  std::vector<HorizonRun> runs;
  std::vector<WindowSummary> history;
  for (int h = cfg.first_validation_horizon(); h < cfg.total_horizons(); ++h) {
    auto run = run_horizon(planner, trace.horizon(cfg.spec, h), ctx, budget, seed, h, history);
    if (h >= cfg.first_test_horizon()) runs.push_back(std::move(run));
  }
  return runs;
}

std::vector<ComparisonRow> compare_baselines(const CountTrace& trace, const CounterBank& bank,
                                             const ScenarioConfig& cfg,
                                             std::span<const AgentPair> agents,
                                             std::uint64_t seed) {
  if (!agents.empty() && agents.size() != cfg.budgets_wh_per_day.size()) {
    throw Error("one agent pair per budget level required");
  }
  if (cfg.golden_counter.empty()) throw Error("scenario does not name a golden counter");
  std::vector<ComparisonRow> rows;
  for (std::size_t b = 0; b < cfg.budgets_wh_per_day.size(); ++b) {
    const double wh = cfg.budgets_wh_per_day[b];
    const Energy budget = cfg.horizon_budget(wh);
    auto add = [&](const Planner& p) {
      const auto runs = simulate_test(p, trace, bank, cfg, budget, seed);
      rows.push_back({wh, std::string(to_string(p.kind)), p.counter_id, score(runs)});
    };
    add({PlannerKind::oracle, {}, nullptr});
    if (!agents.empty()) {
      if (agents[b].budget_level != budget) {
        throw Error(fmt::format("agents for {} Wh/day were trained for a different budget", wh));
      }
      add({PlannerKind::rl, {}, &agents[b]});
    }
    add({PlannerKind::golden, cfg.golden_counter, nullptr});
    add({PlannerKind::uni, pick_uni_counter(trace, bank, cfg, budget, seed), nullptr});
  }
  return rows;
}

void write_comparison_csv(std::span<const ComparisonRow> rows, const fs::path& path) {
  auto out = fmt::output_file(path.string());
  out.print("budget_wh,planner,counter,windows,coverage,mean_ci_width,mean_error,energy_utilization\n");
  for (const auto& r : rows) {
    const auto& m = r.report;
    out.print("{:g},{},{},{},{:.6f},{},{},{:.6f}\n", r.budget_wh, r.planner, r.counter, m.windows,
              m.coverage,
              m.mean_ci_width_defined ? fmt::format("{:.6f}", m.mean_ci_width) : "undefined",
              m.mean_error_defined ? fmt::format("{:.6f}", m.mean_error) : "undefined",
              m.energy_utilization);
  }
}

ImitationReport evaluate_imitation(std::span<const HorizonRun> rl_runs, const CountTrace& trace,
                                   const CounterBank& bank, const ScenarioConfig& cfg,
                                   Energy budget) {
  const auto ctx = make_context(cfg, bank);
  ImitationReport rep;
  double oracle_frames = 0.0, deviation = 0.0;
  std::size_t matches = 0;
  for (const auto& run : rl_runs) {
    const auto fronts = horizon_fronts(trace.horizon(cfg.spec, run.horizon), ctx);
    const auto plan = plan_horizon(fronts, budget);
    for (const auto& wr : run.windows) {
      const auto& oracle = plan.windows[static_cast<std::size_t>(wr.window_index)].action;
      oracle_frames += oracle.n_frames;
      deviation += std::abs(wr.action.n_frames - oracle.n_frames);
      if (wr.action.counter_id == oracle.counter_id) ++matches;
      ++rep.windows;
    }
  }
  if (rep.windows == 0) throw Error("no windows to compare");
  const double n = static_cast<double>(rep.windows);
  rep.mean_oracle_frames = oracle_frames / n;
  rep.mean_abs_frame_deviation = deviation / n;
  rep.counter_match_rate = static_cast<double>(matches) / n;
  return rep;
}

std::vector<HorizonRun> read_results_csv(const fs::path& path, Energy budget) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      line != "horizon,window,counter_id,n_frames,energy_j,center,half_width,true_sum") {
    throw Error(path.string() + ": not a results file");
  }
  std::vector<HorizonRun> runs;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 8) throw Error(fmt::format("{}:{}: expected 8 fields", path.string(), lineno));
    try {
      WindowResult r;
      r.horizon = std::stoi(f[0]);
      r.window_index = std::stoi(f[1]);
      r.action = {f[2], std::stoi(f[3])};
      r.energy = Energy::joules(std::stod(f[4]));
      r.ci_sum.center = std::stod(f[5]);
      r.ci_sum.half_width = std::stod(f[6]);
      r.true_sum = std::stoll(f[7]);
      if (runs.empty() || runs.back().horizon != r.horizon) {
        runs.push_back({});
        runs.back().horizon = r.horizon;
        runs.back().budget = budget;
      }
      runs.back().spent += r.energy;
      runs.back().windows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw Error(fmt::format("{}:{}: malformed number", path.string(), lineno));
    }
  }
  return runs;
}

}  // namespace ecount

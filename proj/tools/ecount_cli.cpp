#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecount/error.hpp"
#include "ecount/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ecount;

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

/// Usage or validation problem: exit code 2.
struct UsageError : Error {
  using Error::Error;
};

const fs::path& require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw UsageError("missing artifact: " + p.string());
  return p;
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw UsageError("cannot create directory " + p.string() + ": " + ec.message());
}

std::string budget_tag(double wh) { return fmt::format("{:g}wh", wh); }

fs::path profile_path(const fs::path& dir, const std::string& id) {
  return dir / ("profile_" + id + ".json");
}

/// Shared scenario flags; anything set here overrides the config file.
struct ScenarioArgs {
  fs::path config;
  std::vector<double> budgets;
  std::optional<double> alpha, theta;
  std::optional<std::string> sigma_mode;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config, "scenario JSON")->required();
    cmd->add_option("--budget", budgets, "budget in Wh/day (repeatable; replaces the config list)");
    cmd->add_option("--alpha", alpha, "confidence level");
    cmd->add_option("--theta", theta, "ratio/offset branch threshold");
    cmd->add_option("--sigma-mode", sigma_mode, "textbook | published");
  }

  ScenarioConfig load() const {
    auto cfg = load_scenario(require_file(config));
    if (!budgets.empty()) cfg.budgets_wh_per_day = budgets;
    if (alpha) cfg.spec.alpha = *alpha;
    if (theta) cfg.theta = *theta;
    if (sigma_mode) cfg.mode = sigma_mode_from_string(*sigma_mode);
    cfg.validate();
    return cfg;
  }
};

CountTrace load_trace(const fs::path& p, const ScenarioConfig& cfg) {
  require_file(p);
  require_file(sidecar_path(p));
  auto trace = read_trace(p);
  trace.validate(cfg.spec);
  return trace;
}

CounterBank load_bank(const ScenarioConfig& cfg, const fs::path& profiles) {
  auto bank = make_bank(cfg);
  for (const auto& m : cfg.counters) {
    bank.set_profile(read_profile(require_file(profile_path(profiles, m.counter_id))));
  }
  return bank;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw UsageError("cannot write " + p.string());
  out << text << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-budgeted object counting with confidence intervals"};
  app.require_subcommand(1);

  // synth
  ScenarioArgs synth_args;
  fs::path synth_out;
  std::optional<std::uint64_t> synth_seed;
  auto* synth = app.add_subcommand("synth", "synthesize a diurnal ground-truth trace");
  synth_args.add_to(synth);
  synth->add_option("--out", synth_out, "trace CSV (a .json sidecar is written next to it)")
      ->required();
  synth->add_option("--scene-seed", synth_seed, "override the config's scene seed");

  // ingest
  fs::path ingest_log_path, ingest_roi, ingest_out;
  std::string ingest_label = "car", ingest_scene = "ingested";
  int ingest_fps = 1;
  double ingest_tau = 1800;
  auto* ingest = app.add_subcommand("ingest", "ROI-count a detection log into a trace");
  ingest->add_option("--log", ingest_log_path, "detection log (JSON lines)")->required();
  ingest->add_option("--roi", ingest_roi, "ROI spec JSON")->required();
  ingest->add_option("--label", ingest_label, "object class to count");
  ingest->add_option("--fps", ingest_fps, "output trace frame rate");
  ingest->add_option("--scene-id", ingest_scene, "scene id recorded in the sidecar");
  ingest->add_option("--tau", ingest_tau, "window length in seconds");
  ingest->add_option("--out", ingest_out, "trace CSV")->required();

  // profile
  ScenarioArgs profile_args;
  fs::path profile_trace, profile_out;
  auto* profile = app.add_subcommand("profile", "profile counter errors on the training horizons");
  profile_args.add_to(profile);
  profile->add_option("--trace", profile_trace, "trace CSV")->required();
  profile->add_option("--out-dir", profile_out, "directory for profile_<counter>.json")->required();

  // fronts
  ScenarioArgs fronts_args;
  fs::path fronts_trace, fronts_profiles, fronts_out;
  int fronts_horizon = 0;
  auto* fronts = app.add_subcommand("fronts", "dump per-window energy/CI fronts of one horizon");
  fronts_args.add_to(fronts);
  fronts->add_option("--trace", fronts_trace, "trace CSV")->required();
  fronts->add_option("--profiles", fronts_profiles, "profile directory")->required();
  fronts->add_option("--horizon", fronts_horizon, "horizon index");
  fronts->add_option("--out-dir", fronts_out, "output directory")->required();

  // plan
  ScenarioArgs plan_args;
  fs::path plan_trace, plan_profiles, plan_out;
  auto* plan = app.add_subcommand("plan", "oracle plans for the training horizons per budget");
  plan_args.add_to(plan);
  plan->add_option("--trace", plan_trace, "trace CSV")->required();
  plan->add_option("--profiles", plan_profiles, "profile directory")->required();
  plan->add_option("--out-dir", plan_out, "output directory")->required();

  // train
  ScenarioArgs train_args;
  fs::path train_trace, train_profiles, train_out;
  std::uint64_t train_seed = 0;
  std::optional<int> train_episodes;
  std::optional<double> train_lr;
  auto* train = app.add_subcommand("train", "train the online agents for every budget level");
  train_args.add_to(train);
  train->add_option("--trace", train_trace, "trace CSV")->required();
  train->add_option("--profiles", train_profiles, "profile directory")->required();
  train->add_option("--seed", train_seed, "training seed")->required();
  train->add_option("--episodes", train_episodes, "override training episodes");
  train->add_option("--lr", train_lr, "override the learning rate");
  train->add_option("--out-dir", train_out, "output directory")->required();

  // simulate
  ScenarioArgs sim_args;
  fs::path sim_trace, sim_profiles, sim_agents, sim_out;
  std::string sim_planner, sim_counter;
  std::uint64_t sim_seed = 0;
  auto* simulate = app.add_subcommand("simulate", "run a planner over the test horizons");
  sim_args.add_to(simulate);
  simulate->add_option("--trace", sim_trace, "trace CSV")->required();
  simulate->add_option("--profiles", sim_profiles, "profile directory")->required();
  simulate->add_option("--planner", sim_planner, "oracle | rl | golden | uni")->required();
  simulate->add_option("--agents", sim_agents, "agent directory (rl)");
  simulate->add_option("--counter", sim_counter, "fixed counter for uni (default: best on validation)");
  simulate->add_option("--seed", sim_seed, "run seed")->required();
  simulate->add_option("--out-dir", sim_out, "output directory")->required();

  // report
  fs::path report_results, report_out;
  auto* report = app.add_subcommand("report", "score simulation results into a comparison table");
  report->add_option("--results", report_results, "directory written by simulate")->required();
  report->add_option("--out", report_out, "comparison CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) {
      auto cfg = synth_args.load();
      if (synth_seed) cfg.scene_seed = *synth_seed;
      write_trace(make_scene_trace(cfg), cfg.spec, synth_out);
      fmt::print("wrote {} ({} horizons)\n", synth_out.string(), cfg.total_horizons());
    } else if (*ingest) {
      WindowSpec spec;
      spec.tau_seconds = ingest_tau;
      const auto log = read_detection_log(require_file(ingest_log_path));
      const auto roi = read_roi(require_file(ingest_roi));
      auto trace = ingest_log(log, roi, ingest_label, ingest_fps, ingest_scene);
      const auto wf = static_cast<std::size_t>(spec.window_frames(ingest_fps));
      if (trace.counts.size() < wf) {
        throw UsageError(fmt::format("log covers {} frames, shorter than one {} s window",
                                     trace.counts.size(), ingest_tau));
      }
      if (const auto tail = trace.counts.size() % wf; tail != 0) {
        fmt::print(stderr, "warning: dropping {} trailing frames of a partial window\n", tail);
        trace.counts.resize(trace.counts.size() - tail);
      }
      spec.horizon_windows = trace.num_windows(spec);
      write_trace(trace, spec, ingest_out);
      fmt::print("wrote {} ({} frames)\n", ingest_out.string(), trace.counts.size());
    } else if (*profile) {
      const auto cfg = profile_args.load();
      const auto trace = load_trace(profile_trace, cfg);
      ensure_dir(profile_out);
      for (const auto& m : cfg.counters) {
        const auto pairs = profiling_pairs(trace, m, cfg, 0, cfg.train_horizons);
        const auto p = profile_errors(m.counter_id, pairs, cfg.theta, cfg.profile_min_pairs);
        if (!p.ratio_usable()) {
          fmt::print(stderr, "warning: counter '{}' has no windows above theta\n", m.counter_id);
        }
        if (!p.offset_usable()) {
          fmt::print(stderr, "warning: counter '{}' has no windows at or below theta\n",
                     m.counter_id);
        }
        write_profile(p, profile_path(profile_out, m.counter_id));
        fmt::print("{}: {} ratio / {} offset samples\n", m.counter_id, p.ratio_samples().size(),
                   p.offset_samples().size());
      }
    } else if (*fronts) {
      const auto cfg = fronts_args.load();
      const auto trace = load_trace(fronts_trace, cfg);
      const auto bank = load_bank(cfg, fronts_profiles);
      if (fronts_horizon < 0 || fronts_horizon >= trace.num_horizons(cfg.spec)) {
        throw UsageError(fmt::format("horizon {} is outside the trace", fronts_horizon));
      }
      ensure_dir(fronts_out);
      const auto all = horizon_fronts(trace.horizon(cfg.spec, fronts_horizon),
                                      make_context(cfg, bank));
      for (const auto& f : all) {
        write_front_csv(f, fronts_out / fmt::format("front_h{}_w{:02}.csv", fronts_horizon,
                                                    f.window_index));
      }
      fmt::print("wrote {} fronts\n", all.size());
    } else if (*plan) {
      const auto cfg = plan_args.load();
      const auto trace = load_trace(plan_trace, cfg);
      const auto bank = load_bank(cfg, plan_profiles);
      ensure_dir(plan_out);
      for (double wh : cfg.budgets_wh_per_day) {
        const auto plans = training_plans(trace, bank, cfg, cfg.horizon_budget(wh));
        for (std::size_t h = 0; h < plans.size(); ++h) {
          write_plan(plans[h], plan_out / fmt::format("plan_{}_h{}.json", budget_tag(wh), h));
        }
        fmt::print("{}: {} plans\n", budget_tag(wh), plans.size());
      }
    } else if (*train) {
      auto cfg = train_args.load();
      if (train_episodes) cfg.training.episodes = *train_episodes;
      if (train_lr) cfg.training.learning_rate = *train_lr;
      const auto trace = load_trace(train_trace, cfg);
      const auto bank = load_bank(cfg, train_profiles);
      ensure_dir(train_out);
      for (double wh : cfg.budgets_wh_per_day) {
        const auto trained = train_agents(trace, bank, cfg, cfg.horizon_budget(wh), train_seed);
        write_agent(trained.agents, train_out / fmt::format("agent_{}.json", budget_tag(wh)));
        write_training_log(trained.log,
                           train_out / fmt::format("training_{}.csv", budget_tag(wh)));
        const auto& last = trained.log.back();
        fmt::print("{}: {} episodes, final rewards reg {:.4f} cls {:.4f}\n", budget_tag(wh),
                   trained.log.size(), last.mean_reward_reg, last.mean_reward_cls);
      }
    } else if (*simulate) {
      const auto cfg = sim_args.load();
      const auto trace = load_trace(sim_trace, cfg);
      const auto bank = load_bank(cfg, sim_profiles);
      const auto kind = planner_from_string(sim_planner);
      if (kind == PlannerKind::rl && sim_agents.empty()) {
        throw UsageError("--planner rl requires --agents");
      }
      if (kind == PlannerKind::golden && cfg.golden_counter.empty()) {
        throw UsageError("scenario does not name a golden counter");
      }
      ensure_dir(sim_out);
      for (double wh : cfg.budgets_wh_per_day) {
        const Energy budget = cfg.horizon_budget(wh);
        Planner planner{kind, {}, nullptr};
        AgentPair agents;
        if (kind == PlannerKind::rl) {
          agents = read_agent(require_file(sim_agents / fmt::format("agent_{}.json", budget_tag(wh))));
          if (agents.budget_level != budget) {
            throw UsageError(fmt::format("agents for {} were trained for {:.3f} J, not {:.3f} J",
                                         budget_tag(wh), agents.budget_level.joules(),
                                         budget.joules()));
          }
          planner.agents = &agents;
        } else if (kind == PlannerKind::golden) {
          planner.counter_id = cfg.golden_counter;
        } else if (kind == PlannerKind::uni) {
          planner.counter_id = sim_counter.empty()
                                   ? pick_uni_counter(trace, bank, cfg, budget, sim_seed)
                                   : sim_counter;
        }
        const auto runs = simulate_test(planner, trace, bank, cfg, budget, sim_seed);
        const std::string stem = fmt::format("{}_{}", sim_planner, budget_tag(wh));
        write_results_csv(runs, sim_out / ("results_" + stem + ".csv"));

        std::vector<std::string> ids;
        for (const auto& m : cfg.counters) ids.push_back(m.counter_id);
        const json manifest = {
            {"scene_id", trace.scene_id},
            {"planner", sim_planner},
            {"counter", planner.counter_id},
            {"budget_wh_per_day", wh},
            {"budget_j", budget.joules()},
            {"seed", sim_seed},
            {"scene_seed", cfg.scene_seed},
            {"counter_seed", cfg.counter_seed},
            {"counters", ids},
            {"theta", cfg.theta},
            {"alpha", cfg.spec.alpha},
            {"sigma_mode", std::string(to_string(cfg.mode))},
            {"test_horizons", cfg.test_horizons},
            {"results", "results_" + stem + ".csv"},
        };
        write_text(sim_out / ("run_" + stem + ".json"), manifest.dump(2));

        const auto m = score(runs);
        Energy unused;
        for (const auto& r : runs) unused += r.unused();
        fmt::print("{} {}: coverage {:.4f}, mean CI width {:.4f}, mean error {:.4f}, unused {:.1f} J\n",
                   sim_planner, budget_tag(wh), m.coverage, m.mean_ci_width, m.mean_error,
                   unused.joules());
      }
    } else if (*report) {
      if (!fs::is_directory(report_results)) {
        throw UsageError("missing artifact: " + report_results.string());
      }
      std::vector<fs::path> manifests;
      for (const auto& e : fs::directory_iterator(report_results)) {
        const auto name = e.path().filename().string();
        if (name.starts_with("run_") && e.path().extension() == ".json") manifests.push_back(e.path());
      }
      if (manifests.empty()) throw UsageError("no run manifests in " + report_results.string());

      static const std::map<std::string, int> order = {
          {"oracle", 0}, {"rl", 1}, {"uni", 2}, {"golden", 3}};
      std::vector<ComparisonRow> rows;
      for (const auto& mp : manifests) {
        std::ifstream in(mp);
        const json m = json::parse(in);
        const fs::path csv = report_results / m.at("results").get<std::string>();
        const auto runs =
            read_results_csv(require_file(csv), Energy::joules(m.at("budget_j").get<double>()));
        rows.push_back({m.at("budget_wh_per_day").get<double>(), m.at("planner").get<std::string>(),
                        m.at("counter").get<std::string>(), score(runs)});
      }
      std::sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
        if (a.budget_wh != b.budget_wh) return a.budget_wh < b.budget_wh;
        const int oa = order.contains(a.planner) ? order.at(a.planner) : 9;
        const int ob = order.contains(b.planner) ? order.at(b.planner) : 9;
        return oa != ob ? oa < ob : a.planner < b.planner;
      });
      write_comparison_csv(rows, report_out);
      fmt::print("{:>8} {:>8} {:>8} {:>9} {:>10} {:>10}\n", "budget", "planner", "counter",
                 "coverage", "ci_width", "error");
      for (const auto& r : rows) {
        fmt::print("{:>8} {:>8} {:>8} {:>9.4f} {:>10.4f} {:>10.4f}\n", budget_tag(r.budget_wh),
                   r.planner, r.counter, r.report.coverage, r.report.mean_ci_width,
                   r.report.mean_error);
      }
    }
  } catch (const UsageError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const json::exception& e) {
    fmt::print(stderr, "error: malformed JSON: {}\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(stderr, "internal error: {}\n", e.what());
    return kExitInternal;
  }
  return 0;
}

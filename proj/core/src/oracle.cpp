#include "ecount/oracle.hpp"

#include <fmt/format.h>

#include <fstream>
#include <json.hpp>

#include "ecount/error.hpp"

namespace ecount {

Energy minimum_energy(std::span<const EnergyCIFront> fronts) {
  Energy total;
  for (const auto& f : fronts) {
    if (f.points.empty()) throw Error("empty front for window " + std::to_string(f.window_index));
    total += f.points.front().energy;
  }
  return total;
}

HorizonPlan plan_horizon(std::span<const EnergyCIFront> fronts, Energy budget, Energy slice) {
  if (slice <= Energy{}) throw Error("energy slice must be positive");
  if (fronts.empty()) throw Error("no windows to plan");
  const Energy floor = minimum_energy(fronts);
  if (budget < floor) {
    throw Error(fmt::format("budget below bare minimum: need {:.6f} J, short by {:.6f} J",
                            floor.joules(), (floor - budget).joules()));
  }

  std::vector<std::size_t> at(fronts.size(), 0);
  Energy spent = floor;
  while (true) {
    std::size_t best = fronts.size();
    double best_grad = -1.0;
    for (std::size_t w = 0; w < fronts.size(); ++w) {
      const auto& pts = fronts[w].points;
      if (at[w] + 1 >= pts.size()) continue;
      const Energy step = pts[at[w] + 1].energy - pts[at[w]].energy;
      const double grad = (pts[at[w]].ci_width - pts[at[w] + 1].ci_width) / step.joules();
      if (grad <= best_grad) continue;
      if (spent + step > budget) continue;
      best_grad = grad;
      best = w;
    }
    if (best == fronts.size()) break;
    spent += fronts[best].points[at[best] + 1].energy - fronts[best].points[at[best]].energy;
    ++at[best];
  }

  HorizonPlan plan;
  plan.budget = budget;
  plan.windows.reserve(fronts.size());
  for (std::size_t w = 0; w < fronts.size(); ++w) {
    const auto& p = fronts[w].points[at[w]];
    plan.windows.push_back({fronts[w].window_index, p.action, p.energy, static_cast<int>(at[w])});
    plan.spent += p.energy;
  }
  return plan;
}

double plan_quality(const HorizonPlan& plan, std::span<const EnergyCIFront> fronts) {
  if (plan.windows.size() != fronts.size()) throw Error("plan and fronts cover different windows");
  if (plan.windows.empty()) throw Error("empty plan");
  double total = 0.0;
  for (std::size_t w = 0; w < fronts.size(); ++w) {
    const auto& pw = plan.windows[w];
    const FrontPoint* hit = nullptr;
    for (const auto& p : fronts[w].points) {
      if (p.action == pw.action) hit = &p;
    }
    if (hit == nullptr) {
      throw Error(fmt::format("window {} action <{}, {}> is not on its front", pw.index,
                              pw.action.counter_id, pw.action.n_frames));
    }
    total += hit->ci_width;
  }
  return total / static_cast<double>(fronts.size());
}

void write_plan(const HorizonPlan& plan, const std::filesystem::path& path) {
  nlohmann::json windows = nlohmann::json::array();
  for (const auto& w : plan.windows) {
    windows.push_back({{"index", w.index},
                       {"counter_id", w.action.counter_id},
                       {"n_frames", w.action.n_frames},
                       {"energy_j", w.energy.joules()}});
  }
  const nlohmann::json j = {{"budget_j", plan.budget.joules()},
                            {"windows", windows},
                            {"spent_j", plan.spent.joules()}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

HorizonPlan read_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  const auto j = nlohmann::json::parse(in);
  HorizonPlan plan;
  plan.budget = Energy::joules(j.at("budget_j").get<double>());
  plan.spent = Energy::joules(j.at("spent_j").get<double>());
  for (const auto& w : j.at("windows")) {
    PlannedWindow pw;
    pw.index = w.at("index").get<int>();
    pw.action = {w.at("counter_id").get<std::string>(), w.at("n_frames").get<int>()};
    pw.energy = Energy::joules(w.at("energy_j").get<double>());
    plan.windows.push_back(std::move(pw));
  }
  return plan;
}

}  // namespace ecount

#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "ecount/front.hpp"

namespace ecount {

struct PlannedWindow {
  int index = 0;
  CountAction action;
  Energy energy;
  int front_point = 0;  ///< operating point on that window's front
};

/// Per-window count actions for one horizon plus the energy they consume.
struct HorizonPlan {
  Energy budget;
  Energy spent;  ///< sum of per-window energies; never above budget
  std::vector<PlannedWindow> windows;
};

/// Offline allocation with full knowledge of every window's front. Each window
/// starts at its cheapest point; the window with the steepest front gradient
/// among those whose next point is affordable advances by one point, until no
/// window can advance. Equal gradients go to the lowest window index.
///
/// `slice` is the nominal energy quantum. Fronts are discrete, so one
/// advance always moves to the next realizable point whatever it costs.
HorizonPlan plan_horizon(std::span<const EnergyCIFront> fronts, Energy budget,
                         Energy slice = Energy::joules(1.0));

/// Mean ci_width over the plan's operating points.
double plan_quality(const HorizonPlan& plan, std::span<const EnergyCIFront> fronts);

/// Energy of each front's first point.
Energy minimum_energy(std::span<const EnergyCIFront> fronts);

/// JSON `{budget_j, windows:[{index, counter_id, n_frames, energy_j}], spent_j}`.
void write_plan(const HorizonPlan& plan, const std::filesystem::path& path);
HorizonPlan read_plan(const std::filesystem::path& path);

}  // namespace ecount

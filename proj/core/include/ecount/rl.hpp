#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ecount/counter.hpp"
#include "ecount/energy.hpp"
#include "ecount/front.hpp"
#include "ecount/mlp.hpp"
#include "ecount/trace.hpp"

namespace ecount {

// ---------------------------------------------------------------------------
// Observations

inline constexpr int kRecentWindows = 4;    ///< most recent windows observed
inline constexpr int kDayPriorWindows = 1;  ///< same-time windows from prior days
inline constexpr int kObservationSize = 2 * (kRecentWindows + kDayPriorWindows);

/// What the planner emitted for one finished window: mean count per frame and
/// the sample std of the observed counts.
struct WindowSummary {
  double mean = 0.0;
  double std = 0.0;
};

/// Divisors applied to observed means and stds, frozen after training data ingestion.
struct ObservationScale {
  double mean_scale = 1.0;
  double std_scale = 1.0;
};

/// 95th percentiles of the summaries' means and stds (floored to stay positive).
ObservationScale fit_observation_scale(std::span<const WindowSummary> summaries);

using Observation = std::array<double, kObservationSize>;

/// (mean, std) of windows w-1..w-4 followed by window w - horizon_windows,
/// each divided by the scale; windows before the stream start read as zero.
/// `history[i]` is window i of the stream; entries at or after `window` are ignored.
Observation build_observation(std::span<const WindowSummary> history, int window,
                              const WindowSpec& spec, const ObservationScale& scale);

// ---------------------------------------------------------------------------
// Agents

inline constexpr int kHiddenUnits = 64;
inline constexpr double kLogStdMin = -4.0;
inline constexpr double kLogStdMax = 1.0;

/// Frame-count agent: Gaussian policy over a normalized frame count in [0, 1]
/// (mapped affinely to [30, window frames]) with a learned global log-std.
struct RegressionAgent {
  Mlp actor;
  double log_std = -1.0;
  Mlp critic;
};

/// Counter-choice agent: categorical policy over the counter set.
struct ClassificationAgent {
  Mlp actor;
  Mlp critic;
};

/// Both agents for one daily budget level, plus everything needed to turn
/// their outputs into count actions.
struct AgentPair {
  Energy budget_level;  ///< per horizon
  std::vector<std::string> counter_ids;
  int window_frames = 1800;
  int grid_step = 10;
  ObservationScale scale;
  RegressionAgent regression;
  ClassificationAgent classification;

  static AgentPair create(Energy budget_level, std::vector<std::string> counter_ids,
                          int window_frames, int grid_step, std::uint64_t seed);

  double frames_from_normalized(double u) const;
  double normalized_from_frames(double n) const;
  /// Parameters of the larger actor network (log-std included for regression).
  std::size_t max_actor_params() const;
};

/// Deterministic policy outputs: Gaussian mean (normalized) and counter logits.
struct PolicyOutput {
  double frames_normalized = 0.0;
  std::vector<double> logits;
};

PolicyOutput mlp_forward(const AgentPair& pair, const Observation& obs);

std::vector<double> softmax(std::span<const double> logits);

// ---------------------------------------------------------------------------
// Energy accounting and the runtime action rule

class EnergyLedger {
 public:
  explicit EnergyLedger(Energy budget);

  Energy budget() const { return budget_; }
  Energy spent() const { return spent_; }
  Energy remaining() const { return budget_ - spent_; }
  /// Throws if the charge is negative or would exceed the budget.
  void spend(Energy e);

 private:
  Energy budget_;
  Energy spent_;
};

/// Energy for `windows_remaining` windows at <cheapest counter, 30 frames>.
Energy bare_minimum(int windows_remaining, const CounterBank& bank, const EnergyModel& em);

/// Largest grid frame count in [30, max_frames] for `counter` costing at most
/// `available`, or 0 if even 30 frames are unaffordable.
int largest_affordable(const CounterModel& counter, Energy available, const EnergyModel& em,
                       int max_frames, int grid_step);

/// The online action for the current window. `windows_remaining` counts this
/// window. Falls back to <cheapest, 30> once the ledger reaches the bare
/// minimum, and otherwise clamps the agents' choice so that the windows after
/// this one can still afford their bare minimum.
CountAction act(const AgentPair& pair, const Observation& obs, const EnergyLedger& ledger,
                int windows_remaining, const CounterBank& bank, const EnergyModel& em);

// ---------------------------------------------------------------------------
// Training

struct TrainingConfig {
  int episodes = 2000;
  double gamma = 0.9;
  double learning_rate = 3e-4;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double affordability_penalty = 0.1;
  /// Global-norm clip applied per network; 0 disables.
  double max_grad_norm = 0.5;
};

/// One window of a replayed horizon with the oracle's label.
struct TrainingStep {
  Observation obs{};
  int oracle_frames = 0;
  int oracle_counter = -1;  ///< index into AgentPair::counter_ids
  Energy available;  ///< energy this window may spend without starving later windows
};

using Episode = std::vector<TrainingStep>;

/// Replayed training horizons. `episode(i)` returns horizon i % horizons with
/// fresh sampling noise and must be deterministic in i.
struct ReplayDataset {
  int horizons = 0;
  std::function<Episode(int episode)> episode;
};

inline constexpr int kMinTrainingHorizons = 3;

/// Rollout step with its (fixed) sampled actions, rewards, and the
/// stop-gradient critic targets and advantages.
struct Transition {
  Observation obs{};
  double reg_action = 0.0;  ///< sampled normalized frame count (unclamped)
  double reg_reward = 0.0;
  int cls_action = 0;
  double cls_reward = 0.0;
  double reg_target = 0.0, reg_advantage = 0.0;
  double cls_target = 0.0, cls_advantage = 0.0;
};

using Minibatch = std::vector<Transition>;

/// Samples actions for one episode and scores them against the oracle labels.
Minibatch rollout(const AgentPair& pair, const Episode& episode, const TrainingConfig& cfg,
                  const CounterBank& bank, const EnergyModel& em, std::uint64_t seed,
                  int episode_index);

/// Fills targets r + gamma V(o') (0 past the last step) and advantages from the current critics.
void compute_advantages(const AgentPair& pair, Minibatch& batch, double gamma);

struct PairGradients {
  std::vector<double> reg_actor, reg_critic, cls_actor, cls_critic;
  double reg_log_std = 0.0;

  static PairGradients zeros_like(const AgentPair& pair);
};

struct A2CLoss {
  double reg_actor = 0.0, reg_critic = 0.0, cls_actor = 0.0, cls_critic = 0.0;
  double cls_entropy = 0.0;  ///< mean classification policy entropy
  double total() const { return reg_actor + reg_critic + cls_actor + cls_critic; }
};

/// Mean over the batch of
///   -log pi(a|o) A - entropy_coef H(pi(.|o)) + value_coef * 0.5 (y - V(o))^2
/// for both agents, with targets and advantages held constant. When `grads`
/// is non-null it receives the exact gradient.
A2CLoss a2c_loss(const AgentPair& pair, const Minibatch& batch, const TrainingConfig& cfg,
                 PairGradients* grads);

struct EpisodeLog {
  int episode = 0;
  double mean_reward_reg = 0.0;
  double mean_reward_cls = 0.0;
  double entropy = 0.0;
};

/// Advantage actor-critic imitation of the oracle: one synchronous update per
/// replayed episode. Sampling is keyed by (seed, episode, step).
std::vector<EpisodeLog> a2c_train(AgentPair& pair, const ReplayDataset& data,
                                  const TrainingConfig& cfg, const CounterBank& bank,
                                  const EnergyModel& em, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Files

/// JSON checkpoint: layer shapes, row-major parameters, scales, budget level.
void write_agent(const AgentPair& pair, const std::filesystem::path& path);
AgentPair read_agent(const std::filesystem::path& path);

/// CSV `episode,mean_reward_reg,mean_reward_cls,entropy`.
void write_training_log(std::span<const EpisodeLog> log, const std::filesystem::path& path);

}  // namespace ecount

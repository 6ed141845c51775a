#include "ecount/rl.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "ecount/error.hpp"
#include "ecount/rng.hpp"

namespace ecount {

// ---------------------------------------------------------------------------
// Observations

namespace {

double percentile95(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = 0.95 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

ObservationScale fit_observation_scale(std::span<const WindowSummary> summaries) {
  std::vector<double> means;
  std::vector<double> stds;
  for (const auto& s : summaries) {
    means.push_back(s.mean);
    stds.push_back(s.std);
  }
  constexpr double kFloor = 1e-3;
  return {std::max(percentile95(std::move(means)), kFloor),
          std::max(percentile95(std::move(stds)), kFloor)};
}

Observation build_observation(std::span<const WindowSummary> history, int window,
                              const WindowSpec& spec, const ObservationScale& scale) {
  Observation obs{};
  auto put = [&](std::size_t slot, int source) {
    if (source < 0 || source >= window || static_cast<std::size_t>(source) >= history.size()) {
      return;
    }
    const auto& s = history[static_cast<std::size_t>(source)];
    obs[2 * slot] = s.mean / scale.mean_scale;
    obs[2 * slot + 1] = s.std / scale.std_scale;
  };
  for (int k = 1; k <= kRecentWindows; ++k) put(static_cast<std::size_t>(k - 1), window - k);
  for (int d = 1; d <= kDayPriorWindows; ++d) {
    put(static_cast<std::size_t>(kRecentWindows + d - 1), window - d * spec.horizon_windows);
  }
  return obs;
}

// ---------------------------------------------------------------------------
// Agents

AgentPair AgentPair::create(Energy budget_level, std::vector<std::string> counter_ids,
                            int window_frames, int grid_step, std::uint64_t seed) {
  if (counter_ids.empty()) throw Error("agent pair needs at least one counter");
  if (window_frames < kMinFrames) throw Error("window shorter than the minimum frame sample");
  AgentPair p;
  p.budget_level = budget_level;
  p.counter_ids = std::move(counter_ids);
  p.window_frames = window_frames;
  p.grid_step = grid_step;
  const int c = static_cast<int>(p.counter_ids.size());
  p.regression.actor = Mlp({kObservationSize, kHiddenUnits, kHiddenUnits, 1});
  p.regression.critic = Mlp({kObservationSize, kHiddenUnits, kHiddenUnits, 1});
  p.classification.actor = Mlp({kObservationSize, kHiddenUnits, kHiddenUnits, c});
  p.classification.critic = Mlp({kObservationSize, kHiddenUnits, kHiddenUnits, 1});
  p.regression.actor.init(splitmix64(seed ^ 1), 0.1);
  p.regression.critic.init(splitmix64(seed ^ 2), 1.0);
  p.classification.actor.init(splitmix64(seed ^ 3), 0.01);
  p.classification.critic.init(splitmix64(seed ^ 4), 1.0);
  p.regression.log_std = -1.0;
  return p;
}

double AgentPair::frames_from_normalized(double u) const {
  return kMinFrames + std::clamp(u, 0.0, 1.0) * (window_frames - kMinFrames);
}

double AgentPair::normalized_from_frames(double n) const {
  if (window_frames == kMinFrames) return 0.0;
  return (n - kMinFrames) / static_cast<double>(window_frames - kMinFrames);
}

std::size_t AgentPair::max_actor_params() const {
  return std::max(regression.actor.param_count() + 1, classification.actor.param_count());
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

PolicyOutput mlp_forward(const AgentPair& pair, const Observation& obs) {
  PolicyOutput out;
  out.frames_normalized = pair.regression.actor.forward(obs).front();
  out.logits = pair.classification.actor.forward(obs);
  return out;
}

// ---------------------------------------------------------------------------
// Energy accounting

EnergyLedger::EnergyLedger(Energy budget) : budget_(budget) {
  if (budget < Energy{}) throw Error("energy budget must be >= 0");
}

void EnergyLedger::spend(Energy e) {
  if (e < Energy{}) throw Error("cannot spend negative energy");
  if (spent_ + e > budget_) throw Error("energy budget exceeded");
  spent_ += e;
}

Energy bare_minimum(int windows_remaining, const CounterBank& bank, const EnergyModel& em) {
  if (windows_remaining < 0) throw Error("windows_remaining must be >= 0");
  return windows_remaining * em.action_cost(bank.cheapest(), kMinFrames);
}

int largest_affordable(const CounterModel& counter, Energy available, const EnergyModel& em,
                       int max_frames, int grid_step) {
  const Energy per_frame = em.per_frame(counter);
  const Energy budget = available - em.per_window_fixed();
  if (budget < kMinFrames * per_frame) return 0;
  int n = max_frames;
  if (per_frame > Energy{}) {
    n = static_cast<int>(std::min<std::int64_t>(
        max_frames, budget.microjoules() / per_frame.microjoules()));
  }
  n = floor_to_grid(n, grid_step);
  return n >= kMinFrames ? n : 0;
}

namespace {

int round_to_grid(double frames, int max_frames, int step) {
  const int top = floor_to_grid(max_frames, step);
  const double k = std::round((frames - kMinFrames) / step);
  const int n = kMinFrames + static_cast<int>(std::max(0.0, k)) * step;
  return std::clamp(n, kMinFrames, top);
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

CountAction act(const AgentPair& pair, const Observation& obs, const EnergyLedger& ledger,
                int windows_remaining, const CounterBank& bank, const EnergyModel& em) {
  if (windows_remaining < 1) throw Error("no windows left to act on");
  const auto& cheap = bank.cheapest();
  if (ledger.remaining() <= bare_minimum(windows_remaining, bank, em)) {
    return {cheap.counter_id, kMinFrames};
  }
  const Energy available = ledger.remaining() - bare_minimum(windows_remaining - 1, bank, em);

  const auto out = mlp_forward(pair, obs);
  const int wanted = round_to_grid(pair.frames_from_normalized(out.frames_normalized),
                                   pair.window_frames, pair.grid_step);
  const auto& chosen = bank.model(pair.counter_ids.at(argmax(out.logits)));
  if (em.action_cost(chosen, wanted) <= available) return {chosen.counter_id, wanted};

  const int shrunk = largest_affordable(chosen, available, em, pair.window_frames, pair.grid_step);
  if (shrunk >= kMinFrames) return {chosen.counter_id, shrunk};
  const int fallback = largest_affordable(cheap, available, em, pair.window_frames, pair.grid_step);
  return {cheap.counter_id, std::max(fallback, kMinFrames)};
}

// ---------------------------------------------------------------------------
// Training

Minibatch rollout(const AgentPair& pair, const Episode& episode, const TrainingConfig& cfg,
                  const CounterBank& bank, const EnergyModel& em, std::uint64_t seed,
                  int episode_index) {
  Minibatch batch;
  batch.reserve(episode.size());
  const double sigma = std::exp(pair.regression.log_std);
  for (std::size_t t = 0; t < episode.size(); ++t) {
    const auto& step = episode[t];
    if (step.oracle_frames < kMinFrames || step.oracle_counter < 0 ||
        static_cast<std::size_t>(step.oracle_counter) >= pair.counter_ids.size()) {
      throw Error("missing oracle label at episode " + std::to_string(episode_index) + " step " +
                  std::to_string(t));
    }
    KeyedRng rng(seed, static_cast<std::uint64_t>(episode_index), t);
    std::normal_distribution<double> unit(0.0, 1.0);
    const auto out = mlp_forward(pair, step.obs);

    Transition tr;
    tr.obs = step.obs;
    tr.reg_action = out.frames_normalized + sigma * unit(rng);
    const auto probs = softmax(out.logits);
    std::discrete_distribution<int> pick(probs.begin(), probs.end());
    tr.cls_action = pick(rng);

    // Scored on the unclamped frame count so the reward keeps a slope
    // outside [0, 1], where clamping would leave the policy without signal.
    const double raw_frames = kMinFrames + tr.reg_action * (pair.window_frames - kMinFrames);
    tr.reg_reward = -std::abs(raw_frames - step.oracle_frames) / pair.window_frames;
    const double frames = pair.frames_from_normalized(tr.reg_action);
    tr.cls_reward = tr.cls_action == step.oracle_counter ? 1.0 : 0.0;

    const auto& counter = bank.model(pair.counter_ids[static_cast<std::size_t>(tr.cls_action)]);
    const int proposed = round_to_grid(frames, pair.window_frames, pair.grid_step);
    if (em.action_cost(counter, proposed) > step.available) {
      tr.reg_reward -= cfg.affordability_penalty;
      tr.cls_reward -= cfg.affordability_penalty;
    }
    batch.push_back(tr);
  }
  return batch;
}

void compute_advantages(const AgentPair& pair, Minibatch& batch, double gamma) {
  std::vector<double> v_reg(batch.size());
  std::vector<double> v_cls(batch.size());
  for (std::size_t t = 0; t < batch.size(); ++t) {
    v_reg[t] = pair.regression.critic.forward(batch[t].obs).front();
    v_cls[t] = pair.classification.critic.forward(batch[t].obs).front();
  }
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const bool last = t + 1 == batch.size();
    auto& tr = batch[t];
    tr.reg_target = tr.reg_reward + (last ? 0.0 : gamma * v_reg[t + 1]);
    tr.cls_target = tr.cls_reward + (last ? 0.0 : gamma * v_cls[t + 1]);
    tr.reg_advantage = tr.reg_target - v_reg[t];
    tr.cls_advantage = tr.cls_target - v_cls[t];
  }
}

PairGradients PairGradients::zeros_like(const AgentPair& pair) {
  PairGradients g;
  g.reg_actor.assign(pair.regression.actor.param_count(), 0.0);
  g.reg_critic.assign(pair.regression.critic.param_count(), 0.0);
  g.cls_actor.assign(pair.classification.actor.param_count(), 0.0);
  g.cls_critic.assign(pair.classification.critic.param_count(), 0.0);
  return g;
}

A2CLoss a2c_loss(const AgentPair& pair, const Minibatch& batch, const TrainingConfig& cfg,
                 PairGradients* grads) {
  A2CLoss loss;
  if (batch.empty()) return loss;
  if (grads) *grads = PairGradients::zeros_like(pair);
  const double inv_t = 1.0 / static_cast<double>(batch.size());
  const double log_std = pair.regression.log_std;
  const double var = std::exp(2.0 * log_std);
  const double half_log_2pi_e = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);

  Mlp::Tape tape;
  for (const auto& tr : batch) {
    // Regression actor: -log N(a; m, sigma) * A - beta * H.
    {
      const double m = pair.regression.actor.forward(tr.obs, grads ? &tape : nullptr).front();
      const double d = tr.reg_action - m;
      const double log_prob = -d * d / (2.0 * var) - log_std - half_log_2pi;
      const double entropy = log_std + half_log_2pi_e;
      loss.reg_actor += inv_t * (-log_prob * tr.reg_advantage - cfg.entropy_coef * entropy);
      if (grads) {
        const double dm = inv_t * (-tr.reg_advantage * d / var);
        pair.regression.actor.backward(tape, std::span<const double>(&dm, 1), grads->reg_actor);
        grads->reg_log_std += inv_t * (-tr.reg_advantage * (d * d / var - 1.0) - cfg.entropy_coef);
      }
    }
    // Critics: value_coef * 0.5 (y - V)^2.
    auto critic_term = [&](const Mlp& critic, double target, std::vector<double>* g) {
      const double v = critic.forward(tr.obs, g ? &tape : nullptr).front();
      const double diff = target - v;
      if (g) {
        const double dv = inv_t * cfg.value_coef * (-diff);
        critic.backward(tape, std::span<const double>(&dv, 1), *g);
      }
      return inv_t * cfg.value_coef * 0.5 * diff * diff;
    };
    loss.reg_critic +=
        critic_term(pair.regression.critic, tr.reg_target, grads ? &grads->reg_critic : nullptr);
    loss.cls_critic += critic_term(pair.classification.critic, tr.cls_target,
                                   grads ? &grads->cls_critic : nullptr);
    // Classification actor: -log p_a * A - beta * H.
    {
      const auto logits = pair.classification.actor.forward(tr.obs, grads ? &tape : nullptr);
      const auto p = softmax(logits);
      const double zmax = *std::max_element(logits.begin(), logits.end());
      double lse = 0.0;
      for (double z : logits) lse += std::exp(z - zmax);
      lse = zmax + std::log(lse);
      double entropy = 0.0;
      for (std::size_t j = 0; j < p.size(); ++j) entropy -= p[j] * (logits[j] - lse);
      const auto a = static_cast<std::size_t>(tr.cls_action);
      const double log_pa = logits[a] - lse;
      loss.cls_actor += inv_t * (-log_pa * tr.cls_advantage - cfg.entropy_coef * entropy);
      loss.cls_entropy += inv_t * entropy;
      if (grads) {
        std::vector<double> dz(p.size());
        for (std::size_t j = 0; j < p.size(); ++j) {
          const double onehot = j == a ? 1.0 : 0.0;
          const double log_pj = logits[j] - lse;
          dz[j] = inv_t * (tr.cls_advantage * (p[j] - onehot) +
                           cfg.entropy_coef * p[j] * (log_pj + entropy));
        }
        pair.classification.actor.backward(tape, dz, grads->cls_actor);
      }
    }
  }
  return loss;
}

namespace {

void clip_by_norm(std::span<double> g, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (double x : g) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double k = max_norm / norm;
    for (double& x : g) x *= k;
  }
}

}  // namespace

std::vector<EpisodeLog> a2c_train(AgentPair& pair, const ReplayDataset& data,
                                  const TrainingConfig& cfg, const CounterBank& bank,
                                  const EnergyModel& em, std::uint64_t seed) {
  if (data.horizons < kMinTrainingHorizons) {
    throw Error("training needs at least 3 replayed horizons, got " + std::to_string(data.horizons));
  }
  if (!data.episode) throw Error("replay dataset has no episode source");
  for (const auto& id : pair.counter_ids) bank.model(id);

  Adam opt_reg_actor(pair.regression.actor.param_count() + 1, cfg.learning_rate);
  Adam opt_reg_critic(pair.regression.critic.param_count(), cfg.learning_rate);
  Adam opt_cls_actor(pair.classification.actor.param_count(), cfg.learning_rate);
  Adam opt_cls_critic(pair.classification.critic.param_count(), cfg.learning_rate);
  std::vector<double> reg_buf(pair.regression.actor.param_count() + 1);

  std::vector<EpisodeLog> log;
  log.reserve(static_cast<std::size_t>(std::max(cfg.episodes, 0)));
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    const Episode episode = data.episode(ep);
    if (episode.empty()) continue;
    Minibatch batch = rollout(pair, episode, cfg, bank, em, seed, ep);
    compute_advantages(pair, batch, cfg.gamma);
    PairGradients g;
    const auto loss = a2c_loss(pair, batch, cfg, &g);

    EpisodeLog entry{ep, 0.0, 0.0, loss.cls_entropy};
    for (const auto& tr : batch) {
      entry.mean_reward_reg += tr.reg_reward / static_cast<double>(batch.size());
      entry.mean_reward_cls += tr.cls_reward / static_cast<double>(batch.size());
    }
    log.push_back(entry);

    // The regression actor and its log-std share one optimizer state.
    auto actor = pair.regression.actor.params();
    std::copy(actor.begin(), actor.end(), reg_buf.begin());
    reg_buf.back() = pair.regression.log_std;
    g.reg_actor.push_back(g.reg_log_std);
    clip_by_norm(g.reg_actor, cfg.max_grad_norm);
    clip_by_norm(g.reg_critic, cfg.max_grad_norm);
    clip_by_norm(g.cls_actor, cfg.max_grad_norm);
    clip_by_norm(g.cls_critic, cfg.max_grad_norm);
    opt_reg_actor.step(reg_buf, g.reg_actor);
    std::copy(reg_buf.begin(), reg_buf.end() - 1, actor.begin());
    pair.regression.log_std = std::clamp(reg_buf.back(), kLogStdMin, kLogStdMax);
    opt_reg_critic.step(pair.regression.critic.params(), g.reg_critic);
    opt_cls_actor.step(pair.classification.actor.params(), g.cls_actor);
    opt_cls_critic.step(pair.classification.critic.params(), g.cls_critic);
  }
  return log;
}

}  // namespace ecount

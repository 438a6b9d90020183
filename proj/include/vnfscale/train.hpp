// SPDX-License-Identifier: Apache-2.0
//
// One-step scaling episodes and the REINFORCE, PPO and PPG trainers, plus
// greedy/random evaluation over dataset splits.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vnfscale/policy.hpp"

namespace vnfscale {

enum class Algorithm { Reinforce, Ppo, Ppg };
const char* to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& s);

/// Where an episode's initial deployment comes from.
enum class InitMode { Perturbed, Random, Zero, Reference };
const char* to_string(InitMode m);
InitMode parse_init_mode(const std::string& s);

struct TrainConfig {
  Algorithm algorithm = Algorithm::Ppg;
  double alpha = 0.2;
  double lr = 3e-4;
  double lr_value = 1.5e-4;  // value network under PPG; other algorithms use `lr`
  double gamma = 0.995;      // kept for completeness; episodes last one step
  double epsilon = 0.2;
  std::size_t epochs = 4;
  std::size_t minibatch = 4;
  std::size_t n_ppo = 16;
  std::size_t n_ppg = 64;
  double beta_clone = 1.0;
  std::size_t episodes = 2000;
  std::size_t eval_every = 100;
  std::uint64_t seed = 0;
  /// Decay of the REINFORCE moving-average baseline.
  double baseline_decay = 0.9;
  /// Draw a fresh perturbation of the reference for every training episode
  /// instead of reusing the entry's stored initial deployment.
  bool fresh_perturbation = true;
  /// Standardise advantages within each update batch.
  bool normalize_advantage = false;
  /// Global L2 bound on each policy gradient step; 0 disables clipping.
  double max_grad_norm = 0.0;
  RoutingConfig routing;

  /// Throws InvalidArgument, or PhaseMisalignment when n_ppg % n_ppo != 0.
  void validate() const;
};

io::Json to_json(const TrainConfig& c);
/// Missing fields keep their defaults; unknown fields are rejected.
TrainConfig train_config_from_json(const io::Json& j);

struct Transition {
  int entry_id = 0;
  const DatasetEntry* entry = nullptr;
  Deployment initial;
  ScalingGrid grid;
  double log_prob = 0.0;  // joint, at collection
  double reward = 0.0;
  double ret = 0.0;       // equals reward: episodes end after one step
  double value = 0.0;     // V(s) at collection
};

/// Encode, decode (sampled or greedy), scale, and score one state.
Transition run_episode(const Agent& agent, const Router& router, const DatasetEntry& entry, const Deployment& initial,
                       double alpha, DecodeMode mode, Rng* rng = nullptr);

/// Gradients restricted to trainable policy parameters (encoder excluded when frozen).
diff::GradMap policy_grads(const Agent& agent);
/// Same, clipped to cfg.max_grad_norm when that is positive.
diff::GradMap policy_grads(const Agent& agent, const TrainConfig& cfg);

struct LossReport {
  double policy_loss = 0.0;
  double value_loss = 0.0;
};

/// One ascent step on mean(log pi * (R - baseline)). Returns -mean(log pi * A).
/// Throws EmptyBuffer.
double reinforce_update(Agent& agent, const Router& router, const std::vector<Transition>& buffer, double baseline,
                        const TrainConfig& cfg);

/// Clipped-surrogate objective for one sample.
double clipped_surrogate(double ratio, double advantage, double epsilon);

/// K epochs of clipped-surrogate and value-MSE minibatch steps over the
/// buffer; returns mean losses over all minibatches. Throws EmptyBuffer.
LossReport ppo_update(Agent& agent, const Router& router, const std::vector<Transition>& buffer, const TrainConfig& cfg,
                      Rng& rng);

/// Auxiliary phase: one pass over `states` minimising
/// 1/2 (V_aux - V_value)^2 + beta * KL(pi_old || pi_new), pi_old frozen at
/// phase start. Returns the mean loss. Throws EmptyBuffer.
double ppg_aux_update(Agent& agent, const Router& router, const std::vector<Transition>& states,
                      const TrainConfig& cfg, Rng& rng);

/// Greedy metrics averaged over entries, starting from the chosen initial
/// deployment. Reference ignores the agent and scores the reference itself.
Metrics evaluate_agent(const Agent& agent, const NetworkTopology& t, const std::vector<DatasetEntry>& entries,
                       double alpha, InitMode init, const RoutingConfig& routing = {});

/// Initial deployment of `entry` for the given mode (deterministic per entry).
Deployment initial_deployment(const NetworkTopology& t, const DatasetEntry& entry, InitMode init);

/// Uniform-random grids, `samples` per entry, from the stored initial deployment.
Metrics evaluate_random_policy(const NetworkTopology& t, const std::vector<DatasetEntry>& entries, double alpha,
                               std::size_t samples, std::uint64_t seed, const RoutingConfig& routing = {});

struct UpdateRecord {
  std::size_t update = 0;
  std::optional<double> policy_loss;
  std::optional<double> value_loss;
  std::optional<double> aux_loss;
};

struct EvalRecord {
  std::size_t episode = 0;
  double val_reward = 0.0;
};

struct TrainResult {
  Agent best;
  double best_val_reward = 0.0;
  std::size_t best_episode = 0;
  Agent last;
  double last_val_reward = 0.0;
  std::vector<double> episode_rewards;
  std::vector<UpdateRecord> updates;
  std::vector<EvalRecord> evals;
  std::string rng_state;
};

/// Runs cfg.episodes one-step episodes over shuffled training entries,
/// evaluating greedily on the validation split at the start, every
/// eval_every episodes and at the end; keeps the best validation agent.
TrainResult train_loop(Agent agent, const Dataset& ds, const TrainConfig& cfg,
                       const std::function<void(const std::string&)>& log = {});

std::string episode_curve_csv(const TrainResult& r);
std::string update_curve_csv(const TrainResult& r);

}  // namespace vnfscale

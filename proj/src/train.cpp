// SPDX-License-Identifier: Apache-2.0
#include "vnfscale/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "vnfscale/error.hpp"

namespace vnfscale {

using diff::Tensor;

namespace {

bool trainable(const Agent& agent, const std::string& name) {
  return !(agent.config.encoder.frozen && name.rfind("encoder/", 0) == 0);
}

diff::AdamConfig adam(double lr) {
  diff::AdamConfig c;
  c.lr = lr;
  return c;
}

double value_lr(const TrainConfig& cfg) { return cfg.algorithm == Algorithm::Ppg ? cfg.lr_value : cfg.lr; }

std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t size, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t k = 0; k < n; k += size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(k),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, k + size)));
  return out;
}

// Per-sample advantages, standardised within the batch when requested.
std::vector<double> advantages(const std::vector<Transition>& buffer, const std::function<double(const Transition&)>& base,
                               bool normalize) {
  std::vector<double> a;
  a.reserve(buffer.size());
  for (const auto& tr : buffer) a.push_back(tr.ret - base(tr));
  if (normalize && a.size() > 1) {
    const double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
    double var = 0.0;
    for (double x : a) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / static_cast<double>(a.size()));
    for (double& x : a) x = (x - mean) / (sd + 1e-8);
  }
  return a;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Reinforce: return "reinforce";
    case Algorithm::Ppo: return "ppo";
    case Algorithm::Ppg: return "ppg";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& s) {
  if (s == "reinforce") return Algorithm::Reinforce;
  if (s == "ppo") return Algorithm::Ppo;
  if (s == "ppg") return Algorithm::Ppg;
  throw Error(Errc::ParseError, "unknown algorithm '" + s + "'");
}

const char* to_string(InitMode m) {
  switch (m) {
    case InitMode::Perturbed: return "perturbed";
    case InitMode::Random: return "random";
    case InitMode::Zero: return "zero";
    case InitMode::Reference: return "reference";
  }
  return "?";
}

InitMode parse_init_mode(const std::string& s) {
  if (s == "perturbed") return InitMode::Perturbed;
  if (s == "random") return InitMode::Random;
  if (s == "zero") return InitMode::Zero;
  if (s == "reference") return InitMode::Reference;
  throw Error(Errc::ParseError, "unknown initial deployment '" + s + "'");
}

void TrainConfig::validate() const {
  if (n_ppo == 0 || n_ppg == 0 || minibatch == 0 || epochs == 0 || eval_every == 0)
    throw Error(Errc::InvalidArgument, "training intervals must be positive");
  if (epsilon < 0.0 || lr <= 0.0 || lr_value <= 0.0 || max_grad_norm < 0.0) throw Error(Errc::InvalidArgument, "invalid step sizes");
  if (n_ppg % n_ppo != 0)
    throw Error(Errc::PhaseMisalignment, "n_ppg=" + std::to_string(n_ppg) + " is not a multiple of n_ppo=" +
                                             std::to_string(n_ppo));
}

io::Json to_json(const TrainConfig& c) {
  return io::Json{{"algorithm", to_string(c.algorithm)},
                  {"alpha", c.alpha},
                  {"lr", c.lr},
                  {"lr_value", c.lr_value},
                  {"gamma", c.gamma},
                  {"epsilon", c.epsilon},
                  {"epochs", c.epochs},
                  {"minibatch", c.minibatch},
                  {"n_ppo", c.n_ppo},
                  {"n_ppg", c.n_ppg},
                  {"beta_clone", c.beta_clone},
                  {"episodes", c.episodes},
                  {"eval_every", c.eval_every},
                  {"seed", c.seed},
                  {"baseline_decay", c.baseline_decay},
                  {"fresh_perturbation", c.fresh_perturbation},
                  {"normalize_advantage", c.normalize_advantage},
                  {"max_grad_norm", c.max_grad_norm},
                  {"unroutable_penalty", c.routing.unroutable_penalty},
                  {"processing_delay_ms", c.routing.processing_delay_ms}};
}

TrainConfig train_config_from_json(const io::Json& j) {
  if (!j.is_object()) throw Error(Errc::ParseError, "train config: expected an object");
  TrainConfig c;
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "algorithm") c.algorithm = parse_algorithm(v.get<std::string>());
      else if (k == "alpha") c.alpha = v.get<double>();
      else if (k == "lr") c.lr = v.get<double>();
      else if (k == "lr_value") c.lr_value = v.get<double>();
      else if (k == "gamma") c.gamma = v.get<double>();
      else if (k == "epsilon") c.epsilon = v.get<double>();
      else if (k == "epochs") c.epochs = v.get<std::size_t>();
      else if (k == "minibatch") c.minibatch = v.get<std::size_t>();
      else if (k == "n_ppo") c.n_ppo = v.get<std::size_t>();
      else if (k == "n_ppg") c.n_ppg = v.get<std::size_t>();
      else if (k == "beta_clone") c.beta_clone = v.get<double>();
      else if (k == "episodes") c.episodes = v.get<std::size_t>();
      else if (k == "eval_every") c.eval_every = v.get<std::size_t>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "baseline_decay") c.baseline_decay = v.get<double>();
      else if (k == "fresh_perturbation") c.fresh_perturbation = v.get<bool>();
      else if (k == "normalize_advantage") c.normalize_advantage = v.get<bool>();
      else if (k == "max_grad_norm") c.max_grad_norm = v.get<double>();
      else if (k == "unroutable_penalty") c.routing.unroutable_penalty = v.get<double>();
      else if (k == "processing_delay_ms") c.routing.processing_delay_ms = v.get<double>();
      else throw Error(Errc::ParseError, "train config: unknown field '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("train config: ") + e.what());
  }
  return c;
}

Transition run_episode(const Agent& agent, const Router& router, const DatasetEntry& entry, const Deployment& initial,
                       double alpha, DecodeMode mode, Rng* rng) {
  diff::NoGradGuard ng;
  const NetworkTopology& t = router.topology();
  const PolicyOutput out = run_policy(agent, t, initial, entry.requests, mode, rng);
  Transition tr;
  tr.entry_id = entry.id;
  tr.entry = &entry;
  tr.initial = initial;
  tr.grid = out.decoded.grid;
  tr.log_prob = out.decoded.joint_log_prob.item();
  tr.reward = router.reward(apply_scaling(t, initial, tr.grid), entry.requests, alpha);
  tr.ret = tr.reward;
  tr.value = state_value(out.reps.mean, agent.value).item();
  return tr;
}

diff::GradMap policy_grads(const Agent& agent) {
  return diff::collect_grads(agent.policy, [&](const std::string& n) { return trainable(agent, n); });
}

diff::GradMap policy_grads(const Agent& agent, const TrainConfig& cfg) {
  diff::GradMap g = policy_grads(agent);
  if (cfg.max_grad_norm > 0.0) diff::clip_grad_norm(g, cfg.max_grad_norm);
  return g;
}

double reinforce_update(Agent& agent, const Router& router, const std::vector<Transition>& buffer, double baseline,
                        const TrainConfig& cfg) {
  if (buffer.empty()) throw Error(Errc::EmptyBuffer, "reinforce_update on an empty buffer");
  agent.policy.zero_grad();
  const double inv = 1.0 / static_cast<double>(buffer.size());
  double loss_value = 0.0;
  const auto adv_all = advantages(buffer, [&](const Transition&) { return baseline; }, cfg.normalize_advantage);
  for (std::size_t k = 0; k < buffer.size(); ++k) {
    const Transition& tr = buffer[k];
    const PolicyOutput out =
        run_policy(agent, router.topology(), tr.initial, tr.entry->requests, DecodeMode::Given, nullptr, &tr.grid);
    const double adv = adv_all[k];
    const Tensor loss = diff::scale(out.decoded.joint_log_prob, -adv * inv);
    loss_value += loss.item();
    diff::backward(loss);
  }
  diff::adam_step(agent.policy, policy_grads(agent, cfg), adam(cfg.lr));
  return loss_value;
}

double clipped_surrogate(double ratio, double advantage, double epsilon) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage);
}

LossReport ppo_update(Agent& agent, const Router& router, const std::vector<Transition>& buffer, const TrainConfig& cfg,
                      Rng& rng) {
  if (buffer.empty()) throw Error(Errc::EmptyBuffer, "ppo_update on an empty buffer");
  LossReport rep;
  std::size_t steps = 0;
  const auto adv_all = advantages(buffer, [](const Transition& tr) { return tr.value; }, cfg.normalize_advantage);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& mb : minibatches(buffer.size(), cfg.minibatch, rng)) {
      agent.policy.zero_grad();
      agent.value.zero_grad();
      const double inv = 1.0 / static_cast<double>(mb.size());
      double pl = 0.0, vl = 0.0;
      for (std::size_t k : mb) {
        const Transition& tr = buffer[k];
        const PolicyOutput out =
            run_policy(agent, router.topology(), tr.initial, tr.entry->requests, DecodeMode::Given, nullptr, &tr.grid);
        const double adv = adv_all[k];
        const Tensor ratio = diff::exp(diff::add_scalar(out.decoded.joint_log_prob, -tr.log_prob));
        const Tensor surr = diff::minimum(diff::scale(ratio, adv),
                                          diff::scale(diff::clamp(ratio, 1.0 - cfg.epsilon, 1.0 + cfg.epsilon), adv));
        const Tensor v = state_value(out.reps.mean.detach(), agent.value);
        const Tensor policy_loss = diff::scale(surr, -inv);
        const Tensor value_loss = diff::scale(diff::square(diff::add_scalar(v, -tr.ret)), inv);
        pl += policy_loss.item();
        vl += value_loss.item();
        diff::backward(diff::add(policy_loss, value_loss));
      }
      diff::adam_step(agent.policy, policy_grads(agent, cfg), adam(cfg.lr));
      diff::adam_step(agent.value, diff::collect_grads(agent.value), adam(value_lr(cfg)));
      rep.policy_loss += pl;
      rep.value_loss += vl;
      ++steps;
    }
  }
  rep.policy_loss /= static_cast<double>(steps);
  rep.value_loss /= static_cast<double>(steps);
  return rep;
}

double ppg_aux_update(Agent& agent, const Router& router, const std::vector<Transition>& states, const TrainConfig& cfg,
                      Rng& rng) {
  if (states.empty()) throw Error(Errc::EmptyBuffer, "auxiliary phase without retained states");
  const NetworkTopology& t = router.topology();
  std::vector<Tensor> old_logp(states.size());
  std::vector<double> target(states.size());
  {
    diff::NoGradGuard ng;
    for (std::size_t k = 0; k < states.size(); ++k) {
      const PolicyOutput out = run_policy(agent, t, states[k].initial, states[k].entry->requests, DecodeMode::Greedy);
      old_logp[k] = out.decoded.log_probs.detach();
      target[k] = state_value(out.reps.mean, agent.value).item();
    }
  }
  double total = 0.0;
  std::size_t steps = 0;
  for (const auto& mb : minibatches(states.size(), cfg.minibatch, rng)) {
    agent.policy.zero_grad();
    const double inv = 1.0 / static_cast<double>(mb.size());
    double l = 0.0;
    for (std::size_t k : mb) {
      const PolicyOutput out = run_policy(agent, t, states[k].initial, states[k].entry->requests, DecodeMode::Greedy);
      const AuxValue aux = aux_value(out.decoded.z, agent.policy);
      const Tensor value_term = diff::scale(diff::square(diff::add_scalar(aux.v_aux, -target[k])), 0.5);
      const Tensor kl = categorical_kl(old_logp[k], out.decoded.log_probs);
      const Tensor loss = diff::scale(diff::add(value_term, diff::scale(kl, cfg.beta_clone)), inv);
      l += loss.item();
      diff::backward(loss);
    }
    diff::adam_step(agent.policy, policy_grads(agent, cfg), adam(cfg.lr));
    total += l;
    ++steps;
  }
  return total / static_cast<double>(steps);
}

Deployment initial_deployment(const NetworkTopology& t, const DatasetEntry& entry, InitMode init) {
  switch (init) {
    case InitMode::Perturbed: return entry.initial_deployment;
    case InitMode::Random: return random_deployment(t, mix_seed(entry.seed, 3));
    case InitMode::Zero: return zero_deployment(t);
    case InitMode::Reference: return entry.reference_deployment;
  }
  return entry.initial_deployment;
}

Metrics evaluate_agent(const Agent& agent, const NetworkTopology& t, const std::vector<DatasetEntry>& entries,
                       double alpha, InitMode init, const RoutingConfig& routing) {
  if (entries.empty()) throw Error(Errc::InvalidArgument, "evaluation split is empty");
  const Router router(t, routing);
  std::vector<Metrics> ms;
  ms.reserve(entries.size());
  for (const auto& e : entries) {
    const Deployment start = initial_deployment(t, e, init);
    const Deployment end =
        init == InitMode::Reference ? start : apply_scaling(t, start, greedy_grid(agent, t, start, e.requests));
    ms.push_back(evaluate(router, end, e.requests, alpha));
  }
  return average(ms);
}

Metrics evaluate_random_policy(const NetworkTopology& t, const std::vector<DatasetEntry>& entries, double alpha,
                               std::size_t samples, std::uint64_t seed, const RoutingConfig& routing) {
  if (entries.empty() || samples == 0) throw Error(Errc::InvalidArgument, "random-policy evaluation needs entries");
  const Router router(t, routing);
  Rng rng(seed);
  std::vector<Metrics> ms;
  for (const auto& e : entries)
    for (std::size_t s = 0; s < samples; ++s) {
      ScalingGrid g = ScalingGrid::filled(t, Action::Keep);
      for (auto& a : g.actions) a = static_cast<Action>(rng.below(kNumActions));
      ms.push_back(evaluate(router, apply_scaling(t, e.initial_deployment, g), e.requests, alpha));
    }
  return average(ms);
}

TrainResult train_loop(Agent agent, const Dataset& ds, const TrainConfig& cfg,
                       const std::function<void(const std::string&)>& log) {
  cfg.validate();
  if (ds.train.empty() || ds.val.empty()) throw Error(Errc::InvalidArgument, "training needs train and val entries");
  const NetworkTopology& t = ds.topology;
  const Router router(t, cfg.routing);
  Rng rng(cfg.seed);

  TrainResult res;
  auto validate_now = [&](std::size_t episode) {
    const double r = evaluate_agent(agent, t, ds.val, cfg.alpha, InitMode::Perturbed, cfg.routing).reward;
    res.evals.push_back({episode, r});
    res.last_val_reward = r;
    if (res.evals.size() == 1 || r > res.best_val_reward) {
      res.best_val_reward = r;
      res.best_episode = episode;
      res.best = agent;
    }
    if (log) log("episode " + std::to_string(episode) + " val_reward " + fmt(r));
  };
  validate_now(0);

  std::vector<std::size_t> order(ds.train.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::size_t cursor = 0;

  std::vector<Transition> buffer, retained;
  std::optional<double> baseline;
  std::size_t update = 0;
  for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
    if (cursor == order.size()) {
      rng.shuffle(order);
      cursor = 0;
    }
    const DatasetEntry& entry = ds.train[order[cursor++]];
    const Deployment initial = cfg.fresh_perturbation
                                   ? perturb(t, entry.reference_deployment, mix_seed(mix_seed(cfg.seed, 0xE9), ep))
                                   : entry.initial_deployment;
    buffer.push_back(run_episode(agent, router, entry, initial, cfg.alpha, DecodeMode::Sample, &rng));
    res.episode_rewards.push_back(buffer.back().reward);

    if (buffer.size() == cfg.n_ppo) {
      UpdateRecord rec;
      rec.update = ++update;
      if (cfg.algorithm == Algorithm::Reinforce) {
        double mean = 0.0;
        for (const auto& tr : buffer) mean += tr.ret;
        mean /= static_cast<double>(buffer.size());
        if (!baseline) baseline = mean;
        rec.policy_loss = reinforce_update(agent, router, buffer, *baseline, cfg);
        baseline = cfg.baseline_decay * *baseline + (1.0 - cfg.baseline_decay) * mean;
      } else {
        const LossReport lr = ppo_update(agent, router, buffer, cfg, rng);
        rec.policy_loss = lr.policy_loss;
        rec.value_loss = lr.value_loss;
        if (cfg.algorithm == Algorithm::Ppg) retained.insert(retained.end(), buffer.begin(), buffer.end());
      }
      res.updates.push_back(rec);
      buffer.clear();
      if (cfg.algorithm == Algorithm::Ppg && (ep + 1) % cfg.n_ppg == 0) {
        UpdateRecord aux;
        aux.update = ++update;
        aux.aux_loss = ppg_aux_update(agent, router, retained, cfg, rng);
        res.updates.push_back(aux);
        retained.clear();
      }
    }
    if ((ep + 1) % cfg.eval_every == 0 || ep + 1 == cfg.episodes) validate_now(ep + 1);
  }
  res.last = std::move(agent);
  res.rng_state = rng.state();
  return res;
}

std::string episode_curve_csv(const TrainResult& r) {
  std::ostringstream os;
  os << "episode,reward\n";
  for (std::size_t k = 0; k < r.episode_rewards.size(); ++k) os << k + 1 << ',' << fmt(r.episode_rewards[k]) << '\n';
  return os.str();
}

std::string update_curve_csv(const TrainResult& r) {
  std::ostringstream os;
  os << "update,policy_loss,value_loss,aux_loss\n";
  auto cell = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
  for (const auto& u : r.updates)
    os << u.update << ',' << cell(u.policy_loss) << ',' << cell(u.value_loss) << ',' << cell(u.aux_loss) << '\n';
  return os.str();
}

}  // namespace vnfscale

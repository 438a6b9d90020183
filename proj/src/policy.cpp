// SPDX-License-Identifier: Apache-2.0
#include "vnfscale/policy.hpp"

#include <cmath>
#include <cstdio>

#include "vnfscale/error.hpp"

namespace vnfscale {

using diff::ParamStore;
using diff::Tensor;

namespace {

constexpr const char* kCheckpointFormat = "vnfscale-checkpoint";
constexpr int kCheckpointVersion = 1;
constexpr double kDecoderNormEps = 1e-5;

std::vector<std::size_t> with_ends(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

}  // namespace

std::size_t PolicyConfig::decoder_input_dim() const {
  return encoder.hidden_dim + vnf_embedding_dim + (positional_encoding ? pe_dim : 0);
}

void PolicyConfig::validate() const {
  encoder.validate();
  if (positional_encoding && pe_dim % 2 != 0) throw Error(Errc::OddDim, "positional encoding width must be even");
  if (gru_hidden == 0 || vnf_embedding_dim == 0) throw Error(Errc::InvalidArgument, "decoder widths must be positive");
}

io::Json to_json(const PolicyConfig& c) {
  return io::Json{{"encoder", to_json(c.encoder)},
                  {"positional_encoding", c.positional_encoding},
                  {"vnf_embedding_dim", c.vnf_embedding_dim},
                  {"pe_dim", c.pe_dim},
                  {"gru_hidden", c.gru_hidden},
                  {"decoder_mlp", c.decoder_mlp},
                  {"value_mlp", c.value_mlp},
                  {"aux_mlp", c.aux_mlp}};
}

PolicyConfig policy_config_from_json(const io::Json& j) {
  io::expect_fields(j, {"encoder", "positional_encoding", "vnf_embedding_dim", "pe_dim", "gru_hidden", "decoder_mlp",
                        "value_mlp", "aux_mlp"},
                    "policy config");
  PolicyConfig c;
  c.encoder = encoder_config_from_json(j.at("encoder"));
  c.positional_encoding = j.at("positional_encoding").get<bool>();
  c.vnf_embedding_dim = j.at("vnf_embedding_dim").get<std::size_t>();
  c.pe_dim = j.at("pe_dim").get<std::size_t>();
  c.gru_hidden = j.at("gru_hidden").get<std::size_t>();
  c.decoder_mlp = j.at("decoder_mlp").get<std::vector<std::size_t>>();
  c.value_mlp = j.at("value_mlp").get<std::vector<std::size_t>>();
  c.aux_mlp = j.at("aux_mlp").get<std::vector<std::size_t>>();
  return c;
}

std::string config_hash(const PolicyConfig& c) {
  const std::string s = to_json(c).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Agent make_agent(const PolicyConfig& cfg, const NetworkTopology& t, std::uint64_t seed) {
  cfg.validate();
  Agent a;
  a.config = cfg;
  Rng rng(seed);
  init_encoder(a.policy, cfg.encoder, t, rng);
  a.policy.add_uniform("decoder/vnf_emb", kNumVnfTypes, cfg.vnf_embedding_dim, 0.1, rng);
  a.policy.add_filled("decoder/ln/gain", 1, cfg.decoder_input_dim(), 1.0);
  a.policy.add_zeros("decoder/ln/bias", 1, cfg.decoder_input_dim());
  diff::add_gru(a.policy, "decoder/gru", cfg.decoder_input_dim(), cfg.gru_hidden, rng);
  diff::add_mlp(a.policy, "decoder/mlp", with_ends(cfg.gru_hidden, cfg.decoder_mlp, kNumActions), rng);
  diff::add_mlp(a.policy, "aux/mlp", with_ends(cfg.gru_hidden, cfg.aux_mlp, 1), rng);
  diff::add_mlp(a.value, "value/mlp", with_ends(cfg.encoder.hidden_dim, cfg.value_mlp, 1), rng);
  return a;
}

Decoded decode_actions(const Tensor& hbar, const NetworkTopology& t, const PolicyConfig& cfg, const ParamStore& policy,
                       DecodeMode mode, Rng* rng, const ScalingGrid* given) {
  if (hbar.rows() != t.size() || hbar.cols() != cfg.encoder.hidden_dim)
    throw Error(Errc::ShapeMismatch, "decode_actions: H-bar is " + std::to_string(hbar.rows()) + "x" +
                                         std::to_string(hbar.cols()) + ", expected " + std::to_string(t.size()) + "x" +
                                         std::to_string(cfg.encoder.hidden_dim));
  const std::vector<int> targets = t.deployable_nodes();
  const std::size_t steps = targets.size();
  const std::size_t rows = steps * kNumVnfTypes;
  if (mode == DecodeMode::Given && (!given || given->nodes != targets || given->actions.size() != rows))
    throw Error(Errc::ShapeMismatch, "decode_actions: given grid does not cover the deployable nodes");
  if (mode == DecodeMode::Sample && !rng) throw Error(Errc::InvalidArgument, "decode_actions: sampling needs an rng");

  // All step inputs at once: row step*5+v = [h_i | e_v | l_i].
  std::vector<std::size_t> node_idx(rows), vnf_idx(rows);
  std::vector<double> pe;
  for (std::size_t s = 0; s < steps; ++s) {
    const auto l = cfg.positional_encoding ? positional_encoding(static_cast<std::size_t>(targets[s]), cfg.pe_dim)
                                           : std::vector<double>{};
    for (std::size_t v = 0; v < kNumVnfTypes; ++v) {
      node_idx[s * kNumVnfTypes + v] = static_cast<std::size_t>(targets[s]);
      vnf_idx[s * kNumVnfTypes + v] = v;
      pe.insert(pe.end(), l.begin(), l.end());
    }
  }
  std::vector<Tensor> parts{diff::gather_rows(hbar, node_idx), diff::gather_rows(policy.get("decoder/vnf_emb"), vnf_idx)};
  if (cfg.positional_encoding) parts.push_back(Tensor::constant(rows, cfg.pe_dim, std::move(pe)));
  const Tensor x = diff::layer_norm(diff::concat_cols(parts), policy.get("decoder/ln/gain"), policy.get("decoder/ln/bias"),
                                    kDecoderNormEps);

  const auto gru = diff::gru_weights(policy, "decoder/gru");
  Tensor h = Tensor::zeros(kNumVnfTypes, cfg.gru_hidden);
  std::vector<Tensor> zs;
  zs.reserve(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    h = diff::gru_cell(diff::slice_rows(x, s * kNumVnfTypes, kNumVnfTypes), h, gru);
    zs.push_back(h);
  }

  Decoded out;
  out.z = steps == 1 ? zs[0] : diff::concat_rows(zs);
  const auto head = diff::mlp_weights(policy, "decoder/mlp", cfg.decoder_mlp.size() + 1);
  out.log_probs = diff::log_softmax_rows(diff::mlp_forward(out.z, head));

  out.grid.nodes = targets;
  out.grid.actions.resize(rows);
  out.chosen.resize(rows);
  const auto lp = out.log_probs.values();
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t a = 0;
    if (mode == DecodeMode::Given) {
      a = static_cast<std::size_t>(given->actions[r]);
    } else if (mode == DecodeMode::Greedy) {
      for (std::size_t k = 1; k < kNumActions; ++k)
        if (lp[r * kNumActions + k] > lp[r * kNumActions + a]) a = k;
    } else {
      const double u = rng->uniform();
      double acc = 0.0;
      a = kNumActions - 1;
      for (std::size_t k = 0; k < kNumActions; ++k) {
        acc += std::exp(lp[r * kNumActions + k]);
        if (u < acc) {
          a = k;
          break;
        }
      }
    }
    out.chosen[r] = a;
    out.grid.actions[r] = static_cast<Action>(a);
  }
  std::vector<double> pick(rows * kNumActions, 0.0);
  for (std::size_t r = 0; r < rows; ++r) pick[r * kNumActions + out.chosen[r]] = 1.0;
  out.joint_log_prob = diff::sum_all(diff::mul(out.log_probs, Tensor::constant(rows, kNumActions, std::move(pick))));
  return out;
}

Tensor state_value(const Tensor& hbar, const ParamStore& value) {
  const std::size_t layers = [&] {
    std::size_t k = 0;
    while (value.contains("value/mlp/w" + std::to_string(k))) ++k;
    return k;
  }();
  const auto mlp = diff::mlp_weights(value, "value/mlp", layers);
  if (hbar.cols() != mlp.weights.front().rows())
    throw Error(Errc::ShapeMismatch, "state_value: H-bar width " + std::to_string(hbar.cols()) + " vs " +
                                         std::to_string(mlp.weights.front().rows()));
  return diff::mlp_forward(diff::mean(hbar, 0), mlp);
}

AuxValue aux_value(const Tensor& z, const ParamStore& policy) {
  if (z.rows() == 0 || z.rows() % kNumVnfTypes != 0)
    throw Error(Errc::ShapeMismatch, "aux_value: z has " + std::to_string(z.rows()) + " rows");
  std::size_t layers = 0;
  while (policy.contains("aux/mlp/w" + std::to_string(layers))) ++layers;
  const auto mlp = diff::mlp_weights(policy, "aux/mlp", layers);
  if (z.cols() != mlp.weights.front().rows()) throw Error(Errc::ShapeMismatch, "aux_value: z width");
  const std::size_t steps = z.rows() / kNumVnfTypes;
  std::vector<std::size_t> idx(z.rows());
  for (std::size_t r = 0; r < idx.size(); ++r) idx[r] = r / kNumVnfTypes;
  AuxValue out;
  out.per_node = diff::mlp_forward(diff::scatter_add_rows(z, idx, steps), mlp);
  out.v_aux = diff::mean_all(out.per_node);
  return out;
}

PolicyOutput run_policy(const Agent& agent, const NetworkTopology& t, const Deployment& d,
                        const std::vector<SfcRequest>& requests, DecodeMode mode, Rng* rng, const ScalingGrid* given) {
  PolicyOutput out;
  out.reps = encode_state(t, d, requests, agent.config.encoder, agent.policy);
  out.decoded = decode_actions(out.reps.mean, t, agent.config, agent.policy, mode, rng, given);
  return out;
}

ScalingGrid greedy_grid(const Agent& agent, const NetworkTopology& t, const Deployment& d,
                        const std::vector<SfcRequest>& requests) {
  diff::NoGradGuard ng;
  return run_policy(agent, t, d, requests, DecodeMode::Greedy).decoded.grid;
}

Tensor categorical_kl(const Tensor& logp, const Tensor& logq) {
  return diff::sum_all(diff::mul(diff::exp(logp), diff::sub(logp, logq)));
}

io::Json checkpoint_to_json(const Checkpoint& c) {
  return io::Json{{"format", kCheckpointFormat},
                  {"version", kCheckpointVersion},
                  {"config", to_json(c.agent.config)},
                  {"config_hash", config_hash(c.agent.config)},
                  {"policy", diff::to_json(c.agent.policy)},
                  {"value", diff::to_json(c.agent.value)},
                  {"rng_state", c.rng_state},
                  {"extra", c.extra}};
}

Checkpoint checkpoint_from_json(const io::Json& j, const PolicyConfig* expected) {
  Checkpoint c;
  try {
    if (!j.is_object() || j.value("format", std::string{}) != kCheckpointFormat)
      throw Error(Errc::CorruptCheckpoint, "not a checkpoint document");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw Error(Errc::VersionMismatch, "checkpoint version " + j.at("version").dump());
    io::expect_fields(j, {"format", "version", "config", "config_hash", "policy", "value", "rng_state", "extra"},
                      "checkpoint");
    c.agent.config = policy_config_from_json(j.at("config"));
    const std::string stored = j.at("config_hash").get<std::string>();
    if (stored != config_hash(c.agent.config)) throw Error(Errc::CorruptCheckpoint, "config hash does not match config");
    if (expected && config_hash(*expected) != stored)
      throw Error(Errc::VersionMismatch, "checkpoint config " + stored + " differs from expected " + config_hash(*expected));
    c.agent.policy = diff::store_from_json(j.at("policy"));
    c.agent.value = diff::store_from_json(j.at("value"));
    c.rng_state = j.at("rng_state").get<std::string>();
    c.extra = j.at("extra");
  } catch (const Error& e) {
    if (e.code() == Errc::VersionMismatch || e.code() == Errc::CorruptCheckpoint) throw;
    throw Error(Errc::CorruptCheckpoint, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptCheckpoint, e.what());
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) { io::write_json(path, checkpoint_to_json(c)); }

Checkpoint load_checkpoint(const std::filesystem::path& path, const PolicyConfig* expected) {
  io::Json j;
  try {
    j = io::read_json(path);
  } catch (const Error& e) {
    if (e.code() == Errc::Io) throw;
    throw Error(Errc::CorruptCheckpoint, e.what());
  }
  return checkpoint_from_json(j, expected);
}

}  // namespace vnfscale

// SPDX-License-Identifier: Apache-2.0
//
// Scaling policy: the GRU decoder that emits one in/keep/out distribution per
// (deployable node, VNF type), the separate state-value network, the
// auxiliary value head sharing the decoder, and checkpoint persistence.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vnfscale/encoder.hpp"

namespace vnfscale {

struct PolicyConfig {
  EncoderConfig encoder;
  bool positional_encoding = true;
  std::size_t vnf_embedding_dim = 5;
  std::size_t pe_dim = 4;
  std::size_t gru_hidden = 64;
  std::vector<std::size_t> decoder_mlp = {32, 32};
  std::vector<std::size_t> value_mlp = {128, 64};
  std::vector<std::size_t> aux_mlp = {32, 32};

  /// Width of one decoder step input.
  std::size_t decoder_input_dim() const;
  void validate() const;
};

io::Json to_json(const PolicyConfig& c);
PolicyConfig policy_config_from_json(const io::Json& j);
/// FNV-1a over the canonical JSON form, as 16 hex digits.
std::string config_hash(const PolicyConfig& c);

/// Policy parameters (`encoder/`, `decoder/`, `aux/`) and the separately
/// optimised value network (`value/`).
struct Agent {
  PolicyConfig config;
  diff::ParamStore policy;
  diff::ParamStore value;
};

Agent make_agent(const PolicyConfig& cfg, const NetworkTopology& t, std::uint64_t seed);

enum class DecodeMode { Sample, Greedy, Given };

struct Decoded {
  ScalingGrid grid;
  diff::Tensor log_probs;            // [S*5 x 3], row = step * 5 + vnf
  std::vector<std::size_t> chosen;   // action index per row
  diff::Tensor joint_log_prob;       // [1 x 1], sum of chosen log-probs
  diff::Tensor z;                    // [S*5 x gru_hidden] decoder outputs
};

/// One GRU sequence per VNF type over the deployable nodes in ascending id
/// order, all types advanced together as rows of one batch. Sample draws one
/// uniform per row from `rng`; Greedy breaks ties In < Keep < Out; Given
/// scores the actions of `given`. Throws ShapeMismatch.
Decoded decode_actions(const diff::Tensor& hbar, const NetworkTopology& t, const PolicyConfig& cfg,
                       const diff::ParamStore& policy, DecodeMode mode, Rng* rng = nullptr,
                       const ScalingGrid* given = nullptr);

/// V(s) from the node-mean of H-bar. Callers pass a detached H-bar so the
/// value loss never reaches the encoder.
diff::Tensor state_value(const diff::Tensor& hbar, const diff::ParamStore& value);

struct AuxValue {
  diff::Tensor v_aux;     // [1 x 1]
  diff::Tensor per_node;  // [S x 1]
};

/// V_i = f_aux(sum_v z_{i,v}); v_aux = mean_i V_i.
AuxValue aux_value(const diff::Tensor& z, const diff::ParamStore& policy);

/// Encoder plus decoder for one state.
struct PolicyOutput {
  NodeRepresentations reps;
  Decoded decoded;
};

PolicyOutput run_policy(const Agent& agent, const NetworkTopology& t, const Deployment& d,
                        const std::vector<SfcRequest>& requests, DecodeMode mode, Rng* rng = nullptr,
                        const ScalingGrid* given = nullptr);

/// Gradient-free greedy decision.
ScalingGrid greedy_grid(const Agent& agent, const NetworkTopology& t, const Deployment& d,
                        const std::vector<SfcRequest>& requests);

/// Per-row categorical KL(p || q) summed over rows, from log-probabilities.
diff::Tensor categorical_kl(const diff::Tensor& logp, const diff::Tensor& logq);

struct Checkpoint {
  Agent agent;
  std::string rng_state;
  io::Json extra = io::Json::object();
};

io::Json checkpoint_to_json(const Checkpoint& c);
/// Throws CorruptCheckpoint, or VersionMismatch on a format version or
/// config-hash mismatch (when `expected` is given).
Checkpoint checkpoint_from_json(const io::Json& j, const PolicyConfig* expected = nullptr);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path, const PolicyConfig* expected = nullptr);

}  // namespace vnfscale

// SPDX-License-Identifier: Apache-2.0
//
// Graph encoders producing per-request node representations: multi-head GAT
// with scalar edge attributes, the GGNN baseline, the learned node-embedding
// side module for non-deployable nodes, and sinusoidal positional encodings.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vnfscale/dataset.hpp"
#include "vnfscale/diff/layers.hpp"
#include "vnfscale/net_model.hpp"

namespace vnfscale {

enum class EncoderKind { Gat, Ggnn };

const char* to_string(EncoderKind k);
EncoderKind parse_encoder_kind(const std::string& s);

struct EncoderConfig {
  EncoderKind kind = EncoderKind::Gat;
  std::size_t hidden_dim = 64;
  std::size_t heads = 4;
  std::size_t layers = 2;
  bool use_node_embedding = true;
  std::size_t node_embedding_dim = 8;
  std::size_t aux_dim = 16;
  std::size_t ggnn_steps = 4;
  bool frozen = false;

  /// Throws InvalidArgument on inconsistent dimensions.
  void validate() const;
};

io::Json to_json(const EncoderConfig& c);
EncoderConfig encoder_config_from_json(const io::Json& j);

/// Disjoint union of `graphs` copies of one topology, as an edge list in
/// which target nodes aggregate from source nodes. Node k of copy g is row
/// g * nodes + k.
struct GraphBatch {
  std::size_t nodes = 0;
  std::size_t graphs = 0;
  std::vector<std::size_t> target;
  std::vector<std::size_t> source;
  std::vector<double> attr;  // 1/latency, 0 on self edges

  std::size_t rows() const { return nodes * graphs; }
  std::size_t edges() const { return target.size(); }
};

GraphBatch make_graph_batch(const AdjacencyData& adj, std::size_t graphs, bool self_loops);

/// Per-edge attention coefficients of one GAT layer, [head][edge].
struct AttentionTrace {
  std::vector<std::vector<double>> alpha;
};

void add_gat_layer(diff::ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                   std::size_t heads, Rng& rng);

/// Multi-head graph attention. Per head, over N(i) and i itself:
///   e_ij = LeakyReLU_0.2(a_self.Wh_i + a_neigh.Wh_j + a_edge.(W_e attr_ij))
///   h'_i = sum_j softmax_j(e_ij) W h_j
/// Heads are concatenated; output width = heads * (out / heads).
diff::Tensor gat_layer(const diff::Tensor& h, const GraphBatch& batch, const diff::ParamStore& store,
                       const std::string& prefix, std::size_t heads, AttentionTrace* trace = nullptr);

void add_ggnn_layer(diff::ParamStore& store, const std::string& prefix, std::size_t hidden, Rng& rng);

/// `steps` rounds of h_i <- GRU(h_i, sum_{j in N(i)} attr_ij W h_j). The batch
/// must not contain self edges.
diff::Tensor ggnn_layer(const diff::Tensor& h, const GraphBatch& batch, const diff::ParamStore& store,
                        const std::string& prefix, std::size_t steps);

/// Node-embedding side module: row n_0 for deployable nodes, a dedicated
/// row per non-deployable node, refined by a single-head GAT layer.
/// Throws TableMismatch when the table does not fit the topology.
diff::Tensor aux_node_embedding(const NetworkTopology& t, const diff::ParamStore& store, const EncoderConfig& cfg);

/// l_i[2m] = sin(i / 10000^(2m/d)), l_i[2m+1] = cos(...). Throws OddDim.
std::vector<double> positional_encoding(std::size_t i, std::size_t d);

/// Creates every `encoder/` parameter for the given topology.
void init_encoder(diff::ParamStore& store, const EncoderConfig& cfg, const NetworkTopology& t, Rng& rng);

/// Encodes each feature matrix independently; rows are request-major.
diff::Tensor encode_batch(const NetworkTopology& t, const std::vector<FeatureMatrix>& features,
                          const EncoderConfig& cfg, const diff::ParamStore& store);

struct NodeRepresentations {
  diff::Tensor per_request;  // [R*N x hidden]
  diff::Tensor mean;         // [N x hidden]
  std::size_t requests = 0;
};

/// Throws EmptyRequestSet.
NodeRepresentations encode_state(const NetworkTopology& t, const Deployment& d, const std::vector<SfcRequest>& requests,
                                 const EncoderConfig& cfg, const diff::ParamStore& store);

struct PretrainConfig {
  std::size_t steps = 200;
  std::size_t entries_per_step = 4;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

struct PretrainReport {
  double final_loss = 0.0;
  double train_accuracy = 0.0;
  std::size_t samples = 0;
};

/// Supervised next-hop prediction against the routing oracle's paths under
/// each entry's reference deployment. Updates the `encoder/` parameters of
/// `store` in place; optimizer moments in `store` are not touched.
PretrainReport pretrain_encoder(const NetworkTopology& t, const std::vector<DatasetEntry>& entries,
                                const EncoderConfig& cfg, diff::ParamStore& store, const PretrainConfig& pcfg,
                                const RoutingConfig& routing = {});

/// Accuracy of the trained query head kept in `head` (see pretrain_encoder).
struct NextHopEval {
  double accuracy = 0.0;
  double chance = 0.0;  // 1 / max degree
  std::size_t samples = 0;
};

NextHopEval evaluate_next_hop(const NetworkTopology& t, const std::vector<DatasetEntry>& entries,
                              const EncoderConfig& cfg, const diff::ParamStore& store,
                              const diff::ParamStore& head, const RoutingConfig& routing = {});

/// Like pretrain_encoder but also returns the trained query head.
PretrainReport pretrain_encoder_with_head(const NetworkTopology& t, const std::vector<DatasetEntry>& entries,
                                          const EncoderConfig& cfg, diff::ParamStore& store,
                                          diff::ParamStore& head, const PretrainConfig& pcfg,
                                          const RoutingConfig& routing = {});

}  // namespace vnfscale

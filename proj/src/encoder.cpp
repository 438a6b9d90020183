// SPDX-License-Identifier: Apache-2.0
#include "vnfscale/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vnfscale/error.hpp"
#include "vnfscale/routing.hpp"

namespace vnfscale {

using diff::ParamStore;
using diff::Tensor;

namespace {

constexpr double kLeakySlope = 0.2;

std::string layer_name(std::size_t k) { return "encoder/gat" + std::to_string(k); }

// Per-segment maximum, broadcast back to the segment's entries. Subtracting a
// constant leaves a softmax and its gradient unchanged.
Tensor segment_shift(const Tensor& e, const std::vector<std::size_t>& seg, std::size_t segments) {
  std::vector<double> mx(segments, -std::numeric_limits<double>::infinity());
  const auto v = e.values();
  for (std::size_t k = 0; k < seg.size(); ++k) mx[seg[k]] = std::max(mx[seg[k]], v[k]);
  std::vector<double> out(seg.size());
  for (std::size_t k = 0; k < seg.size(); ++k) out[k] = mx[seg[k]];
  return Tensor::constant(seg.size(), 1, std::move(out));
}

// Softmax of e [E x 1] within groups given by seg.
Tensor segment_softmax(const Tensor& e, const std::vector<std::size_t>& seg, std::size_t segments) {
  const Tensor ex = diff::exp(diff::sub(e, segment_shift(e, seg, segments)));
  const Tensor denom = diff::scatter_add_rows(ex, seg, segments);
  return diff::div(ex, diff::gather_rows(denom, seg));
}

std::vector<std::size_t> embedding_index(const NetworkTopology& t) {
  std::vector<std::size_t> idx(t.size(), 0);
  std::size_t k = 0;
  for (const auto& n : t.nodes)
    if (!n.deployable) idx[static_cast<std::size_t>(n.id)] = ++k;
  return idx;
}

Tensor replicate_rows(const Tensor& x, std::size_t copies) {
  std::vector<std::size_t> idx(x.rows() * copies);
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k % x.rows();
  return diff::gather_rows(x, idx);
}

struct NextHopSample {
  std::size_t row;     // request-major row of the current node
  std::size_t label;   // candidate position of the oracle next hop
  std::size_t first;   // first candidate index
  std::size_t count;   // number of candidates
};

struct NextHopBatch {
  std::vector<FeatureMatrix> features;
  std::vector<NextHopSample> samples;
  std::vector<std::size_t> cand_from, cand_to, cand_seg;
};

NextHopBatch build_next_hop_batch(const NetworkTopology& t, const std::vector<const DatasetEntry*>& entries,
                                  const Router& router) {
  const std::size_t n = t.size();
  std::vector<std::vector<int>> nbrs(n);
  for (const auto& l : t.links) {
    nbrs[static_cast<std::size_t>(l.u)].push_back(l.v);
    nbrs[static_cast<std::size_t>(l.v)].push_back(l.u);
  }
  for (auto& v : nbrs) std::sort(v.begin(), v.end());

  NextHopBatch b;
  for (const DatasetEntry* e : entries) {
    for (const auto& r : e->requests) {
      const PathResult p = router.route(e->reference_deployment, r);
      if (!p.routable) continue;
      const std::size_t block = b.features.size() * n;
      b.features.push_back(node_features(t, e->reference_deployment, r));
      std::vector<char> seen(n, 0);
      for (std::size_t k = 0; k + 1 < p.hops.size(); ++k) {
        const auto i = static_cast<std::size_t>(p.hops[k]);
        if (seen[i]) continue;
        seen[i] = 1;
        NextHopSample s{block + i, 0, b.cand_from.size(), nbrs[i].size()};
        for (std::size_t c = 0; c < nbrs[i].size(); ++c) {
          if (nbrs[i][c] == p.hops[k + 1]) s.label = c;
          b.cand_from.push_back(block + i);
          b.cand_to.push_back(block + static_cast<std::size_t>(nbrs[i][c]));
          b.cand_seg.push_back(b.samples.size());
        }
        b.samples.push_back(s);
      }
    }
  }
  return b;
}

// Candidate scores (h_i Q) . h_j, one per (sample, neighbour) pair.
Tensor next_hop_scores(const Tensor& h, const NextHopBatch& b, const ParamStore& head) {
  const Tensor q = diff::matmul(h, head.get("pretrain/query"));
  return diff::sum(diff::mul(diff::gather_rows(q, b.cand_from), diff::gather_rows(h, b.cand_to)), 1);
}

std::pair<std::size_t, std::size_t> count_correct(const Tensor& scores, const NextHopBatch& b) {
  std::size_t correct = 0;
  const auto s = scores.values();
  for (const auto& smp : b.samples) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < smp.count; ++c)
      if (s[smp.first + c] > s[smp.first + best]) best = c;
    if (best == smp.label) ++correct;
  }
  return {correct, b.samples.size()};
}

}  // namespace

const char* to_string(EncoderKind k) { return k == EncoderKind::Gat ? "gat" : "ggnn"; }

EncoderKind parse_encoder_kind(const std::string& s) {
  if (s == "gat") return EncoderKind::Gat;
  if (s == "ggnn") return EncoderKind::Ggnn;
  throw Error(Errc::ParseError, "unknown encoder '" + s + "'");
}

void EncoderConfig::validate() const {
  if (hidden_dim == 0 || heads == 0 || layers == 0) throw Error(Errc::InvalidArgument, "encoder dimensions must be positive");
  if (kind == EncoderKind::Gat && hidden_dim % heads != 0)
    throw Error(Errc::InvalidArgument, "hidden_dim must be divisible by heads");
  if (kind == EncoderKind::Ggnn && hidden_dim < kFeatureWidth)
    throw Error(Errc::InvalidArgument, "GGNN hidden_dim must hold the raw node features");
  if (use_node_embedding && (aux_dim == 0 || aux_dim >= hidden_dim))
    throw Error(Errc::InvalidArgument, "node-embedding output width must be in (0, hidden_dim)");
}

io::Json to_json(const EncoderConfig& c) {
  return io::Json{{"kind", to_string(c.kind)},
                  {"hidden_dim", c.hidden_dim},
                  {"heads", c.heads},
                  {"layers", c.layers},
                  {"use_node_embedding", c.use_node_embedding},
                  {"node_embedding_dim", c.node_embedding_dim},
                  {"aux_dim", c.aux_dim},
                  {"ggnn_steps", c.ggnn_steps},
                  {"frozen", c.frozen}};
}

EncoderConfig encoder_config_from_json(const io::Json& j) {
  io::expect_fields(j, {"kind", "hidden_dim", "heads", "layers", "use_node_embedding", "node_embedding_dim",
                        "aux_dim", "ggnn_steps", "frozen"},
                    "encoder config");
  EncoderConfig c;
  c.kind = parse_encoder_kind(j.at("kind").get<std::string>());
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.use_node_embedding = j.at("use_node_embedding").get<bool>();
  c.node_embedding_dim = j.at("node_embedding_dim").get<std::size_t>();
  c.aux_dim = j.at("aux_dim").get<std::size_t>();
  c.ggnn_steps = j.at("ggnn_steps").get<std::size_t>();
  c.frozen = j.at("frozen").get<bool>();
  return c;
}

GraphBatch make_graph_batch(const AdjacencyData& adj, std::size_t graphs, bool self_loops) {
  GraphBatch b;
  b.nodes = adj.n;
  b.graphs = graphs;
  for (std::size_t g = 0; g < graphs; ++g) {
    const std::size_t off = g * adj.n;
    for (std::size_t i = 0; i < adj.n; ++i)
      for (std::size_t j = 0; j < adj.n; ++j) {
        const bool self = i == j;
        if (!(self ? self_loops : adj.adj_at(i, j) != 0.0)) continue;
        b.target.push_back(off + i);
        b.source.push_back(off + j);
        b.attr.push_back(self ? 0.0 : adj.attr_at(i, j));
      }
  }
  return b;
}

void add_gat_layer(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out, std::size_t heads,
                   Rng& rng) {
  if (heads == 0 || out % heads != 0) throw Error(Errc::InvalidArgument, prefix + ": width not divisible by heads");
  const std::size_t d = out / heads;
  store.add_glorot(prefix + "/W", in, out, rng);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::string hp = prefix + "/head" + std::to_string(h);
    store.add_glorot(hp + "/a_self", d, 1, rng);
    store.add_glorot(hp + "/a_neigh", d, 1, rng);
    store.add_glorot(hp + "/a_edge", d, 1, rng);
    store.add_glorot(hp + "/w_edge", 1, d, rng);
  }
}

Tensor gat_layer(const Tensor& h, const GraphBatch& batch, const ParamStore& store, const std::string& prefix,
                 std::size_t heads, AttentionTrace* trace) {
  const Tensor& w = store.get(prefix + "/W");
  if (h.rows() != batch.rows() || h.cols() != w.rows())
    throw Error(Errc::ShapeMismatch, prefix + ": input " + std::to_string(h.rows()) + "x" + std::to_string(h.cols()) +
                                         " for " + std::to_string(batch.rows()) + " nodes and in=" + std::to_string(w.rows()));
  const std::size_t d = w.cols() / heads;
  const std::size_t m = batch.rows();
  const Tensor wh = diff::matmul(h, w);
  const Tensor attr = Tensor::constant(batch.edges(), 1, batch.attr);
  if (trace) trace->alpha.clear();
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t k = 0; k < heads; ++k) {
    const std::string hp = prefix + "/head" + std::to_string(k);
    const Tensor whk = heads == 1 ? wh : diff::slice_cols(wh, k * d, d);
    const Tensor s_self = diff::matmul(whk, store.get(hp + "/a_self"));
    const Tensor s_neigh = diff::matmul(whk, store.get(hp + "/a_neigh"));
    const Tensor edge_gain = diff::matmul(store.get(hp + "/w_edge"), store.get(hp + "/a_edge"));
    Tensor e = diff::add(diff::gather_rows(s_self, batch.target), diff::gather_rows(s_neigh, batch.source));
    e = diff::leaky_relu(diff::add(e, diff::scale_by(attr, edge_gain)), kLeakySlope);
    const Tensor alpha = segment_softmax(e, batch.target, m);
    if (trace) trace->alpha.emplace_back(alpha.values().begin(), alpha.values().end());
    const Tensor msg = diff::mul_col(diff::gather_rows(whk, batch.source), alpha);
    outs.push_back(diff::scatter_add_rows(msg, batch.target, m));
  }
  return heads == 1 ? outs[0] : diff::concat_cols(outs);
}

void add_ggnn_layer(ParamStore& store, const std::string& prefix, std::size_t hidden, Rng& rng) {
  store.add_glorot(prefix + "/W", hidden, hidden, rng);
  diff::add_gru(store, prefix + "/gru", hidden, hidden, rng);
}

Tensor ggnn_layer(const Tensor& h, const GraphBatch& batch, const ParamStore& store, const std::string& prefix,
                  std::size_t steps) {
  const Tensor& w = store.get(prefix + "/W");
  if (h.rows() != batch.rows() || h.cols() != w.rows())
    throw Error(Errc::ShapeMismatch, prefix + ": input width " + std::to_string(h.cols()) + " vs " + std::to_string(w.rows()));
  const auto gru = diff::gru_weights(store, prefix + "/gru");
  const Tensor attr = Tensor::constant(batch.edges(), 1, batch.attr);
  Tensor cur = h;
  for (std::size_t s = 0; s < steps; ++s) {
    Tensor msg = Tensor::zeros(batch.rows(), w.cols());
    if (batch.edges() > 0) {
      const Tensor proj = diff::matmul(cur, w);
      msg = diff::scatter_add_rows(diff::mul_col(diff::gather_rows(proj, batch.source), attr), batch.target, batch.rows());
    }
    cur = diff::gru_cell(msg, cur, gru);
  }
  return cur;
}

Tensor aux_node_embedding(const NetworkTopology& t, const ParamStore& store, const EncoderConfig& cfg) {
  const Tensor& table = store.get("encoder/node_emb/table");
  const std::size_t expected = 1 + t.non_deployable_nodes().size();
  if (table.rows() != expected)
    throw Error(Errc::TableMismatch, "node-embedding table has " + std::to_string(table.rows()) + " rows, topology needs " +
                                         std::to_string(expected));
  const Tensor rows = diff::gather_rows(table, embedding_index(t));
  const GraphBatch single = make_graph_batch(adjacency_and_edge_attrs(t), 1, true);
  (void)cfg;
  return diff::relu(gat_layer(rows, single, store, "encoder/node_emb/gat", 1));
}

std::vector<double> positional_encoding(std::size_t i, std::size_t d) {
  if (d % 2 != 0) throw Error(Errc::OddDim, "positional encoding width " + std::to_string(d));
  std::vector<double> l(d);
  for (std::size_t m = 0; m < d / 2; ++m) {
    const double freq = std::pow(10000.0, static_cast<double>(2 * m) / static_cast<double>(d));
    l[2 * m] = std::sin(static_cast<double>(i) / freq);
    l[2 * m + 1] = std::cos(static_cast<double>(i) / freq);
  }
  return l;
}

void init_encoder(ParamStore& store, const EncoderConfig& cfg, const NetworkTopology& t, Rng& rng) {
  cfg.validate();
  const std::size_t aux = cfg.use_node_embedding ? cfg.aux_dim : 0;
  if (cfg.use_node_embedding) {
    store.add_uniform("encoder/node_emb/table", 1 + t.non_deployable_nodes().size(), cfg.node_embedding_dim, 0.5, rng);
    add_gat_layer(store, "encoder/node_emb/gat", cfg.node_embedding_dim, cfg.aux_dim, 1, rng);
  }
  if (cfg.kind == EncoderKind::Gat) {
    for (std::size_t k = 1; k <= cfg.layers; ++k) {
      const std::size_t in = k == 1 ? kFeatureWidth : cfg.hidden_dim + (k == 2 ? aux : 0);
      add_gat_layer(store, layer_name(k), in, cfg.hidden_dim, cfg.heads, rng);
    }
  } else {
    add_ggnn_layer(store, "encoder/ggnn", cfg.hidden_dim, rng);
    if (cfg.use_node_embedding) {
      store.add_glorot("encoder/ggnn/proj/w", cfg.hidden_dim + aux, cfg.hidden_dim, rng);
      store.add_zeros("encoder/ggnn/proj/b", 1, cfg.hidden_dim);
    }
  }
}

Tensor encode_batch(const NetworkTopology& t, const std::vector<FeatureMatrix>& features, const EncoderConfig& cfg,
                    const ParamStore& store) {
  if (features.empty()) throw Error(Errc::EmptyRequestSet, "nothing to encode");
  const std::size_t n = t.size();
  const std::size_t r = features.size();
  std::vector<double> x;
  x.reserve(r * n * kFeatureWidth);
  for (const auto& f : features) {
    if (f.rows != n) throw Error(Errc::ShapeMismatch, "feature rows vs topology size");
    x.insert(x.end(), f.values.begin(), f.values.end());
  }
  const Tensor input = Tensor::constant(r * n, kFeatureWidth, std::move(x));
  const AdjacencyData adj = adjacency_and_edge_attrs(t);

  Tensor aux;
  if (cfg.use_node_embedding) aux = replicate_rows(aux_node_embedding(t, store, cfg), r);

  if (cfg.kind == EncoderKind::Gat) {
    const GraphBatch batch = make_graph_batch(adj, r, true);
    Tensor h = input;
    for (std::size_t k = 1; k <= cfg.layers; ++k) {
      h = gat_layer(h, batch, store, layer_name(k), cfg.heads);
      if (k < cfg.layers) h = diff::relu(h);
      if (k == 1 && cfg.use_node_embedding && cfg.layers > 1) h = diff::concat_cols({h, aux});
    }
    return h;
  }
  const GraphBatch batch = make_graph_batch(adj, r, false);
  Tensor h = diff::concat_cols({input, Tensor::zeros(r * n, cfg.hidden_dim - kFeatureWidth)});
  h = ggnn_layer(h, batch, store, "encoder/ggnn", cfg.ggnn_steps);
  if (cfg.use_node_embedding)
    h = diff::linear(diff::concat_cols({h, aux}), store.get("encoder/ggnn/proj/w"), store.get("encoder/ggnn/proj/b"));
  return h;
}

NodeRepresentations encode_state(const NetworkTopology& t, const Deployment& d, const std::vector<SfcRequest>& requests,
                                 const EncoderConfig& cfg, const ParamStore& store) {
  if (requests.empty()) throw Error(Errc::EmptyRequestSet, "encode_state needs at least one request");
  std::vector<FeatureMatrix> features;
  features.reserve(requests.size());
  for (const auto& r : requests) features.push_back(node_features(t, d, r));
  NodeRepresentations out;
  out.requests = requests.size();
  out.per_request = encode_batch(t, features, cfg, store);
  if (requests.size() == 1) {
    out.mean = out.per_request;
  } else {
    std::vector<std::size_t> idx(out.per_request.rows());
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k % t.size();
    out.mean = diff::scale(diff::scatter_add_rows(out.per_request, idx, t.size()), 1.0 / static_cast<double>(requests.size()));
  }
  return out;
}

PretrainReport pretrain_encoder_with_head(const NetworkTopology& t, const std::vector<DatasetEntry>& entries,
                                          const EncoderConfig& cfg, ParamStore& store, ParamStore& head,
                                          const PretrainConfig& pcfg, const RoutingConfig& routing) {
  if (entries.empty()) throw Error(Errc::InvalidArgument, "pretraining needs entries");
  const Router router(t, routing);
  Rng rng(pcfg.seed);

  ParamStore work;
  for (const auto& [name, slot] : store.slots())
    if (name.rfind("encoder/", 0) == 0) work.add(name, slot.value.rows(), slot.value.cols(),
                                                std::vector<double>(slot.value.values().begin(), slot.value.values().end()));
  if (!head.contains("pretrain/query")) head.add_glorot("pretrain/query", cfg.hidden_dim, cfg.hidden_dim, rng);
  work.add("pretrain/query", cfg.hidden_dim, cfg.hidden_dim,
           std::vector<double>(head.get("pretrain/query").values().begin(), head.get("pretrain/query").values().end()));

  std::vector<std::size_t> order(entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::size_t cursor = 0;

  PretrainReport rep;
  const diff::AdamConfig adam{pcfg.lr};
  for (std::size_t step = 0; step < pcfg.steps; ++step) {
    std::vector<const DatasetEntry*> picked;
    for (std::size_t k = 0; k < std::min(pcfg.entries_per_step, entries.size()); ++k) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      picked.push_back(&entries[order[cursor++]]);
    }
    const NextHopBatch b = build_next_hop_batch(t, picked, router);
    if (b.samples.empty()) continue;
    work.zero_grad();
    const Tensor h = encode_batch(t, b.features, cfg, work);
    const Tensor scores = next_hop_scores(h, b, work);
    const Tensor shifted = diff::sub(scores, segment_shift(scores, b.cand_seg, b.samples.size()));
    const Tensor denom = diff::scatter_add_rows(diff::exp(shifted), b.cand_seg, b.samples.size());
    const Tensor logp = diff::sub(shifted, diff::gather_rows(diff::log(denom), b.cand_seg));
    std::vector<std::size_t> picks;
    for (const auto& s : b.samples) picks.push_back(s.first + s.label);
    const Tensor loss = diff::scale(diff::mean_all(diff::gather_rows(logp, picks)), -1.0);
    diff::backward(loss);
    diff::adam_step(work, diff::collect_grads(work), adam);
    rep.final_loss = loss.item();
    const auto [ok, total] = count_correct(scores, b);
    rep.train_accuracy = total ? static_cast<double>(ok) / static_cast<double>(total) : 0.0;
    rep.samples += total;
  }

  for (const auto& [name, slot] : work.slots()) {
    const auto v = slot.value.values();
    if (name == "pretrain/query") {
      std::copy(v.begin(), v.end(), head.get(name).mutable_values().begin());
    } else {
      std::copy(v.begin(), v.end(), store.get(name).mutable_values().begin());
    }
  }
  return rep;
}

PretrainReport pretrain_encoder(const NetworkTopology& t, const std::vector<DatasetEntry>& entries,
                                const EncoderConfig& cfg, ParamStore& store, const PretrainConfig& pcfg,
                                const RoutingConfig& routing) {
  ParamStore head;
  return pretrain_encoder_with_head(t, entries, cfg, store, head, pcfg, routing);
}

NextHopEval evaluate_next_hop(const NetworkTopology& t, const std::vector<DatasetEntry>& entries,
                              const EncoderConfig& cfg, const ParamStore& store, const ParamStore& head,
                              const RoutingConfig& routing) {
  const Router router(t, routing);
  std::vector<const DatasetEntry*> all;
  for (const auto& e : entries) all.push_back(&e);
  const NextHopBatch b = build_next_hop_batch(t, all, router);
  NextHopEval ev;
  std::vector<std::size_t> degree(t.size(), 0);
  for (const auto& l : t.links) {
    ++degree[static_cast<std::size_t>(l.u)];
    ++degree[static_cast<std::size_t>(l.v)];
  }
  ev.chance = 1.0 / static_cast<double>(*std::max_element(degree.begin(), degree.end()));
  if (b.samples.empty()) return ev;
  diff::NoGradGuard ng;
  const Tensor h = encode_batch(t, b.features, cfg, store);
  const auto [ok, total] = count_correct(next_hop_scores(h, b, head), b);
  ev.samples = total;
  ev.accuracy = static_cast<double>(ok) / static_cast<double>(total);
  return ev;
}

}  // namespace vnfscale

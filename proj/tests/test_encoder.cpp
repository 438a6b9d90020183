// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "vnfscale/diff/layers.hpp"
#include "vnfscale/diff/ops.hpp"
#include "vnfscale/encoder.hpp"
#include "vnfscale/error.hpp"

using namespace vnfscale;
using diff::ParamStore;
using diff::Tensor;

namespace {

AdjacencyData adjacency_from(std::size_t n, const std::vector<Link>& links) {
  AdjacencyData a;
  a.n = n;
  a.adj.assign(n * n, 0.0);
  a.attr.assign(n * n, 0.0);
  for (const auto& l : links) {
    const auto u = static_cast<std::size_t>(l.u), v = static_cast<std::size_t>(l.v);
    a.adj[u * n + v] = a.adj[v * n + u] = 1.0;
    a.attr[u * n + v] = a.attr[v * n + u] = 1.0 / l.latency_ms;
  }
  return a;
}

std::vector<double> random_values(Rng& rng, std::size_t n, double lim = 2.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = lim * (2.0 * rng.uniform() - 1.0);
  return v;
}

// Attention weight assigned to `source` by `target` in the layer trace.
double traced(const GraphBatch& b, const AttentionTrace& tr, std::size_t head, std::size_t target, std::size_t source) {
  for (std::size_t e = 0; e < b.edges(); ++e)
    if (b.target[e] == target && b.source[e] == source) return tr.alpha[head][e];
  return 0.0;
}

}  // namespace

TEST_SUITE("encoder") {
  TEST_CASE("an isolated node attends only to itself") {
    Rng rng(1);
    ParamStore store;
    add_gat_layer(store, "g", 3, 8, 2, rng);
    const AdjacencyData adj = adjacency_from(3, {{0, 1, 5.0}});
    const GraphBatch batch = make_graph_batch(adj, 1, true);
    const Tensor h = Tensor::constant(3, 3, random_values(rng, 9));
    AttentionTrace tr;
    const Tensor out = gat_layer(h, batch, store, "g", 2, &tr);
    const Tensor wh = diff::matmul(h, store.get("g/W"));
    for (std::size_t k = 0; k < 2; ++k) CHECK(traced(batch, tr, k, 2, 2) == 1.0);
    for (std::size_t c = 0; c < 8; ++c) CHECK(out(2, c) == doctest::Approx(wh(2, c)).epsilon(1e-12));
  }

  TEST_CASE("identical neighbours and self share attention equally") {
    Rng rng(2);
    ParamStore store;
    add_gat_layer(store, "g", 4, 4, 1, rng);
    // Self edges carry attribute 0, so equal scores need zero edge attributes everywhere.
    AdjacencyData adj = adjacency_from(3, {{0, 1, 1.0}, {0, 2, 1.0}});
    std::fill(adj.attr.begin(), adj.attr.end(), 0.0);
    const GraphBatch batch = make_graph_batch(adj, 1, true);
    const std::vector<double> row = random_values(rng, 4);
    std::vector<double> x;
    for (int i = 0; i < 3; ++i) x.insert(x.end(), row.begin(), row.end());
    AttentionTrace tr;
    gat_layer(Tensor::constant(3, 4, x), batch, store, "g", 1, &tr);
    for (std::size_t j = 0; j < 3; ++j) CHECK(traced(batch, tr, 0, 0, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }

  TEST_CASE("sparse GAT matches the dense loop oracle and attention rows are distributions") {
    Rng rng(3);
    double worst_out = 0.0, worst_sum = 0.0, worst_att = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 2 + rng.below(19);
      const auto t = oracle::random_topology(rng, n, 0.2, 30);
      const AdjacencyData adj = adjacency_and_edge_attrs(t);
      ParamStore store;
      const std::size_t heads = 1 + rng.below(4);
      add_gat_layer(store, "g", kFeatureWidth, 4 * heads, heads, rng);
      const std::vector<double> x = random_values(rng, n * kFeatureWidth);
      const GraphBatch batch = make_graph_batch(adj, 1, true);
      AttentionTrace tr;
      const Tensor out = gat_layer(Tensor::constant(n, kFeatureWidth, x), batch, store, "g", heads, &tr);
      const oracle::DenseGat ref = oracle::dense_gat(x, n, kFeatureWidth, adj, store, "g", heads);
      for (std::size_t k = 0; k < out.size(); ++k) worst_out = std::max(worst_out, std::abs(out.values()[k] - ref.out[k]));
      for (std::size_t h = 0; h < heads; ++h) {
        std::vector<double> sums(n, 0.0);
        for (std::size_t e = 0; e < batch.edges(); ++e) {
          sums[batch.target[e]] += tr.alpha[h][e];
          worst_att = std::max(worst_att, std::abs(tr.alpha[h][e] - ref.attention[h][batch.target[e] * n + batch.source[e]]));
        }
        for (double s : sums) worst_sum = std::max(worst_sum, std::abs(s - 1.0));
        // Non-neighbours get no mass in the dense oracle either.
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j)
            if (i != j && adj.adj_at(i, j) == 0.0) CHECK(ref.attention[h][i * n + j] < 1e-6);
      }
    }
    CHECK(worst_out < 1e-9);
    CHECK(worst_att < 1e-9);
    CHECK(worst_sum < 1e-6);
  }

  TEST_CASE("GAT layer gradients match finite differences") {
    double worst = 0.0;
    for (int seed = 0; seed < 20; ++seed) {
      Rng rng(static_cast<std::uint64_t>(seed) + 40);
      const auto t = oracle::random_topology(rng, 3 + rng.below(4), 0.3, 5);
      ParamStore store;
      add_gat_layer(store, "g", 3, 4, 2, rng);
      const GraphBatch batch = make_graph_batch(adjacency_and_edge_attrs(t), 2, true);
      const Tensor x = Tensor::parameter(batch.rows(), 3, random_values(rng, batch.rows() * 3));
      const Tensor wts = Tensor::constant(batch.rows(), 4, random_values(rng, batch.rows() * 4, 1.0));
      std::vector<Tensor> params{x};
      for (const auto& name : store.names()) params.push_back(store.get(name));
      worst = std::max(worst, oracle::max_grad_error(
                                  [&] { return diff::sum_all(diff::mul(gat_layer(x, batch, store, "g", 2), wts)); }, params));
    }
    CHECK(worst < 1e-4);
  }

  TEST_CASE("GGNN examples") {
    Rng rng(5);
    ParamStore store;
    add_ggnn_layer(store, "gg", 3, rng);
    const Tensor h = Tensor::constant(2, 3, random_values(rng, 6));
    // No edges: one step is the GRU fed a zero message.
    const GraphBatch empty = make_graph_batch(adjacency_from(2, {}), 1, false);
    const Tensor one = ggnn_layer(h, empty, store, "gg", 1);
    const Tensor expect = diff::gru_cell(Tensor::zeros(2, 3), h, diff::gru_weights(store, "gg/gru"));
    for (std::size_t k = 0; k < 6; ++k) CHECK(one.values()[k] == expect.values()[k]);

    ParamStore zero;
    zero.add_zeros("z/W", 3, 3);
    zero.add_zeros("z/gru/w_in", 3, 9);
    zero.add_zeros("z/gru/w_hid", 3, 9);
    zero.add_zeros("z/gru/b_in", 1, 9);
    zero.add_zeros("z/gru/b_hid", 1, 9);
    const GraphBatch linked = make_graph_batch(adjacency_from(2, {{0, 1, 2.0}}), 1, false);
    const Tensor half = ggnn_layer(h, linked, zero, "z", 1);
    for (std::size_t k = 0; k < 6; ++k) CHECK(half.values()[k] == doctest::Approx(0.5 * h.values()[k]));
  }

  TEST_CASE("GGNN gradients match finite differences") {
    double worst = 0.0;
    for (int seed = 0; seed < 20; ++seed) {
      Rng rng(static_cast<std::uint64_t>(seed) + 70);
      const auto t = oracle::random_topology(rng, 3 + rng.below(3), 0.3, 4);
      ParamStore store;
      add_ggnn_layer(store, "gg", 3, rng);
      const GraphBatch batch = make_graph_batch(adjacency_and_edge_attrs(t), 1, false);
      const Tensor x = Tensor::parameter(batch.rows(), 3, random_values(rng, batch.rows() * 3, 1.0));
      const Tensor wts = Tensor::constant(batch.rows(), 3, random_values(rng, batch.rows() * 3, 1.0));
      std::vector<Tensor> params{x};
      for (const auto& name : store.names()) params.push_back(store.get(name));
      worst = std::max(worst, oracle::max_grad_error(
                                  [&] { return diff::sum_all(diff::mul(ggnn_layer(x, batch, store, "gg", 2), wts)); }, params));
    }
    CHECK(worst < 1e-4);
  }

  TEST_CASE("node embeddings") {
    Rng rng(6);
    EncoderConfig cfg;
    // All deployable: every row starts as n_0, so every refined row is identical.
    const NetworkTopology all{"all", {{0, true}, {1, true}, {2, true}}, {{0, 1, 1.0}, {1, 2, 3.0}}};
    ParamStore store;
    init_encoder(store, cfg, all, rng);
    CHECK(store.get("encoder/node_emb/table").rows() == 1);
    const Tensor e = aux_node_embedding(all, store, cfg);
    CHECK(e.cols() == cfg.aux_dim);
    for (std::size_t i = 1; i < 3; ++i)
      for (std::size_t c = 0; c < cfg.aux_dim; ++c) CHECK(e(i, c) == doctest::Approx(e(0, c)).epsilon(1e-12));

    const NetworkTopology i2 = build_internet2();
    ParamStore s2;
    init_encoder(s2, cfg, i2, rng);
    CHECK(s2.get("encoder/node_emb/table").rows() == 4);
    try {
      aux_node_embedding(all, s2, cfg);
      FAIL("expected TableMismatch");
    } catch (const Error& err) {
      CHECK(err.code() == Errc::TableMismatch);
    }
  }

  TEST_CASE("node-embedding module gradients match finite differences") {
    double worst = 0.0;
    const NetworkTopology t = build_internet2();
    EncoderConfig cfg;
    for (int seed = 0; seed < 20; ++seed) {
      Rng rng(static_cast<std::uint64_t>(seed) + 90);
      ParamStore store;
      init_encoder(store, cfg, t, rng);
      const Tensor wts = Tensor::constant(t.size(), cfg.aux_dim, random_values(rng, t.size() * cfg.aux_dim, 1.0));
      std::vector<Tensor> params;
      for (const auto& name : store.names())
        if (name.rfind("encoder/node_emb", 0) == 0) params.push_back(store.get(name));
      worst = std::max(worst, oracle::max_grad_error(
                                  [&] { return diff::sum_all(diff::mul(aux_node_embedding(t, store, cfg), wts)); }, params));
    }
    CHECK(worst < 1e-4);
  }

  TEST_CASE("positional encoding values") {
    const auto l = positional_encoding(1, 4);
    CHECK(l[0] == doctest::Approx(std::sin(1.0)));
    CHECK(l[1] == doctest::Approx(std::cos(1.0)));
    CHECK(l[2] == doctest::Approx(std::sin(0.01)));
    CHECK(l[3] == doctest::Approx(std::cos(0.01)));
    const auto z = positional_encoding(0, 4);
    CHECK(z == std::vector<double>{0.0, 1.0, 0.0, 1.0});
    try {
      positional_encoding(1, 3);
      FAIL("expected OddDim");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::OddDim);
    }
  }

  TEST_CASE("encode_state averages per-request encodings and ignores request order") {
    const NetworkTopology t = build_internet2();
    for (auto kind : {EncoderKind::Gat, EncoderKind::Ggnn}) {
      Rng rng(8);
      EncoderConfig cfg;
      cfg.kind = kind;
      ParamStore store;
      init_encoder(store, cfg, t, rng);
      auto reqs = gen_requests(t, 5, 3);
      const Deployment d = random_deployment(t, 4);
      const NodeRepresentations reps = encode_state(t, d, reqs, cfg, store);
      CHECK(reps.mean.rows() == t.size());
      CHECK(reps.mean.cols() == cfg.hidden_dim);
      double worst = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i)
        for (std::size_t c = 0; c < cfg.hidden_dim; ++c) {
          double s = 0.0;
          for (std::size_t k = 0; k < reqs.size(); ++k) s += reps.per_request(k * t.size() + i, c);
          worst = std::max(worst, std::abs(s / 5.0 - reps.mean(i, c)));
        }
      CHECK(worst < 1e-12);

      std::reverse(reqs.begin(), reqs.end());
      const NodeRepresentations rev = encode_state(t, d, reqs, cfg, store);
      double diffmax = 0.0;
      for (std::size_t k = 0; k < rev.mean.size(); ++k)
        diffmax = std::max(diffmax, std::abs(rev.mean.values()[k] - reps.mean.values()[k]));
      CHECK(diffmax < 1e-12);
      for (double v : reps.mean.values()) CHECK(std::isfinite(v));

      try {
        encode_state(t, d, {}, cfg, store);
        FAIL("expected EmptyRequestSet");
      } catch (const Error& e) {
        CHECK(e.code() == Errc::EmptyRequestSet);
      }
    }
  }

  TEST_CASE("configuration validation") {
    EncoderConfig cfg;
    cfg.heads = 5;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.aux_dim = 64;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    CHECK(encoder_config_from_json(to_json(cfg)).hidden_dim == 64);
    CHECK(parse_encoder_kind("ggnn") == EncoderKind::Ggnn);
  }

  TEST_CASE("next-hop pretraining beats chance") {
    const NetworkTopology t = build_internet2();
    DatasetSpec spec;
    spec.entries = 10;
    spec.requests_per_entry = 5;
    spec.seed = 1;
    spec.solver.search_budget = 300;
    const Dataset ds = make_dataset(t, spec);
    EncoderConfig cfg;
    Rng rng(2);
    ParamStore store, head;
    init_encoder(store, cfg, t, rng);
    PretrainConfig pc;
    pc.steps = 60;
    const PretrainReport rep = pretrain_encoder_with_head(t, ds.train, cfg, store, head, pc);
    CHECK(std::isfinite(rep.final_loss));
    const NextHopEval ev = evaluate_next_hop(t, ds.train, cfg, store, head);
    CHECK(ev.samples > 0);
    CHECK(ev.accuracy > ev.chance);
  }
}

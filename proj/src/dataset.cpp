// SPDX-License-Identifier: Apache-2.0
#include "vnfscale/dataset.hpp"

#include <algorithm>
#include <limits>

#include "vnfscale/error.hpp"
#include "vnfscale/rng.hpp"

namespace vnfscale {

namespace {

NetworkTopology make_topology(std::string name, std::size_t n, const std::vector<int>& non_deployable,
                              const std::vector<std::pair<int, int>>& edges, const std::vector<double>& latencies) {
  NetworkTopology t;
  t.name = std::move(name);
  for (std::size_t i = 0; i < n; ++i) t.nodes.push_back({static_cast<int>(i), true});
  for (int i : non_deployable) {
    if (i < 0 || static_cast<std::size_t>(i) >= n) throw Error(Errc::UnknownNode, "non-deployable node " + std::to_string(i));
    t.nodes[static_cast<std::size_t>(i)].deployable = false;
  }
  if (latencies.size() != edges.size())
    throw Error(Errc::InvalidArgument, "expected " + std::to_string(edges.size()) + " link latencies");
  for (std::size_t k = 0; k < edges.size(); ++k) t.links.push_back({edges[k].first, edges[k].second, latencies[k]});
  validate_topology(t);
  return t;
}

std::vector<double> all_pairs_latency(const NetworkTopology& t) {
  const std::size_t n = t.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> d(n * n, kInf);
  for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 0.0;
  for (const auto& l : t.links) {
    const auto u = static_cast<std::size_t>(l.u), v = static_cast<std::size_t>(l.v);
    d[u * n + v] = d[v * n + u] = std::min(d[u * n + v], l.latency_ms);
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] = std::min(d[i * n + j], d[i * n + k] + d[k * n + j]);
  return d;
}

struct Cell {
  int node;
  std::size_t vnf;
};

std::vector<Cell> search_cells(const NetworkTopology& t, const std::vector<SfcRequest>& requests) {
  std::array<bool, kNumVnfTypes> used{};
  for (const auto& r : requests)
    for (VnfType v : r.chain) used[index_of(v)] = true;
  std::vector<Cell> cells;
  for (int node : t.deployable_nodes())
    for (std::size_t v = 0; v < kNumVnfTypes; ++v)
      if (used[v]) cells.push_back({node, v});
  return cells;
}

Deployment solve_exact(const NetworkTopology& t, const std::vector<SfcRequest>& reqs, const std::vector<Cell>& cells,
                       const Router& router, const SolverConfig& cfg) {
  Deployment cur(t.size());
  Deployment best = cur;
  double best_r = router.reward(cur, reqs, cfg.alpha);
  std::vector<int> digits(cells.size(), 0);
  for (;;) {
    std::size_t k = 0;
    while (k < cells.size() && digits[k] == cfg.max_count_per_cell) {
      digits[k] = 0;
      cur.at(cells[k].node, cells[k].vnf) = 0;
      ++k;
    }
    if (k == cells.size()) break;
    ++digits[k];
    cur.at(cells[k].node, cells[k].vnf) = digits[k];
    const double r = router.reward(cur, reqs, cfg.alpha);
    if (better_deployment(r, cur, best_r, best)) {
      best = cur;
      best_r = r;
    }
  }
  return best;
}

Deployment solve_local(const NetworkTopology& t, const std::vector<SfcRequest>& reqs, const std::vector<Cell>& cells,
                       const Router& router, const SolverConfig& cfg) {
  Deployment cur(t.size());

  // Seed: one instance of every requested type at the node closest (summed
  // ingress/egress latency) to the requests that need it. Without this every
  // single addition leaves requests unroutable and greedy growth stalls at zero.
  const auto dist = all_pairs_latency(t);
  const std::size_t n = t.size();
  for (std::size_t v = 0; v < kNumVnfTypes; ++v) {
    int best_node = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    for (const Cell& c : cells) {
      if (c.vnf != v) continue;
      double cost = 0.0;
      for (const auto& r : reqs)
        if (r.needs(static_cast<VnfType>(v)))
          cost += dist[static_cast<std::size_t>(r.ingress) * n + static_cast<std::size_t>(c.node)] +
                  dist[static_cast<std::size_t>(c.node) * n + static_cast<std::size_t>(r.egress)];
      if (cost < best_cost) {
        best_cost = cost;
        best_node = c.node;
      }
    }
    if (best_node >= 0 && cfg.max_count_per_cell > 0) cur.at(best_node, v) = 1;
  }
  double cur_r = router.reward(cur, reqs, cfg.alpha);
  {
    const Deployment zero(t.size());
    const double zr = router.reward(zero, reqs, cfg.alpha);
    if (better_deployment(zr, zero, cur_r, cur)) {
      cur = zero;
      cur_r = zr;
    }
  }

  // Greedy growth.
  for (;;) {
    Deployment best = cur;
    double best_r = cur_r;
    for (const Cell& c : cells) {
      if (cur.at(c.node, c.vnf) >= cfg.max_count_per_cell) continue;
      Deployment cand = cur;
      ++cand.at(c.node, c.vnf);
      const double r = router.reward(cand, reqs, cfg.alpha);
      if (better_deployment(r, cand, best_r, best)) {
        best = std::move(cand);
        best_r = r;
      }
    }
    if (best == cur) break;
    cur = std::move(best);
    cur_r = best_r;
  }

  // Best-improvement hill climbing over add / remove / move-one-instance.
  std::size_t evals = 0;
  auto climb = [&](Deployment& d, double& d_r) {
    while (evals < cfg.search_budget) {
      Deployment best = d;
      double best_r = d_r;
      auto consider = [&](Deployment&& cand) {
        ++evals;
        const double r = router.reward(cand, reqs, cfg.alpha);
        if (better_deployment(r, cand, best_r, best)) {
          best = std::move(cand);
          best_r = r;
        }
      };
      for (std::size_t a = 0; a < cells.size() && evals < cfg.search_budget; ++a) {
        const int ca = d.at(cells[a].node, cells[a].vnf);
        if (ca < cfg.max_count_per_cell) {
          Deployment cand = d;
          ++cand.at(cells[a].node, cells[a].vnf);
          consider(std::move(cand));
        }
        if (ca == 0) continue;
        {
          Deployment cand = d;
          --cand.at(cells[a].node, cells[a].vnf);
          consider(std::move(cand));
        }
        for (std::size_t b = 0; b < cells.size() && evals < cfg.search_budget; ++b) {
          if (b == a || d.at(cells[b].node, cells[b].vnf) >= cfg.max_count_per_cell) continue;
          Deployment cand = d;
          --cand.at(cells[a].node, cells[a].vnf);
          ++cand.at(cells[b].node, cells[b].vnf);
          consider(std::move(cand));
        }
      }
      // Relocate every instance on one node to another node.
      for (std::size_t a = 0; a < cells.size() && evals < cfg.search_budget; ++a) {
        if (cells[a].vnf != cells.front().vnf) continue;
        for (std::size_t b = 0; b < cells.size() && evals < cfg.search_budget; ++b) {
          if (cells[b].vnf != cells.front().vnf || cells[b].node == cells[a].node) continue;
          Deployment cand = d;
          bool moved = false;
          for (std::size_t v = 0; v < kNumVnfTypes; ++v) {
            int& from = cand.at(cells[a].node, v);
            int& to = cand.at(cells[b].node, v);
            if (from == 0) continue;
            to = std::min(cfg.max_count_per_cell, to + from);
            from = 0;
            moved = true;
          }
          if (moved) consider(std::move(cand));
        }
      }
      if (best == d) break;
      d = std::move(best);
      d_r = best_r;
    }
  };
  climb(cur, cur_r);

  // Iterated local search: kick a few cells to random counts and climb again,
  // keeping the best. Stops after a run of kicks without improvement.
  Rng rng(0x1F5EEDull);
  constexpr int kMaxStale = 24;
  for (int stale = 0; stale < kMaxStale && evals < cfg.search_budget && !cells.empty(); ++stale) {
    Deployment cand = cur;
    const std::size_t kicks = 2 + rng.below(2);
    for (std::size_t k = 0; k < kicks; ++k) {
      const Cell& c = cells[rng.below(cells.size())];
      cand.at(c.node, c.vnf) = static_cast<int>(rng.below(static_cast<std::size_t>(cfg.max_count_per_cell) + 1));
    }
    double cand_r = router.reward(cand, reqs, cfg.alpha);
    ++evals;
    climb(cand, cand_r);
    if (better_deployment(cand_r, cand, cur_r, cur)) {
      cur = std::move(cand);
      cur_r = cand_r;
      stale = -1;
    }
  }
  return cur;
}

}  // namespace

NetworkTopology build_internet2(const Internet2Options& opt) {
  // ATLA-M5, ATLA, CHIN, DNVR, HSTN, IPLS, KSCY, LOSA, NYCM, SNVA, STTL, WASH
  static const std::vector<std::pair<int, int>> kEdges = {
      {0, 1}, {1, 4}, {1, 5}, {1, 11}, {2, 5}, {2, 8}, {3, 6}, {3, 9},
      {3, 10}, {4, 6}, {4, 7}, {5, 6}, {7, 9}, {8, 11}, {9, 10}};
  std::vector<double> lat = opt.latencies_ms;
  if (lat.empty()) lat.assign(kEdges.size(), opt.default_latency_ms);
  return make_topology("internet2", 12, opt.non_deployable, kEdges, lat);
}

NetworkTopology build_mec(const MecOptions& opt) {
  static const std::vector<std::pair<int, int>> kEdges = {
      {0, 1}, {0, 2}, {0, 3}, {0, 4}, {1, 5}, {1, 6}, {2, 7},
      {2, 8}, {3, 9}, {3, 10}, {4, 11}, {4, 12}, {4, 13}};
  static const std::vector<double> kLatency = {1000, 1500, 1000, 2000, 3000, 4000, 2500,
                                               5000, 3500, 1500, 4500, 2000, 3000};
  return make_topology("mec", 14, {0, 1, 2, 3, 4}, kEdges, opt.latencies_ms.empty() ? kLatency : opt.latencies_ms);
}

std::vector<SfcRequest> gen_requests(const NetworkTopology& t, std::size_t n, std::uint64_t seed) {
  if (t.size() < 2) throw Error(Errc::InvalidArgument, "need at least two nodes for requests");
  Rng rng(seed);
  std::vector<SfcRequest> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    SfcRequest r;
    r.id = static_cast<int>(k);
    r.ingress = static_cast<int>(rng.below(t.size()));
    r.egress = static_cast<int>(rng.below(t.size() - 1));
    if (r.egress >= r.ingress) ++r.egress;
    const std::size_t len = rng.below(2) == 0 ? 3 : 4;
    std::vector<VnfType> pool(kAllVnfTypes.begin(), kAllVnfTypes.end());
    rng.shuffle(pool);
    r.chain.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(len));
    out.push_back(std::move(r));
  }
  return out;
}

const char* to_string(SolverConfig::Mode m) { return m == SolverConfig::Mode::Exact ? "exact" : "local_search"; }

SolverConfig::Mode parse_solver_mode(const std::string& s) {
  if (s == "exact") return SolverConfig::Mode::Exact;
  if (s == "local_search") return SolverConfig::Mode::LocalSearch;
  throw Error(Errc::ParseError, "unknown solver mode '" + s + "'");
}

bool better_deployment(double reward_a, const Deployment& a, double reward_b, const Deployment& b) {
  if (reward_a != reward_b) return reward_a > reward_b;
  const int ta = a.total(), tb = b.total();
  if (ta != tb) return ta < tb;
  return a.raw() > b.raw();
}

std::vector<SfcRequest> with_provisional_sla(const NetworkTopology& t, std::vector<SfcRequest> requests) {
  const auto dist = all_pairs_latency(t);
  for (auto& r : requests)
    if (r.sla_ms <= 0.0)
      r.sla_ms = dist[static_cast<std::size_t>(r.ingress) * t.size() + static_cast<std::size_t>(r.egress)];
  return requests;
}

std::size_t active_cells(const NetworkTopology& t, const std::vector<SfcRequest>& requests) {
  return search_cells(t, requests).size();
}

Deployment solve_reference(const NetworkTopology& t, const std::vector<SfcRequest>& requests, const SolverConfig& cfg) {
  validate_topology(t);
  if (requests.empty()) throw Error(Errc::EmptyRequestSet, "solver needs requests");
  const auto reqs = with_provisional_sla(t, requests);
  const auto cells = search_cells(t, reqs);
  const Router router(t, cfg.routing);
  if (cfg.mode == SolverConfig::Mode::Exact) {
    if (cells.size() > cfg.exact_cell_limit)
      throw Error(Errc::ExactModeTooLarge,
                  std::to_string(cells.size()) + " cells exceeds limit " + std::to_string(cfg.exact_cell_limit));
    return solve_exact(t, reqs, cells, router, cfg);
  }
  return solve_local(t, reqs, cells, router, cfg);
}

Deployment perturb(const NetworkTopology& t, const Deployment& d, std::uint64_t seed) {
  Rng rng(seed);
  Deployment out = d;
  for (int node : t.deployable_nodes())
    for (std::size_t v = 0; v < kNumVnfTypes; ++v) {
      int& c = out.at(node, v);
      c = std::max(0, c + rng.between(-1, 1));
    }
  return out;
}

Deployment random_deployment(const NetworkTopology& t, std::uint64_t seed) {
  Rng rng(seed);
  Deployment out(t.size());
  for (int node : t.deployable_nodes())
    for (std::size_t v = 0; v < kNumVnfTypes; ++v) out.at(node, v) = static_cast<int>(rng.below(2));
  return out;
}

Deployment zero_deployment(const NetworkTopology& t) { return Deployment(t.size()); }

const DatasetEntry& Dataset::find(int id) const {
  for (const auto* split : {&train, &val, &test})
    for (const auto& e : *split)
      if (e.id == id) return e;
  throw Error(Errc::UnknownEntry, "entry " + std::to_string(id));
}

DatasetEntry make_entry(const NetworkTopology& t, int id, const DatasetSpec& spec) {
  DatasetEntry e;
  e.id = id;
  e.seed = mix_seed(spec.seed, static_cast<std::uint64_t>(id));
  auto requests = gen_requests(t, spec.requests_per_entry, mix_seed(e.seed, 1));
  e.reference_deployment = solve_reference(t, requests, spec.solver);
  e.requests = assign_sla(t, std::move(requests), e.reference_deployment, spec.slack, spec.solver.routing);
  e.initial_deployment = perturb(t, e.reference_deployment, mix_seed(e.seed, 2));
  return e;
}

Dataset make_dataset(const NetworkTopology& t, const DatasetSpec& spec) {
  if (spec.entries < 10) throw Error(Errc::InvalidArgument, "a dataset needs at least 10 entries");
  validate_topology(t);
  Dataset ds;
  ds.topology = t;
  ds.spec = spec;
  std::vector<int> ids(spec.entries);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  Rng rng(mix_seed(spec.seed, 0xD5));
  rng.shuffle(ids);
  const std::size_t n_train = spec.entries * 8 / 10;
  const std::size_t n_val = spec.entries / 10;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    auto& split = k < n_train ? ds.train : (k < n_train + n_val ? ds.val : ds.test);
    split.push_back(make_entry(t, ids[k], spec));
  }
  for (auto* split : {&ds.train, &ds.val, &ds.test})
    std::sort(split->begin(), split->end(), [](const DatasetEntry& a, const DatasetEntry& b) { return a.id < b.id; });
  return ds;
}

io::Json to_json(const DatasetEntry& e) {
  io::Json reqs = io::Json::array();
  for (const auto& r : e.requests) reqs.push_back(io::to_json(r));
  return io::Json{{"id", e.id},
                  {"seed", e.seed},
                  {"reference_deployment", io::to_json(e.reference_deployment)},
                  {"initial_deployment", io::to_json(e.initial_deployment)},
                  {"requests", reqs}};
}

DatasetEntry entry_from_json(const io::Json& j) {
  io::expect_fields(j, {"id", "seed", "reference_deployment", "initial_deployment", "requests"}, "entry");
  DatasetEntry e;
  e.id = j.at("id").get<int>();
  e.seed = j.at("seed").get<std::uint64_t>();
  e.reference_deployment = io::deployment_from_json(j.at("reference_deployment"));
  e.initial_deployment = io::deployment_from_json(j.at("initial_deployment"));
  for (const auto& r : j.at("requests")) e.requests.push_back(io::request_from_json(r));
  return e;
}

io::Json to_json(const SolverConfig& s) {
  return io::Json{{"mode", to_string(s.mode)},
                  {"alpha", s.alpha},
                  {"max_count_per_cell", s.max_count_per_cell},
                  {"search_budget", s.search_budget},
                  {"exact_cell_limit", s.exact_cell_limit},
                  {"processing_delay_ms", s.routing.processing_delay_ms},
                  {"unroutable_penalty", s.routing.unroutable_penalty}};
}

SolverConfig solver_config_from_json(const io::Json& j) {
  io::expect_fields(j, {"mode", "alpha", "max_count_per_cell", "search_budget", "exact_cell_limit",
                        "processing_delay_ms", "unroutable_penalty"},
                    "solver");
  SolverConfig s;
  s.mode = parse_solver_mode(j.at("mode").get<std::string>());
  s.alpha = j.at("alpha").get<double>();
  s.max_count_per_cell = j.at("max_count_per_cell").get<int>();
  s.search_budget = j.at("search_budget").get<std::size_t>();
  s.exact_cell_limit = j.at("exact_cell_limit").get<std::size_t>();
  s.routing.processing_delay_ms = j.at("processing_delay_ms").get<double>();
  s.routing.unroutable_penalty = j.at("unroutable_penalty").get<double>();
  return s;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& ds, const io::Json& manifest_extra) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  io::write_topology(dir / "topology.json", ds.topology);
  const std::pair<const char*, const std::vector<DatasetEntry>*> splits[] = {
      {"train", &ds.train}, {"val", &ds.val}, {"test", &ds.test}};
  io::Json counts = io::Json::object();
  for (const auto& [name, entries] : splits) {
    const fs::path sub = dir / "entries" / name;
    if (fs::exists(sub)) fs::remove_all(sub);
    fs::create_directories(sub);
    for (const auto& e : *entries) io::write_json(sub / (std::to_string(e.id) + ".json"), to_json(e));
    counts[name] = entries->size();
  }
  io::Json m{{"format", "vnfscale-dataset"},
             {"version", 1},
             {"seed", ds.spec.seed},
             {"entries", ds.spec.entries},
             {"requests_per_entry", ds.spec.requests_per_entry},
             {"slack", ds.spec.slack},
             {"alpha", ds.spec.solver.alpha},
             {"solver", to_json(ds.spec.solver)},
             {"topology", {{"name", ds.topology.name}, {"nodes", ds.topology.size()}, {"links", ds.topology.links.size()}}},
             {"splits", counts}};
  if (manifest_extra.is_object())
    for (const auto& [k, v] : manifest_extra.items()) m[k] = v;
  io::write_json(dir / "manifest.json", m);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(Errc::Io, "no dataset at " + dir.string());
  Dataset ds;
  ds.topology = io::read_topology(dir / "topology.json");
  validate_topology(ds.topology);
  const auto m = io::read_json(dir / "manifest.json");
  try {
    ds.spec.seed = m.at("seed").get<std::uint64_t>();
    ds.spec.entries = m.at("entries").get<std::size_t>();
    ds.spec.requests_per_entry = m.at("requests_per_entry").get<std::size_t>();
    ds.spec.slack = m.at("slack").get<double>();
    ds.spec.solver = solver_config_from_json(m.at("solver"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, "manifest: " + std::string(e.what()));
  }
  const std::pair<const char*, std::vector<DatasetEntry>*> splits[] = {
      {"train", &ds.train}, {"val", &ds.val}, {"test", &ds.test}};
  for (const auto& [name, entries] : splits) {
    const fs::path sub = dir / "entries" / name;
    if (!fs::is_directory(sub)) continue;
    for (const auto& f : fs::directory_iterator(sub))
      if (f.path().extension() == ".json") entries->push_back(entry_from_json(io::read_json(f.path())));
    std::sort(entries->begin(), entries->end(), [](const DatasetEntry& a, const DatasetEntry& b) { return a.id < b.id; });
  }
  return ds;
}

}  // namespace vnfscale

// SPDX-License-Identifier: Apache-2.0
//
// Experiment topologies, synthetic requests, the reference-deployment solver
// and dataset construction/persistence.
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vnfscale/io.hpp"
#include "vnfscale/net_model.hpp"
#include "vnfscale/routing.hpp"

namespace vnfscale {

struct Internet2Options {
  std::vector<int> non_deployable = {0, 5, 6};
  /// Per-link latency in link order; empty means uniform `default_latency_ms`.
  std::vector<double> latencies_ms;
  double default_latency_ms = 10.0;
};

/// Abilene-shaped backbone: 12 nodes, 15 links.
NetworkTopology build_internet2(const Internet2Options& opt = {});

struct MecOptions {
  /// Per-link latency in link order; empty means the built-in 1000-5000 ms profile.
  std::vector<double> latencies_ms;
};

/// Tree of 14 nodes / 13 links: a core switch, four aggregation switches
/// (the five non-deployable interior nodes) and nine edge servers.
NetworkTopology build_mec(const MecOptions& opt = {});

/// Uniform distinct ingress/egress, chain = ordered random subset of 3 or 4
/// types. sla_ms is left at 0.
std::vector<SfcRequest> gen_requests(const NetworkTopology& t, std::size_t n, std::uint64_t seed);

struct SolverConfig {
  enum class Mode { Exact, LocalSearch };
  Mode mode = Mode::LocalSearch;
  double alpha = 0.2;
  int max_count_per_cell = 2;
  std::size_t search_budget = 20000;  // reward evaluations in the hill-climbing phase
  std::size_t exact_cell_limit = 12;
  RoutingConfig routing;
};

const char* to_string(SolverConfig::Mode m);
SolverConfig::Mode parse_solver_mode(const std::string& s);

/// Deployment maximising the reward over counts in [0, max_count_per_cell].
/// Only (deployable node, requested type) cells are searched; other cells can
/// only lower the reward. Requests with sla_ms == 0 are scored against a
/// provisional SLA equal to their direct shortest-path latency.
/// Exact mode throws ExactModeTooLarge beyond `exact_cell_limit` cells.
Deployment solve_reference(const NetworkTopology& t, const std::vector<SfcRequest>& requests, const SolverConfig& cfg);

/// Requests with a provisional SLA filled in where none is set.
std::vector<SfcRequest> with_provisional_sla(const NetworkTopology& t, std::vector<SfcRequest> requests);

/// Number of cells the solver searches.
std::size_t active_cells(const NetworkTopology& t, const std::vector<SfcRequest>& requests);

/// Ordering used by every solver path: higher reward wins; on an exact tie the
/// smaller total, then the lexicographically larger count vector.
bool better_deployment(double reward_a, const Deployment& a, double reward_b, const Deployment& b);

/// Adds independent noise in {-1, 0, +1} to each deployable cell, clamped at 0.
Deployment perturb(const NetworkTopology& t, const Deployment& d, std::uint64_t seed);
Deployment random_deployment(const NetworkTopology& t, std::uint64_t seed);
Deployment zero_deployment(const NetworkTopology& t);

struct DatasetEntry {
  int id = 0;
  std::uint64_t seed = 0;
  Deployment reference_deployment;
  Deployment initial_deployment;
  std::vector<SfcRequest> requests;
};

struct DatasetSpec {
  std::size_t entries = 100;
  std::size_t requests_per_entry = 10;
  double slack = 0.95;
  std::uint64_t seed = 0;
  SolverConfig solver;
};

struct Dataset {
  NetworkTopology topology;
  DatasetSpec spec;
  std::vector<DatasetEntry> train, val, test;

  const DatasetEntry& find(int id) const;  // throws UnknownEntry
};

DatasetEntry make_entry(const NetworkTopology& t, int id, const DatasetSpec& spec);

/// Entries split 8:1:1 after a seeded shuffle. Requires entries >= 10.
Dataset make_dataset(const NetworkTopology& t, const DatasetSpec& spec);

io::Json to_json(const DatasetEntry& e);
DatasetEntry entry_from_json(const io::Json& j);
io::Json to_json(const SolverConfig& s);
SolverConfig solver_config_from_json(const io::Json& j);

/// Layout: topology.json, entries/{train,val,test}/<id>.json, manifest.json.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds, const io::Json& manifest_extra = {});
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace vnfscale

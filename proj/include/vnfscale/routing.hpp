// SPDX-License-Identifier: Apache-2.0
//
// Deterministic SFC routing on the layered graph, the QoS/resource reward,
// SLA assignment and the evaluation metrics.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "vnfscale/net_model.hpp"

namespace vnfscale {

struct RoutingConfig {
  /// Added once per consumed chain stage.
  double processing_delay_ms = 0.0;
  /// Ratio substituted for delay/SLA when a request cannot be routed.
  double unroutable_penalty = 20.0;
};

struct PathResult {
  std::vector<int> hops;           // ingress .. egress, revisits allowed
  std::vector<int> service_sites;  // node consuming chain[j]
  double delay_ms = 0.0;
  bool routable = false;
};

/// Routes requests over a fixed topology. Construction precomputes the
/// adjacency lists; route() is then a pure function of (deployment, request).
class Router {
 public:
  explicit Router(const NetworkTopology& t, RoutingConfig cfg = {});

  /// Minimum-latency walk that consumes the chain in order: Dijkstra over
  /// |chain|+1 stacked copies of the network, moving up one layer at a node
  /// that hosts the next chain element. Ties go to the smaller state index.
  PathResult route(const Deployment& d, const SfcRequest& r) const;

  /// delay/SLA, or the unroutable penalty.
  double ratio(const Deployment& d, const SfcRequest& r) const;

  /// R = -(1/N) sum_k delay_k/sla_k - alpha * total instances.
  double reward(const Deployment& d, std::span<const SfcRequest> requests, double alpha) const;

  const NetworkTopology& topology() const { return topo_; }
  const RoutingConfig& config() const { return cfg_; }

 private:
  struct Arc {
    int to;
    double w;
  };
  NetworkTopology topo_;
  RoutingConfig cfg_;
  std::vector<std::vector<Arc>> arcs_;
};

PathResult route_chain(const NetworkTopology& t, const Deployment& d, const SfcRequest& r,
                       const RoutingConfig& cfg = {});

/// Throws EmptyRequestSet.
double compute_reward(const NetworkTopology& t, const Deployment& d, std::span<const SfcRequest> requests,
                      double alpha, const RoutingConfig& cfg = {});

/// sla = reference delay / slack. Throws UnroutableReference.
std::vector<SfcRequest> assign_sla(const NetworkTopology& t, std::vector<SfcRequest> requests,
                                   const Deployment& reference, double slack = 0.95,
                                   const RoutingConfig& cfg = {});

struct Metrics {
  double reward = 0.0;
  double avg_vnf = 0.0;
  double avg_delay_ms = 0.0;  // over routable requests
  double avg_slav = 0.0;      // unroutable counts as a violation
};

Metrics evaluate(const NetworkTopology& t, const Deployment& d, std::span<const SfcRequest> requests, double alpha,
                 const RoutingConfig& cfg = {});
Metrics evaluate(const Router& router, const Deployment& d, std::span<const SfcRequest> requests, double alpha);

/// Field-wise mean.
Metrics average(std::span<const Metrics> ms);

inline constexpr const char* kMetricsHeader = "reward,avg_vnf,avg_delay_ms,avg_slav";
std::string metrics_csv_row(const Metrics& m);

}  // namespace vnfscale

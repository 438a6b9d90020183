// SPDX-License-Identifier: Apache-2.0
//
// Core network-state types: topology, SFC requests, VNF deployments, and the
// scale-in/keep/out action grid applied to them.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vnfscale {

inline constexpr std::size_t kNumVnfTypes = 5;

enum class VnfType : std::uint8_t { Firewall = 0, NAT = 1, IDS = 2, Proxy = 3, LB = 4 };

inline constexpr std::array<VnfType, kNumVnfTypes> kAllVnfTypes = {
    VnfType::Firewall, VnfType::NAT, VnfType::IDS, VnfType::Proxy, VnfType::LB};

inline std::size_t index_of(VnfType v) { return static_cast<std::size_t>(v); }
std::string_view vnf_name(VnfType v);
std::optional<VnfType> parse_vnf(std::string_view name);

struct Node {
  int id = 0;
  bool deployable = true;
};

struct Link {
  int u = 0;
  int v = 0;
  double latency_ms = 1.0;
};

/// Undirected topology. Node ids are dense: nodes[i].id == i.
struct NetworkTopology {
  std::string name;
  std::vector<Node> nodes;
  std::vector<Link> links;

  std::size_t size() const { return nodes.size(); }
  bool deployable(int node) const { return nodes[static_cast<std::size_t>(node)].deployable; }
  /// Ascending ids of nodes that may host instances.
  std::vector<int> deployable_nodes() const;
  std::vector<int> non_deployable_nodes() const;
};

/// Throws Error(Disconnected | SelfLoop | DuplicateLink | NoDeployableNode |
/// InvalidNodeId) naming the offending element.
void validate_topology(const NetworkTopology& t);

struct SfcRequest {
  int id = 0;
  int ingress = 0;
  int egress = 0;
  std::vector<VnfType> chain;
  double sla_ms = 0.0;  // 0 until assigned

  bool needs(VnfType v) const;
};

void validate_request(const NetworkTopology& t, const SfcRequest& r);

/// Instance counts per (node, VNF type), row-major by node.
class Deployment {
 public:
  Deployment() = default;
  explicit Deployment(std::size_t nodes) : nodes_(nodes), counts_(nodes * kNumVnfTypes, 0) {}

  std::size_t nodes() const { return nodes_; }
  int at(int node, VnfType v) const { return counts_[slot(node, v)]; }
  int& at(int node, VnfType v) { return counts_[slot(node, v)]; }
  int at(int node, std::size_t v) const { return counts_[static_cast<std::size_t>(node) * kNumVnfTypes + v]; }
  int& at(int node, std::size_t v) { return counts_[static_cast<std::size_t>(node) * kNumVnfTypes + v]; }
  int total() const;
  /// Total instances of a single type across the network.
  int total(VnfType v) const;
  const std::vector<int>& raw() const { return counts_; }
  std::vector<int>& raw() { return counts_; }

  friend bool operator==(const Deployment&, const Deployment&) = default;

 private:
  std::size_t slot(int node, VnfType v) const {
    return static_cast<std::size_t>(node) * kNumVnfTypes + index_of(v);
  }
  std::size_t nodes_ = 0;
  std::vector<int> counts_;
};

/// Throws ShapeMismatch / InvalidArgument when d violates the deployment
/// invariants for t (negative counts, instances on non-deployable nodes).
void check_deployment(const NetworkTopology& t, const Deployment& d);

enum class Action : std::uint8_t { In = 0, Keep = 1, Out = 2 };
inline constexpr std::size_t kNumActions = 3;
std::string_view action_name(Action a);

/// One action per (deployable node, VNF type). Rows follow `nodes`, which are
/// the deployable node ids in ascending order.
struct ScalingGrid {
  std::vector<int> nodes;
  std::vector<Action> actions;  // [row * kNumVnfTypes + vnf]

  static ScalingGrid filled(const NetworkTopology& t, Action a);
  Action at(std::size_t row, std::size_t v) const { return actions[row * kNumVnfTypes + v]; }
  Action& at(std::size_t row, std::size_t v) { return actions[row * kNumVnfTypes + v]; }

  friend bool operator==(const ScalingGrid&, const ScalingGrid&) = default;
};

/// In removes one instance (clamped at zero), Out adds one, Keep is a no-op.
Deployment apply_scaling(const NetworkTopology& t, const Deployment& d, const ScalingGrid& g);

struct AdjacencyData {
  std::size_t n = 0;
  std::vector<double> adj;   // n*n, 0/1
  std::vector<double> attr;  // n*n, 1/latency where linked
  double adj_at(std::size_t i, std::size_t j) const { return adj[i * n + j]; }
  double attr_at(std::size_t i, std::size_t j) const { return attr[i * n + j]; }
};

AdjacencyData adjacency_and_edge_attrs(const NetworkTopology& t);

inline constexpr std::size_t kFeatureWidth = 2 + kNumVnfTypes;

/// Per-request node features: [src, count per type (masked to chain), dst].
struct FeatureMatrix {
  std::size_t rows = 0;
  std::vector<double> values;  // rows * kFeatureWidth
  double at(std::size_t i, std::size_t j) const { return values[i * kFeatureWidth + j]; }
};

FeatureMatrix node_features(const NetworkTopology& t, const Deployment& d, const SfcRequest& r);

}  // namespace vnfscale

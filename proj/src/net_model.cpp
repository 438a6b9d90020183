// SPDX-License-Identifier: Apache-2.0
#include "vnfscale/net_model.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <utility>

#include "vnfscale/error.hpp"

namespace vnfscale {

namespace {
constexpr std::array<std::string_view, kNumVnfTypes> kVnfNames = {"Firewall", "NAT", "IDS", "Proxy", "LB"};
}

std::string_view vnf_name(VnfType v) { return kVnfNames[index_of(v)]; }

std::optional<VnfType> parse_vnf(std::string_view name) {
  for (std::size_t i = 0; i < kNumVnfTypes; ++i)
    if (kVnfNames[i] == name) return static_cast<VnfType>(i);
  return std::nullopt;
}

std::string_view action_name(Action a) {
  switch (a) {
    case Action::In: return "in";
    case Action::Keep: return "keep";
    case Action::Out: return "out";
  }
  return "?";
}

std::vector<int> NetworkTopology::deployable_nodes() const {
  std::vector<int> out;
  for (const auto& n : nodes)
    if (n.deployable) out.push_back(n.id);
  return out;
}

std::vector<int> NetworkTopology::non_deployable_nodes() const {
  std::vector<int> out;
  for (const auto& n : nodes)
    if (!n.deployable) out.push_back(n.id);
  return out;
}

void validate_topology(const NetworkTopology& t) {
  const int n = static_cast<int>(t.nodes.size());
  if (n == 0) throw Error(Errc::Disconnected, "topology has no nodes");
  for (int i = 0; i < n; ++i)
    if (t.nodes[static_cast<std::size_t>(i)].id != i)
      throw Error(Errc::InvalidNodeId, "node at position " + std::to_string(i) + " has id " +
                                           std::to_string(t.nodes[static_cast<std::size_t>(i)].id));

  std::set<std::pair<int, int>> seen;
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    return x;
  };
  for (const auto& l : t.links) {
    const std::string name = "(" + std::to_string(l.u) + "," + std::to_string(l.v) + ")";
    if (l.u < 0 || l.u >= n || l.v < 0 || l.v >= n) throw Error(Errc::UnknownNode, "link " + name);
    if (l.u == l.v) throw Error(Errc::SelfLoop, "link " + name);
    if (!(l.latency_ms > 0.0)) throw Error(Errc::InvalidArgument, "link " + name + " latency must be positive");
    if (!seen.insert({std::min(l.u, l.v), std::max(l.u, l.v)}).second)
      throw Error(Errc::DuplicateLink, "link " + name);
    parent[static_cast<std::size_t>(find(l.u))] = find(l.v);
  }
  for (int i = 1; i < n; ++i)
    if (find(i) != find(0)) throw Error(Errc::Disconnected, "node " + std::to_string(i) + " unreachable from node 0");
  if (std::none_of(t.nodes.begin(), t.nodes.end(), [](const Node& x) { return x.deployable; }))
    throw Error(Errc::NoDeployableNode, "topology '" + t.name + "'");
}

bool SfcRequest::needs(VnfType v) const { return std::find(chain.begin(), chain.end(), v) != chain.end(); }

void validate_request(const NetworkTopology& t, const SfcRequest& r) {
  const int n = static_cast<int>(t.size());
  if (r.ingress < 0 || r.ingress >= n) throw Error(Errc::UnknownNode, "request " + std::to_string(r.id) + " ingress");
  if (r.egress < 0 || r.egress >= n) throw Error(Errc::UnknownNode, "request " + std::to_string(r.id) + " egress");
  if (r.chain.size() < 3 || r.chain.size() > 4)
    throw Error(Errc::InvalidArgument, "request " + std::to_string(r.id) + " chain length must be 3 or 4");
  std::set<VnfType> uniq(r.chain.begin(), r.chain.end());
  if (uniq.size() != r.chain.size())
    throw Error(Errc::InvalidArgument, "request " + std::to_string(r.id) + " chain entries must be distinct");
  if (r.sla_ms < 0.0) throw Error(Errc::InvalidArgument, "request " + std::to_string(r.id) + " sla_ms negative");
}

int Deployment::total() const { return std::accumulate(counts_.begin(), counts_.end(), 0); }

int Deployment::total(VnfType v) const {
  int s = 0;
  for (std::size_t i = 0; i < nodes_; ++i) s += counts_[i * kNumVnfTypes + index_of(v)];
  return s;
}

void check_deployment(const NetworkTopology& t, const Deployment& d) {
  if (d.nodes() != t.size())
    throw Error(Errc::ShapeMismatch, "deployment has " + std::to_string(d.nodes()) + " rows, topology has " +
                                         std::to_string(t.size()) + " nodes");
  for (std::size_t i = 0; i < d.nodes(); ++i)
    for (std::size_t v = 0; v < kNumVnfTypes; ++v) {
      const int c = d.at(static_cast<int>(i), v);
      if (c < 0) throw Error(Errc::InvalidArgument, "negative count at node " + std::to_string(i));
      if (c > 0 && !t.nodes[i].deployable)
        throw Error(Errc::InvalidArgument, "instances on non-deployable node " + std::to_string(i));
    }
}

ScalingGrid ScalingGrid::filled(const NetworkTopology& t, Action a) {
  ScalingGrid g;
  g.nodes = t.deployable_nodes();
  g.actions.assign(g.nodes.size() * kNumVnfTypes, a);
  return g;
}

Deployment apply_scaling(const NetworkTopology& t, const Deployment& d, const ScalingGrid& g) {
  const auto targets = t.deployable_nodes();
  if (d.nodes() != t.size() || g.nodes != targets || g.actions.size() != targets.size() * kNumVnfTypes)
    throw Error(Errc::ShapeMismatch, "grid covers " + std::to_string(g.nodes.size()) + " rows, topology has " +
                                         std::to_string(targets.size()) + " deployable nodes");
  Deployment out = d;
  for (std::size_t row = 0; row < targets.size(); ++row)
    for (std::size_t v = 0; v < kNumVnfTypes; ++v) {
      int& c = out.at(targets[row], v);
      switch (g.at(row, v)) {
        case Action::In: c = std::max(0, c - 1); break;
        case Action::Keep: break;
        case Action::Out: c += 1; break;
      }
    }
  return out;
}

AdjacencyData adjacency_and_edge_attrs(const NetworkTopology& t) {
  AdjacencyData a;
  a.n = t.size();
  a.adj.assign(a.n * a.n, 0.0);
  a.attr.assign(a.n * a.n, 0.0);
  for (const auto& l : t.links) {
    const auto u = static_cast<std::size_t>(l.u), v = static_cast<std::size_t>(l.v);
    a.adj[u * a.n + v] = a.adj[v * a.n + u] = 1.0;
    a.attr[u * a.n + v] = a.attr[v * a.n + u] = 1.0 / l.latency_ms;
  }
  return a;
}

FeatureMatrix node_features(const NetworkTopology& t, const Deployment& d, const SfcRequest& r) {
  const int n = static_cast<int>(t.size());
  if (r.ingress < 0 || r.ingress >= n || r.egress < 0 || r.egress >= n)
    throw Error(Errc::UnknownNode, "request " + std::to_string(r.id) + " endpoint outside topology");
  if (d.nodes() != t.size()) throw Error(Errc::ShapeMismatch, "deployment/topology size");
  FeatureMatrix f;
  f.rows = t.size();
  f.values.assign(f.rows * kFeatureWidth, 0.0);
  std::array<bool, kNumVnfTypes> needed{};
  for (VnfType v : r.chain) needed[index_of(v)] = true;
  for (int i = 0; i < n; ++i) {
    double* row = &f.values[static_cast<std::size_t>(i) * kFeatureWidth];
    row[0] = i == r.ingress ? 1.0 : 0.0;
    for (std::size_t v = 0; v < kNumVnfTypes; ++v) row[1 + v] = needed[v] ? d.at(i, v) : 0.0;
    row[kFeatureWidth - 1] = i == r.egress ? 1.0 : 0.0;
  }
  return f;
}

}  // namespace vnfscale

// SPDX-License-Identifier: Apache-2.0
#include "vnfscale/routing.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

#include "vnfscale/error.hpp"

namespace vnfscale {

Router::Router(const NetworkTopology& t, RoutingConfig cfg) : topo_(t), cfg_(cfg), arcs_(t.size()) {
  for (const auto& l : t.links) {
    arcs_[static_cast<std::size_t>(l.u)].push_back({l.v, l.latency_ms});
    arcs_[static_cast<std::size_t>(l.v)].push_back({l.u, l.latency_ms});
  }
  for (auto& a : arcs_) std::sort(a.begin(), a.end(), [](const Arc& x, const Arc& y) { return x.to < y.to; });
}

PathResult Router::route(const Deployment& d, const SfcRequest& r) const {
  PathResult res;
  for (VnfType v : r.chain)
    if (d.total(v) == 0) return res;

  const std::size_t n = topo_.size();
  const std::size_t layers = r.chain.size() + 1;
  const std::size_t states = n * layers;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(states, kInf);
  std::vector<int> pred(states, -1);
  std::vector<char> done(states, 0);

  const auto source = static_cast<std::size_t>(r.ingress);
  const std::size_t target = (layers - 1) * n + static_cast<std::size_t>(r.egress);
  dist[source] = 0.0;

  auto relax = [&](std::size_t from, std::size_t to, double w) {
    if (done[to]) return;
    const double nd = dist[from] + w;
    if (nd < dist[to] || (nd == dist[to] && static_cast<int>(from) < pred[to])) {
      dist[to] = nd;
      pred[to] = static_cast<int>(from);
    }
  };

  // Dense selection; the layered graph has at most a few hundred states.
  for (;;) {
    std::size_t u = states;
    for (std::size_t s = 0; s < states; ++s)
      if (!done[s] && dist[s] < kInf && (u == states || dist[s] < dist[u])) u = s;
    if (u == states || u == target) break;
    done[u] = 1;
    const std::size_t layer = u / n;
    const int node = static_cast<int>(u % n);
    if (layer + 1 < layers && d.at(node, r.chain[layer]) > 0) relax(u, u + n, cfg_.processing_delay_ms);
    for (const Arc& a : arcs_[static_cast<std::size_t>(node)]) relax(u, layer * n + static_cast<std::size_t>(a.to), a.w);
  }
  if (!(dist[target] < kInf)) return res;

  std::vector<std::size_t> trail;
  for (int s = static_cast<int>(target); s >= 0; s = pred[static_cast<std::size_t>(s)]) trail.push_back(static_cast<std::size_t>(s));
  std::reverse(trail.begin(), trail.end());

  res.routable = true;
  res.hops.push_back(r.ingress);
  for (std::size_t k = 1; k < trail.size(); ++k) {
    const int node = static_cast<int>(trail[k] % n);
    if (trail[k] / n != trail[k - 1] / n) {
      res.service_sites.push_back(node);
      res.delay_ms += cfg_.processing_delay_ms;
    } else {
      res.hops.push_back(node);
      const auto& arcs = arcs_[trail[k - 1] % n];
      const auto it = std::find_if(arcs.begin(), arcs.end(), [&](const Arc& a) { return a.to == node; });
      res.delay_ms += it->w;
    }
  }
  return res;
}

double Router::ratio(const Deployment& d, const SfcRequest& r) const {
  const PathResult p = route(d, r);
  if (!p.routable) return cfg_.unroutable_penalty;
  return p.delay_ms / r.sla_ms;
}

double Router::reward(const Deployment& d, std::span<const SfcRequest> requests, double alpha) const {
  if (requests.empty()) throw Error(Errc::EmptyRequestSet, "reward needs at least one request");
  double sum = 0.0;
  for (const auto& r : requests) sum += ratio(d, r);
  return -sum / static_cast<double>(requests.size()) - alpha * static_cast<double>(d.total());
}

PathResult route_chain(const NetworkTopology& t, const Deployment& d, const SfcRequest& r, const RoutingConfig& cfg) {
  return Router(t, cfg).route(d, r);
}

double compute_reward(const NetworkTopology& t, const Deployment& d, std::span<const SfcRequest> requests, double alpha,
                      const RoutingConfig& cfg) {
  return Router(t, cfg).reward(d, requests, alpha);
}

std::vector<SfcRequest> assign_sla(const NetworkTopology& t, std::vector<SfcRequest> requests,
                                   const Deployment& reference, double slack, const RoutingConfig& cfg) {
  if (!(slack > 0.0)) throw Error(Errc::InvalidArgument, "slack must be positive");
  const Router router(t, cfg);
  for (auto& r : requests) {
    const PathResult p = router.route(reference, r);
    if (!p.routable) throw Error(Errc::UnroutableReference, "request " + std::to_string(r.id));
    r.sla_ms = p.delay_ms / slack;
  }
  return requests;
}

Metrics evaluate(const Router& router, const Deployment& d, std::span<const SfcRequest> requests, double alpha) {
  if (requests.empty()) throw Error(Errc::EmptyRequestSet, "evaluate needs at least one request");
  Metrics m;
  double ratio_sum = 0.0, delay_sum = 0.0;
  std::size_t routed = 0, violations = 0;
  for (const auto& r : requests) {
    const PathResult p = router.route(d, r);
    if (!p.routable) {
      ratio_sum += router.config().unroutable_penalty;
      ++violations;
      continue;
    }
    ratio_sum += p.delay_ms / r.sla_ms;
    delay_sum += p.delay_ms;
    ++routed;
    if (p.delay_ms > r.sla_ms) ++violations;
  }
  const auto n = static_cast<double>(requests.size());
  m.avg_vnf = static_cast<double>(d.total());
  m.reward = -ratio_sum / n - alpha * m.avg_vnf;
  m.avg_delay_ms = routed ? delay_sum / static_cast<double>(routed) : 0.0;
  m.avg_slav = static_cast<double>(violations) / n;
  return m;
}

Metrics evaluate(const NetworkTopology& t, const Deployment& d, std::span<const SfcRequest> requests, double alpha,
                 const RoutingConfig& cfg) {
  return evaluate(Router(t, cfg), d, requests, alpha);
}

Metrics average(std::span<const Metrics> ms) {
  Metrics out;
  if (ms.empty()) return out;
  for (const auto& m : ms) {
    out.reward += m.reward;
    out.avg_vnf += m.avg_vnf;
    out.avg_delay_ms += m.avg_delay_ms;
    out.avg_slav += m.avg_slav;
  }
  const auto n = static_cast<double>(ms.size());
  out.reward /= n;
  out.avg_vnf /= n;
  out.avg_delay_ms /= n;
  out.avg_slav /= n;
  return out;
}

std::string metrics_csv_row(const Metrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.6f,%.4f,%.4f,%.6f", m.reward, m.avg_vnf, m.avg_delay_ms, m.avg_slav);
  return buf;
}

}  // namespace vnfscale

// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "vnfscale/error.hpp"

using namespace vnfscale;

namespace {

constexpr int A = 0, B = 1, C = 2;

NetworkTopology line3() { return {"line", {{A, true}, {B, true}, {C, true}}, {{A, B, 10.0}, {B, C, 10.0}}}; }

SfcRequest req(std::vector<VnfType> chain, int in = A, int out = C, double sla = 0.0) {
  return {0, in, out, std::move(chain), sla};
}

SfcRequest random_request(Rng& rng, const NetworkTopology& t, std::size_t max_chain) {
  SfcRequest r;
  r.ingress = static_cast<int>(rng.below(t.size()));
  r.egress = static_cast<int>(rng.below(t.size()));
  std::vector<VnfType> pool(kAllVnfTypes.begin(), kAllVnfTypes.end());
  rng.shuffle(pool);
  r.chain.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(1 + rng.below(max_chain)));
  r.sla_ms = 1.0;
  return r;
}

Deployment sparse_deployment(Rng& rng, const NetworkTopology& t, double p) {
  Deployment d(t.size());
  for (int i : t.deployable_nodes())
    for (std::size_t v = 0; v < kNumVnfTypes; ++v) d.at(i, v) = rng.uniform() < p ? 1 : 0;
  return d;
}

}  // namespace

TEST_SUITE("routing") {
  TEST_CASE("single-stage chain on a line walks straight through") {
    Deployment d(3);
    d.at(B, VnfType::Firewall) = 1;
    const PathResult p = route_chain(line3(), d, req({VnfType::Firewall}));
    CHECK(p.routable);
    CHECK(p.hops == std::vector<int>{A, B, C});
    CHECK(p.service_sites == std::vector<int>{B});
    CHECK(p.delay_ms == 20.0);
  }

  TEST_CASE("two-stage chain doubles back when instances sit at opposite ends") {
    Deployment d(3);
    d.at(C, VnfType::Firewall) = 1;
    d.at(A, VnfType::NAT) = 1;
    const auto r = req({VnfType::Firewall, VnfType::NAT});
    const PathResult p = route_chain(line3(), d, r);
    CHECK(p.delay_ms == 60.0);
    CHECK(oracle::walk_delay(line3(), d, r) == 60.0);
    CHECK(p.service_sites == std::vector<int>{C, A});
  }

  TEST_CASE("no instance of a stage means unroutable") {
    Deployment d(3);
    CHECK_FALSE(route_chain(line3(), d, req({VnfType::Firewall})).routable);
  }

  TEST_CASE("layered routing equals walk enumeration on random small instances") {
    Rng rng(2024);
    int mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
      const auto t = oracle::random_topology(rng, 2 + rng.below(5), 0.35, 20, 0.8);
      const Deployment d = sparse_deployment(rng, t, 0.3);
      const SfcRequest r = random_request(rng, t, 3);
      const PathResult p = route_chain(t, d, r);
      const double expect = oracle::walk_delay(t, d, r);
      if (p.routable != std::isfinite(expect) || (p.routable && p.delay_ms != expect)) ++mismatches;
    }
    CHECK(mismatches == 0);
  }

  TEST_CASE("routable paths respect chain order and hosting") {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
      const auto t = oracle::random_topology(rng, 3 + rng.below(6), 0.3, 15, 0.8);
      const Deployment d = sparse_deployment(rng, t, 0.4);
      const SfcRequest r = random_request(rng, t, 4);
      const PathResult p = route_chain(t, d, r);
      if (!p.routable) continue;
      REQUIRE(p.service_sites.size() == r.chain.size());
      CHECK(p.hops.front() == r.ingress);
      CHECK(p.hops.back() == r.egress);
      // Each site must be visited after the previous one along the walk.
      std::size_t pos = 0;
      for (std::size_t k = 0; k < r.chain.size(); ++k) {
        CHECK(d.at(p.service_sites[k], r.chain[k]) > 0);
        while (pos < p.hops.size() && p.hops[pos] != p.service_sites[k]) ++pos;
        CHECK(pos < p.hops.size());
      }
      // Delay is the sum of traversed links.
      double sum = 0.0;
      for (std::size_t k = 0; k + 1 < p.hops.size(); ++k)
        for (const auto& l : t.links)
          if ((l.u == p.hops[k] && l.v == p.hops[k + 1]) || (l.v == p.hops[k] && l.u == p.hops[k + 1])) sum += l.latency_ms;
      CHECK(sum == doctest::Approx(p.delay_ms));
    }
  }

  TEST_CASE("adding an instance never increases delay") {
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
      const auto t = oracle::random_topology(rng, 3 + rng.below(6), 0.3, 15, 0.8);
      Deployment d = sparse_deployment(rng, t, 0.3);
      const SfcRequest r = random_request(rng, t, 3);
      const PathResult before = route_chain(t, d, r);
      const auto nodes = t.deployable_nodes();
      d.at(nodes[rng.below(nodes.size())], rng.below(kNumVnfTypes)) += 1;
      const PathResult after = route_chain(t, d, r);
      if (before.routable) {
        CHECK(after.routable);
        CHECK(after.delay_ms <= before.delay_ms);
      }
    }
  }

  TEST_CASE("reward fixtures") {
    // Two requests with delay ratios 0.5 and 1.5 and ten instances in total.
    const NetworkTopology skew{"skew", {{A, true}, {B, true}, {C, true}}, {{A, B, 10.0}, {B, C, 20.0}}};
    Deployment d(3);
    d.at(B, VnfType::Firewall) = 10;
    std::vector<SfcRequest> rs{req({VnfType::Firewall}, A, C, 60.0), req({VnfType::Firewall}, A, C, 20.0)};
    CHECK(compute_reward(skew, d, rs, 0.2) == -3.0);
    NetworkTopology t = line3();

    Deployment one(3);
    one.at(B, VnfType::Firewall) = 1;
    std::vector<SfcRequest> unit{req({VnfType::Firewall}, A, C, 20.0)};
    CHECK(compute_reward(t, one, unit, 0.0) == -1.0);

    std::vector<SfcRequest> lost{req({VnfType::NAT}, A, C, 20.0)};
    CHECK(compute_reward(t, one, lost, 0.0) == -20.0);

    std::vector<SfcRequest> empty;
    CHECK_THROWS_AS(compute_reward(t, one, empty, 0.2), Error);
  }

  TEST_CASE("adding an unused instance lowers the reward by exactly alpha") {
    Deployment d(3);
    d.at(B, VnfType::Firewall) = 1;
    std::vector<SfcRequest> rs{req({VnfType::Firewall}, A, C, 25.0)};
    const double before = compute_reward(line3(), d, rs, 0.2);
    d.at(A, VnfType::LB) = 1;
    CHECK(before - compute_reward(line3(), d, rs, 0.2) == doctest::Approx(0.2).epsilon(1e-12));
  }

  TEST_CASE("assign_sla divides the reference delay by the slack") {
    Deployment d(3);
    d.at(B, VnfType::Firewall) = 1;
    std::vector<SfcRequest> rs{req({VnfType::Firewall})};
    CHECK(assign_sla(line3(), rs, d, 0.95)[0].sla_ms == doctest::Approx(20.0 / 0.95));
    CHECK(assign_sla(line3(), rs, d, 1.0)[0].sla_ms == 20.0);
    NetworkTopology wide{"w", {{0, true}, {1, true}}, {{0, 1, 95.0}}};
    Deployment w(2);
    w.at(0, VnfType::NAT) = 1;
    std::vector<SfcRequest> wr{{0, 0, 1, {VnfType::NAT}, 0.0}};
    CHECK(assign_sla(wide, wr, w, 0.95)[0].sla_ms == doctest::Approx(100.0));
    Deployment empty(3);
    try {
      assign_sla(line3(), rs, empty);
      FAIL("expected UnroutableReference");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::UnroutableReference);
    }
  }

  TEST_CASE("metrics") {
    Deployment d(3);
    d.at(B, VnfType::Firewall) = 1;
    std::vector<SfcRequest> rs = assign_sla(line3(), {req({VnfType::Firewall}), req({VnfType::Firewall}, C, A)}, d);
    const Metrics ok = evaluate(line3(), d, rs, 0.2);
    CHECK(ok.avg_slav == 0.0);
    CHECK(ok.reward == doctest::Approx(-0.95 - 0.2));
    CHECK(ok.avg_vnf == 1.0);

    rs[1].chain = {VnfType::NAT};
    const Metrics half = evaluate(line3(), d, rs, 0.2);
    CHECK(half.avg_slav == 0.5);
    CHECK(half.avg_delay_ms == 20.0);
    CHECK(std::string(kMetricsHeader) == "reward,avg_vnf,avg_delay_ms,avg_slav");
  }
}

// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "vnfscale/diff/layers.hpp"
#include "vnfscale/diff/ops.hpp"
#include "vnfscale/error.hpp"

using namespace vnfscale;
using namespace vnfscale::diff;

namespace {

std::vector<double> uniform_values(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

// Values in [-2, 2] kept at least `gap` away from zero, for ops with a kink there.
std::vector<double> away_from_zero(Rng& rng, std::size_t n, double gap = 0.05) {
  std::vector<double> v = uniform_values(rng, n, -2.0, 2.0);
  for (auto& x : v)
    if (std::abs(x) < gap) x = x < 0 ? -gap - 0.1 : gap + 0.1;
  return v;
}

Tensor param(Rng& rng, std::size_t r, std::size_t c, double lo = -2.0, double hi = 2.0) {
  return Tensor::parameter(r, c, uniform_values(rng, r * c, lo, hi));
}

// Fixed random weighting so that every output element influences the loss.
Tensor weighted(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  return sum_all(mul(y, Tensor::constant(y.rows(), y.cols(), uniform_values(rng, y.size(), -1.0, 1.0))));
}

constexpr double kTol = 1e-4;
constexpr int kSeeds = 20;

}  // namespace

TEST_SUITE("diff") {
  TEST_CASE("forward examples") {
    const Tensor a = Tensor::constant(2, 2, {1, 2, 3, 4});
    const Tensor b = Tensor::constant(2, 2, {5, 6, 7, 8});
    const Tensor m = matmul(a, b);
    CHECK(m(0, 0) == 19.0);
    CHECK(m(1, 1) == 50.0);
    CHECK(transpose(a)(0, 1) == 3.0);
    CHECK(sum(a, 0)(0, 1) == 6.0);
    CHECK(sum(a, 1)(1, 0) == 7.0);
    CHECK(mean_all(a).item() == 2.5);
    const Tensor s = softmax_rows(Tensor::constant(1, 3, {0, 0, 0}));
    for (std::size_t j = 0; j < 3; ++j) CHECK(s(0, j) == doctest::Approx(1.0 / 3.0));
    const Tensor ls = log_softmax_rows(Tensor::constant(1, 2, {0, 0}));
    CHECK(ls(0, 0) == doctest::Approx(std::log(0.5)));
    CHECK(leaky_relu(Tensor::constant(1, 2, {-1, 2}), 0.2)(0, 0) == doctest::Approx(-0.2));
    CHECK(clamp(Tensor::constant(1, 3, {-5, 0.5, 5}), 0, 1)(0, 2) == 1.0);
    const Tensor sc = scatter_add_rows(Tensor::constant(3, 1, {1, 2, 3}), {0, 1, 0}, 2);
    CHECK(sc(0, 0) == 4.0);
    CHECK(sc(1, 0) == 2.0);
    CHECK(gather_rows(a, {1, 1, 0})(1, 1) == 4.0);
    const Tensor ln = layer_norm(Tensor::constant(1, 2, {1, 3}), Tensor::constant(1, 2, {1, 1}),
                                 Tensor::constant(1, 2, {0, 0}), 1e-12);
    CHECK(ln(0, 0) == doctest::Approx(-1.0));
    CHECK(ln(0, 1) == doctest::Approx(1.0));
  }

  TEST_CASE("softmax rows are distributions and masked entries vanish") {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t r = 1 + rng.below(5), c = 2 + rng.below(6);
      std::vector<std::uint8_t> mask(r * c, 0);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 1; j < c; ++j) mask[i * c + j] = rng.uniform() < 0.4;
      const Tensor s = softmax_rows(masked_fill(param(rng, r, c, -20, 20), mask, kMaskValue));
      for (std::size_t i = 0; i < r; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          CHECK(s(i, j) >= 0.0);
          if (mask[i * c + j]) CHECK(s(i, j) < 1e-12);
          total += s(i, j);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
      }
    }
  }

  TEST_CASE("backward examples") {
    const Tensor w = Tensor::parameter(1, 3, {0.5, -1.0, 2.0});
    const Tensor x = Tensor::constant(2, 1, {3.0, -4.0});
    backward(sum_all(matmul(x, w)));
    // d/dW sum(x W) = column sums of x broadcast over W's columns.
    for (double g : w.grad()) CHECK(g == -1.0);

    const Tensor unused = Tensor::parameter(1, 1, {1.0});
    const Tensor p = Tensor::parameter(1, 1, {2.0});
    backward(square(p));
    CHECK(p.grad()[0] == 4.0);
    CHECK(unused.grad().empty());
    CHECK(collect_grads([] {
            ParamStore s;
            s.add_filled("u", 1, 2, 1.0);
            return s;
          }())
              .at("u") == std::vector<double>{0.0, 0.0});

    try {
      backward(Tensor::parameter(1, 2, {1, 2}));
      FAIL("expected NonScalarLoss");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::NonScalarLoss);
    }
  }

  TEST_CASE("no-grad guard records nothing") {
    const Tensor p = Tensor::parameter(1, 1, {2.0});
    Tensor y;
    {
      NoGradGuard guard;
      y = square(p);
    }
    CHECK_FALSE(y.requires_grad());
    CHECK(grad_enabled());
  }

  TEST_CASE("elementwise and matrix ops match finite differences") {
    double worst = 0.0;
    for (int seed = 0; seed < kSeeds; ++seed) {
      Rng rng(static_cast<std::uint64_t>(seed) + 100);
      const Tensor a = param(rng, 3, 4), b = param(rng, 3, 4), c = param(rng, 4, 2);
      const Tensor row = param(rng, 1, 4), col = param(rng, 3, 1), s = param(rng, 1, 1);
      const Tensor pos = param(rng, 3, 4, 0.5, 2.0), lb = param(rng, 1, 2);
      const Tensor kink = Tensor::parameter(3, 4, away_from_zero(rng, 12));
      const Tensor kink2 = Tensor::parameter(3, 4, away_from_zero(rng, 12));
      const auto u = static_cast<std::uint64_t>(seed);
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(matmul(a, c), u); }, {a, c}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(transpose(a), u); }, {a}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(add(a, b), u); }, {a, b}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(sub(a, b), u); }, {a, b}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(mul(a, b), u); }, {a, b}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(div(a, pos), u); }, {a, pos}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(add_row(a, row), u); }, {a, row}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(mul_col(a, col), u); }, {a, col}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(outer_add(col, row), u); }, {col, row}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(scale(a, -1.7), u); }, {a}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(scale_by(a, s), u); }, {a, s}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(add_scalar(a, 0.3), u); }, {a}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(concat_cols({a, b}), u); }, {a, b}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(concat_rows({a, b}), u); }, {a, b}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(slice_cols(a, 1, 2), u); }, {a}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(slice_rows(a, 1, 2), u); }, {a}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(relu(kink), u); }, {kink}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(leaky_relu(kink, 0.2), u); }, {kink}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(sigmoid(a), u); }, {a}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(tanh(a), u); }, {a}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(exp(a), u); }, {a}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(log(pos), u); }, {pos}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(square(a), u); }, {a}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(clamp(kink, -1.0, 1.0), u); }, {kink}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(minimum(kink, kink2), u); }, {kink, kink2}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(sum(a, 0), u); }, {a}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(sum(a, 1), u); }, {a}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(mean(a, 0), u); }, {a}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(mean(a, 1), u); }, {a}));
      worst = std::max(worst, oracle::max_grad_error([&] { return mean_all(square(a)); }, {a}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(gather_rows(a, {2, 0, 2}), u); }, {a}));
      worst = std::max(worst,
                       oracle::max_grad_error([&] { return weighted(scatter_add_rows(a, {1, 0, 1}, 2), u); }, {a}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(linear(a, c, lb), u); }, {a, c, lb}));
    }
    CHECK(worst < kTol);
  }

  TEST_CASE("softmax, log-softmax, masking and layer norm match finite differences") {
    double worst = 0.0;
    for (int seed = 0; seed < kSeeds; ++seed) {
      Rng rng(static_cast<std::uint64_t>(seed) + 300);
      const Tensor a = param(rng, 3, 5);
      const Tensor gain = param(rng, 1, 5), bias = param(rng, 1, 5);
      std::vector<std::uint8_t> mask(15, 0);
      mask[3] = mask[7] = mask[14] = 1;
      const auto u = static_cast<std::uint64_t>(seed);
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(softmax_rows(a), u); }, {a}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(log_softmax_rows(a), u); }, {a}));
      worst = std::max(worst, oracle::max_grad_error(
                                  [&] { return weighted(softmax_rows(masked_fill(a, mask, kMaskValue)), u); }, {a}));
      worst = std::max(worst, oracle::max_grad_error(
                                  [&] { return weighted(layer_norm(a, gain, bias, 1e-5), u); }, {a, gain, bias}));
    }
    CHECK(worst < kTol);
  }

  TEST_CASE("GRU cell and MLP match finite differences") {
    double worst = 0.0;
    for (int seed = 0; seed < kSeeds; ++seed) {
      Rng rng(static_cast<std::uint64_t>(seed) + 500);
      ParamStore store;
      add_gru(store, "g", 3, 4, rng);
      add_mlp(store, "m", {4, 6, 2}, rng);
      const Tensor x = param(rng, 2, 3), h = param(rng, 2, 4, -1, 1);
      const GruWeights g = gru_weights(store, "g");
      const Mlp m = mlp_weights(store, "m", 2);
      const auto u = static_cast<std::uint64_t>(seed);
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(gru_cell(x, h, g), u); },
                                                     {x, h, g.w_in, g.w_hid, g.b_in, g.b_hid}));
      worst = std::max(worst, oracle::max_grad_error([&] { return weighted(mlp_forward(h, m), u); },
                                                     {h, m.weights[0], m.weights[1], m.biases[0], m.biases[1]}));
    }
    CHECK(worst < kTol);
  }

  TEST_CASE("GRU with zero parameters halves the state") {
    ParamStore store;
    store.add_zeros("g/w_in", 2, 9);
    store.add_zeros("g/w_hid", 3, 9);
    store.add_zeros("g/b_in", 1, 9);
    store.add_zeros("g/b_hid", 1, 9);
    const Tensor h = Tensor::constant(1, 3, {1.0, -2.0, 0.4});
    const Tensor out = gru_cell(Tensor::constant(1, 2, {5.0, -3.0}), h, gru_weights(store, "g"));
    for (std::size_t j = 0; j < 3; ++j) CHECK(out(0, j) == doctest::Approx(0.5 * h(0, j)));
  }

  TEST_CASE("a strongly negative update-gate bias carries the state through") {
    Rng rng(9);
    ParamStore store;
    add_gru(store, "g", 2, 3, rng);
    auto b = store.get("g/b_in").mutable_values();
    for (std::size_t j = 3; j < 6; ++j) b[j] = -50.0;
    const Tensor h = Tensor::constant(1, 3, {0.3, -0.7, 1.1});
    const Tensor out = gru_cell(Tensor::constant(1, 2, {1.0, 1.0}), h, gru_weights(store, "g"));
    for (std::size_t j = 0; j < 3; ++j) CHECK(out(0, j) == doctest::Approx(h(0, j)).epsilon(1e-9));
  }

  TEST_CASE("adaptive-moment step") {
    ParamStore store;
    store.add("w", 1, 3, {1.0, -1.0, 0.5});
    const ParamStore before = store;
    adam_step(store, {{"w", {0.0, 0.0, 0.0}}}, {});
    CHECK(store.same_values(before));
    CHECK(store.step() == 1);

    ParamStore fresh = before;
    const AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
    adam_step(fresh, {{"w", {2.0, -0.5, 1e-3}}}, cfg);
    // First bias-corrected step moves each weight by lr against the sign of its gradient.
    const auto v = fresh.get("w").values();
    CHECK(v[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
    CHECK(v[1] == doctest::Approx(-1.0 + 0.01).epsilon(1e-6));
    CHECK(std::abs(v[2] - 0.5) <= 0.01 + 1e-8);

    CHECK_THROWS_AS(adam_step(fresh, {{"w", {1.0}}}, cfg), Error);
    CHECK_THROWS_AS(adam_step(fresh, {{"missing", {1.0}}}, cfg), Error);
  }

  TEST_CASE("gradient clipping rescales to the norm bound") {
    GradMap g{{"a", {3.0, 0.0}}, {"b", {4.0}}};
    CHECK(clip_grad_norm(g, 1.0) == doctest::Approx(5.0));
    CHECK(g["a"][0] == doctest::Approx(0.6));
    CHECK(g["b"][0] == doctest::Approx(0.8));
    GradMap small{{"a", {0.1}}};
    clip_grad_norm(small, 1.0);
    CHECK(small["a"][0] == 0.1);
  }

  TEST_CASE("identical seeds give bit-identical training steps") {
    auto run = [] {
      Rng rng(5);
      ParamStore store;
      add_mlp(store, "m", {3, 8, 1}, rng);
      const Tensor x = Tensor::constant(4, 3, uniform_values(rng, 12, -1, 1));
      for (int step = 0; step < 10; ++step) {
        store.zero_grad();
        backward(mean_all(square(mlp_forward(x, mlp_weights(store, "m", 2)))));
        adam_step(store, collect_grads(store), {});
      }
      return store;
    };
    CHECK(run().same_values(run()));
  }

  TEST_CASE("parameter store copies are deep and serialise losslessly") {
    Rng rng(2);
    ParamStore a;
    a.add_glorot("w", 3, 2, rng);
    ParamStore b = a;
    b.get("w").mutable_values()[0] += 1.0;
    CHECK_FALSE(a.same_values(b));
    const ParamStore back = store_from_json(to_json(a));
    CHECK(back.same_values(a));
    CHECK_THROWS_AS(a.add_zeros("w", 1, 1), Error);
    CHECK_THROWS_AS(a.get("nope"), Error);
  }
}

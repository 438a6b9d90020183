// SPDX-License-Identifier: Apache-2.0
#include "vnfscale/diff/layers.hpp"

#include <cmath>

#include "vnfscale/error.hpp"

namespace vnfscale::diff {

void add_gru(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t hidden, Rng& rng) {
  const double limit = 1.0 / std::sqrt(static_cast<double>(hidden));
  store.add_uniform(prefix + "/w_in", in, 3 * hidden, limit, rng);
  store.add_uniform(prefix + "/w_hid", hidden, 3 * hidden, limit, rng);
  store.add_uniform(prefix + "/b_in", 1, 3 * hidden, limit, rng);
  store.add_uniform(prefix + "/b_hid", 1, 3 * hidden, limit, rng);
}

GruWeights gru_weights(const ParamStore& store, const std::string& prefix) {
  return {store.get(prefix + "/w_in"), store.get(prefix + "/w_hid"), store.get(prefix + "/b_in"),
          store.get(prefix + "/b_hid")};
}

Tensor gru_cell(const Tensor& x, const Tensor& h, const GruWeights& w) {
  const std::size_t hd = w.hidden();
  if (x.cols() != w.w_in.rows() || h.cols() != hd || x.rows() != h.rows())
    throw Error(Errc::ShapeMismatch, "gru_cell: x " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                                         ", h " + std::to_string(h.rows()) + "x" + std::to_string(h.cols()) +
                                         ", weights expect in=" + std::to_string(w.w_in.rows()) +
                                         " hidden=" + std::to_string(hd));
  const Tensor gi = linear(x, w.w_in, w.b_in);
  const Tensor gh = linear(h, w.w_hid, w.b_hid);
  const Tensor r = sigmoid(add(slice_cols(gi, 0, hd), slice_cols(gh, 0, hd)));
  const Tensor u = sigmoid(add(slice_cols(gi, hd, hd), slice_cols(gh, hd, hd)));
  const Tensor c = tanh(add(slice_cols(gi, 2 * hd, hd), mul(r, slice_cols(gh, 2 * hd, hd))));
  return add(h, mul(u, sub(c, h)));
}

void add_mlp(ParamStore& store, const std::string& prefix, const std::vector<std::size_t>& dims, Rng& rng) {
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    store.add_glorot(prefix + "/w" + std::to_string(k), dims[k], dims[k + 1], rng);
    store.add_zeros(prefix + "/b" + std::to_string(k), 1, dims[k + 1]);
  }
}

Mlp mlp_weights(const ParamStore& store, const std::string& prefix, std::size_t layers) {
  Mlp m;
  for (std::size_t k = 0; k < layers; ++k) {
    m.weights.push_back(store.get(prefix + "/w" + std::to_string(k)));
    m.biases.push_back(store.get(prefix + "/b" + std::to_string(k)));
  }
  return m;
}

Tensor mlp_forward(const Tensor& x, const Mlp& mlp) {
  Tensor h = x;
  for (std::size_t k = 0; k < mlp.weights.size(); ++k) {
    h = linear(h, mlp.weights[k], mlp.biases[k]);
    if (k + 1 < mlp.weights.size()) h = relu(h);
  }
  return h;
}

}  // namespace vnfscale::diff

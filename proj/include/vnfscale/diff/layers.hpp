// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "vnfscale/diff/ops.hpp"
#include "vnfscale/diff/params.hpp"

namespace vnfscale::diff {

/// Gate weights stacked as [reset | update | candidate] along columns.
struct GruWeights {
  Tensor w_in;   // [in x 3H]
  Tensor w_hid;  // [H x 3H]
  Tensor b_in;   // [1 x 3H]
  Tensor b_hid;  // [1 x 3H]

  std::size_t hidden() const { return w_hid.rows(); }
};

void add_gru(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t hidden, Rng& rng);
GruWeights gru_weights(const ParamStore& store, const std::string& prefix);

/// Batched GRU step over rows:
///   r = sig(x Wr + h Ur), u = sig(x Wu + h Uu), c = tanh(x Wc + r*(h Uc))
///   h' = (1-u)*h + u*c
Tensor gru_cell(const Tensor& x, const Tensor& h, const GruWeights& w);

/// Stack of linear layers with ReLU between them (none after the last).
struct Mlp {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
};

void add_mlp(ParamStore& store, const std::string& prefix, const std::vector<std::size_t>& dims, Rng& rng);
Mlp mlp_weights(const ParamStore& store, const std::string& prefix, std::size_t layers);
Tensor mlp_forward(const Tensor& x, const Mlp& mlp);

}  // namespace vnfscale::diff

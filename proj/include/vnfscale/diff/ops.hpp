// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "vnfscale/diff/tensor.hpp"

namespace vnfscale::diff {

/// Stand-in for -infinity in masked softmax inputs.
inline constexpr double kMaskValue = -1e9;

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
/// a [m x n] + row [1 x n] broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);
/// a [m x n] * col [m x 1] broadcast over columns.
Tensor mul_col(const Tensor& a, const Tensor& col);
/// col [m x 1] + row [1 x n] -> [m x n].
Tensor outer_add(const Tensor& col, const Tensor& row);
Tensor scale(const Tensor& a, double s);
/// a * s where s is a 1x1 tensor.
Tensor scale_by(const Tensor& a, const Tensor& s);
Tensor add_scalar(const Tensor& a, double s);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);
Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count);

Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
/// Gradient passes where lo <= a <= hi.
Tensor clamp(const Tensor& a, double lo, double hi);
/// Elementwise min; ties send the gradient to `a`.
Tensor minimum(const Tensor& a, const Tensor& b);

Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);

/// axis 0 reduces rows (-> 1 x cols), axis 1 reduces columns (-> rows x 1).
Tensor sum(const Tensor& a, int axis);
Tensor mean(const Tensor& a, int axis);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

/// Row-wise normalisation followed by gain/bias [1 x n].
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-9);

/// Positions with mask != 0 become `fill` and pass no gradient.
Tensor masked_fill(const Tensor& a, const std::vector<std::uint8_t>& mask, double fill);

/// out[k] = a[idx[k]].
Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& idx);
/// out[idx[k]] += a[k], out has `out_rows` rows.
Tensor scatter_add_rows(const Tensor& a, const std::vector<std::size_t>& idx, std::size_t out_rows);

/// x W + b.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

}  // namespace vnfscale::diff

// SPDX-License-Identifier: Apache-2.0
#include "vnfscale/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vnfscale/error.hpp"

namespace vnfscale::diff {

using detail::make_result;

namespace {

std::string shape_of(const Tensor& t) { return std::to_string(t.rows()) + "x" + std::to_string(t.cols()); }

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(Errc::ShapeMismatch, std::string(op) + ": " + shape_of(a) + " vs " + shape_of(b));
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) mismatch(op, a, b);
}

// Gradient sink of a parent, or nullptr when it does not need one.
double* sink(Node& self, std::size_t k) {
  Node& p = *self.parents[k];
  return p.requires_grad ? p.grad_buffer() : nullptr;
}

template <typename F, typename D>
Tensor unary(const Tensor& a, F f, D dfdx_from_xy) {
  std::vector<double> y(a.size());
  const auto x = a.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(x[i]);
  return make_result(a.rows(), a.cols(), std::move(y), {a.node()}, [dfdx_from_xy](Node& self) {
    double* g = sink(self, 0);
    if (!g) return;
    const auto& x = self.parents[0]->value;
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * dfdx_from_xy(x[i], self.value[i]);
  });
}

// C[m x n] += A[m x k] * B[k x n], with optional transposes expressed by strides.
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n, bool ta,
              bool tb) {
  // a(i,p) = ta ? a[p*m + i] : a[i*k + p];  b(p,j) = tb ? b[j*k + p] : b[p*n + j]
  if (!tb) {
    for (std::size_t i = 0; i < m; ++i) {
      double* ci = c + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = ta ? a[p * m + i] : a[i * k + p];
        if (aip == 0.0) continue;
        const double* bp = b + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double* bj = b + j * k;
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += (ta ? a[p * m + i] : a[i * k + p]) * bj[p];
        ci[j] += s;
      }
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) mismatch("matmul", a, b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> c(m * n, 0.0);
  gemm_acc(a.values().data(), b.values().data(), c.data(), m, k, n, false, false);
  return make_result(m, n, std::move(c), {a.node(), b.node()}, [m, k, n](Node& self) {
    const double* A = self.parents[0]->value.data();
    const double* B = self.parents[1]->value.data();
    if (double* ga = sink(self, 0)) gemm_acc(self.grad.data(), B, ga, m, n, k, false, true);  // dC B^T
    if (double* gb = sink(self, 1)) gemm_acc(A, self.grad.data(), gb, k, m, n, true, false);  // A^T dC
  });
}

Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> y(m * n);
  const auto x = a.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[j * m + i] = x[i * n + j];
  return make_result(n, m, std::move(y), {a.node()}, [m, n](Node& self) {
    if (double* g = sink(self, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] + b.values()[i];
  return make_result(a.rows(), a.cols(), std::move(y), {a.node(), b.node()}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k)
      if (double* g = sink(self, k))
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] - b.values()[i];
  return make_result(a.rows(), a.cols(), std::move(y), {a.node(), b.node()}, [](Node& self) {
    if (double* g = sink(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (double* g = sink(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] * b.values()[i];
  return make_result(a.rows(), a.cols(), std::move(y), {a.node(), b.node()}, [](Node& self) {
    const auto& x0 = self.parents[0]->value;
    const auto& x1 = self.parents[1]->value;
    if (double* g = sink(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * x1[i];
    if (double* g = sink(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * x0[i];
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same("div", a, b);
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] / b.values()[i];
  return make_result(a.rows(), a.cols(), std::move(y), {a.node(), b.node()}, [](Node& self) {
    const auto& x1 = self.parents[1]->value;
    if (double* g = sink(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] / x1[i];
    if (double* g = sink(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i] * self.value[i] / x1[i];
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) mismatch("add_row", a, row);
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> y(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] += row.values()[j];
  return make_result(m, n, std::move(y), {a.node(), row.node()}, [m, n](Node& self) {
    if (double* g = sink(self, 0))
      for (std::size_t i = 0; i < m * n; ++i) g[i] += self.grad[i];
    if (double* g = sink(self, 1))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
  });
}

Tensor mul_col(const Tensor& a, const Tensor& col) {
  if (col.cols() != 1 || col.rows() != a.rows()) mismatch("mul_col", a, col);
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = a.values()[i * n + j] * col.values()[i];
  return make_result(m, n, std::move(y), {a.node(), col.node()}, [m, n](Node& self) {
    const auto& x = self.parents[0]->value;
    const auto& c = self.parents[1]->value;
    if (double* g = sink(self, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j] * c[i];
    if (double* g = sink(self, 1))
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += self.grad[i * n + j] * x[i * n + j];
        g[i] += s;
      }
  });
}

Tensor outer_add(const Tensor& col, const Tensor& row) {
  if (col.cols() != 1 || row.rows() != 1) mismatch("outer_add", col, row);
  const std::size_t m = col.rows(), n = row.cols();
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = col.values()[i] + row.values()[j];
  return make_result(m, n, std::move(y), {col.node(), row.node()}, [m, n](Node& self) {
    double* gc = sink(self, 0);
    double* gr = sink(self, 1);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (gc) gc[i] += self.grad[i * n + j];
        if (gr) gr[j] += self.grad[i * n + j];
      }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  if (s.size() != 1) mismatch("scale_by", a, s);
  const double k = s.values()[0];
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.values()[i] * k;
  return make_result(a.rows(), a.cols(), std::move(y), {a.node(), s.node()}, [](Node& self) {
    const auto& x = self.parents[0]->value;
    const double k = self.parents[1]->value[0];
    if (double* g = sink(self, 0))
      for (std::size_t i = 0; i < x.size(); ++i) g[i] += self.grad[i] * k;
    if (double* g = sink(self, 1)) {
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) s += self.grad[i] * x[i];
      g[0] += s;
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw Error(Errc::ShapeMismatch, "concat_cols of nothing");
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& p : parts) {
    if (p.rows() != m) mismatch("concat_cols", parts[0], p);
    n += p.cols();
    parents.push_back(p.node());
  }
  std::vector<double> y(m * n);
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(p.values().data() + i * p.cols(), p.cols(), y.data() + i * n + off);
    off += p.cols();
  }
  return make_result(m, n, std::move(y), std::move(parents), [m, n](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      const std::size_t c = self.parents[k]->cols;
      if (double* g = sink(self, k))
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i * n + off + j];
      off += c;
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw Error(Errc::ShapeMismatch, "concat_rows of nothing");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& p : parts) {
    if (p.cols() != n) mismatch("concat_rows", parts[0], p);
    m += p.rows();
    parents.push_back(p.node());
  }
  std::vector<double> y;
  y.reserve(m * n);
  for (const auto& p : parts) y.insert(y.end(), p.values().begin(), p.values().end());
  return make_result(m, n, std::move(y), std::move(parents), [](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      const std::size_t len = self.parents[k]->value.size();
      if (double* g = sink(self, k))
        for (std::size_t i = 0; i < len; ++i) g[i] += self.grad[off + i];
      off += len;
    }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  if (start + count > a.cols())
    throw Error(Errc::ShapeMismatch, "slice_cols [" + std::to_string(start) + ",+" + std::to_string(count) + ") of " + shape_of(a));
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> y(m * count);
  for (std::size_t i = 0; i < m; ++i) std::copy_n(a.values().data() + i * n + start, count, y.data() + i * count);
  return make_result(m, count, std::move(y), {a.node()}, [m, n, start, count](Node& self) {
    if (double* g = sink(self, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < count; ++j) g[i * n + start + j] += self.grad[i * count + j];
  });
}

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count) {
  if (start + count > a.rows())
    throw Error(Errc::ShapeMismatch, "slice_rows [" + std::to_string(start) + ",+" + std::to_string(count) + ") of " + shape_of(a));
  const std::size_t n = a.cols();
  std::vector<double> y(a.values().begin() + static_cast<std::ptrdiff_t>(start * n),
                        a.values().begin() + static_cast<std::ptrdiff_t>((start + count) * n));
  return make_result(count, n, std::move(y), {a.node()}, [n, start](Node& self) {
    if (double* g = sink(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[start * n + i] += self.grad[i];
  });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(a, [slope](double x) { return x > 0.0 ? x : slope * x; },
               [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  require_same("minimum", a, b);
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::min(a.values()[i], b.values()[i]);
  return make_result(a.rows(), a.cols(), std::move(y), {a.node(), b.node()}, [](Node& self) {
    const auto& x0 = self.parents[0]->value;
    const auto& x1 = self.parents[1]->value;
    double* g0 = sink(self, 0);
    double* g1 = sink(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (x0[i] <= x1[i]) {
        if (g0) g0[i] += self.grad[i];
      } else if (g1) {
        g1[i] += self.grad[i];
      }
    }
  });
}

Tensor softmax_rows(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> y(m * n);
  const auto x = a.values();
  for (std::size_t i = 0; i < m; ++i) {
    const double mx = *std::max_element(x.begin() + static_cast<std::ptrdiff_t>(i * n),
                                        x.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += (y[i * n + j] = std::exp(x[i * n + j] - mx));
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] /= s;
  }
  return make_result(m, n, std::move(y), {a.node()}, [m, n](Node& self) {
    double* g = sink(self, 0);
    if (!g) return;
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += self.grad[i * n + j] * self.value[i * n + j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.value[i * n + j] * (self.grad[i * n + j] - dot);
    }
  });
}

Tensor log_softmax_rows(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> y(m * n);
  const auto x = a.values();
  for (std::size_t i = 0; i < m; ++i) {
    const double mx = *std::max_element(x.begin() + static_cast<std::ptrdiff_t>(i * n),
                                        x.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(x[i * n + j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] = x[i * n + j] - lse;
  }
  return make_result(m, n, std::move(y), {a.node()}, [m, n](Node& self) {
    double* g = sink(self, 0);
    if (!g) return;
    for (std::size_t i = 0; i < m; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < n; ++j) gs += self.grad[i * n + j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j] - std::exp(self.value[i * n + j]) * gs;
    }
  });
}

Tensor sum(const Tensor& a, int axis) {
  const std::size_t m = a.rows(), n = a.cols();
  const auto x = a.values();
  if (axis == 0) {
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) y[j] += x[i * n + j];
    return make_result(1, n, std::move(y), {a.node()}, [m, n](Node& self) {
      if (double* g = sink(self, 0))
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j];
    });
  }
  if (axis != 1) throw Error(Errc::InvalidArgument, "sum axis must be 0 or 1");
  std::vector<double> y(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i] += x[i * n + j];
  return make_result(m, 1, std::move(y), {a.node()}, [m, n](Node& self) {
    if (double* g = sink(self, 0))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i];
  });
}

Tensor mean(const Tensor& a, int axis) {
  const std::size_t len = axis == 0 ? a.rows() : a.cols();
  return scale(sum(a, axis), 1.0 / static_cast<double>(len));
}

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_result(1, 1, {s}, {a.node()}, [](Node& self) {
    if (double* g = sink(self, 0))
      for (std::size_t i = 0; i < self.parents[0]->value.size(); ++i) g[i] += self.grad[0];
  });
}

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.size())); }

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t m = x.rows(), n = x.cols();
  if (gain.rows() != 1 || gain.cols() != n) mismatch("layer_norm gain", x, gain);
  if (bias.rows() != 1 || bias.cols() != n) mismatch("layer_norm bias", x, bias);
  std::vector<double> y(m * n), xhat(m * n), inv(m);
  const auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xv[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xv[i * n + j] - mu) * (xv[i * n + j] - mu);
    var /= static_cast<double>(n);
    inv[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (xv[i * n + j] - mu) * inv[i];
      y[i * n + j] = xhat[i * n + j] * gain.values()[j] + bias.values()[j];
    }
  }
  return make_result(m, n, std::move(y), {x.node(), gain.node(), bias.node()},
                     [m, n, xhat = std::move(xhat), inv = std::move(inv)](Node& self) {
                       const auto& gv = self.parents[1]->value;
                       double* gx = sink(self, 0);
                       double* gg = sink(self, 1);
                       double* gb = sink(self, 2);
                       const double nn = static_cast<double>(n);
                       for (std::size_t i = 0; i < m; ++i) {
                         double s1 = 0.0, s2 = 0.0;
                         for (std::size_t j = 0; j < n; ++j) {
                           const double dy = self.grad[i * n + j];
                           const double dxh = dy * gv[j];
                           s1 += dxh;
                           s2 += dxh * xhat[i * n + j];
                           if (gg) gg[j] += dy * xhat[i * n + j];
                           if (gb) gb[j] += dy;
                         }
                         if (gx)
                           for (std::size_t j = 0; j < n; ++j) {
                             const double dxh = self.grad[i * n + j] * gv[j];
                             gx[i * n + j] += inv[i] / nn * (nn * dxh - s1 - xhat[i * n + j] * s2);
                           }
                       }
                     });
}

Tensor masked_fill(const Tensor& a, const std::vector<std::uint8_t>& mask, double fill) {
  if (mask.size() != a.size())
    throw Error(Errc::ShapeMismatch, "masked_fill mask of " + std::to_string(mask.size()) + " for " + shape_of(a));
  std::vector<double> y(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < y.size(); ++i)
    if (mask[i]) y[i] = fill;
  return make_result(a.rows(), a.cols(), std::move(y), {a.node()}, [mask](Node& self) {
    if (double* g = sink(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        if (!mask[i]) g[i] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& idx) {
  const std::size_t n = a.cols();
  std::vector<double> y(idx.size() * n);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= a.rows())
      throw Error(Errc::ShapeMismatch, "gather_rows index " + std::to_string(idx[k]) + " into " + shape_of(a));
    std::copy_n(a.values().data() + idx[k] * n, n, y.data() + k * n);
  }
  return make_result(idx.size(), n, std::move(y), {a.node()}, [idx, n](Node& self) {
    if (double* g = sink(self, 0))
      for (std::size_t k = 0; k < idx.size(); ++k)
        for (std::size_t j = 0; j < n; ++j) g[idx[k] * n + j] += self.grad[k * n + j];
  });
}

Tensor scatter_add_rows(const Tensor& a, const std::vector<std::size_t>& idx, std::size_t out_rows) {
  if (idx.size() != a.rows())
    throw Error(Errc::ShapeMismatch, "scatter_add_rows: " + std::to_string(idx.size()) + " indices for " + shape_of(a));
  const std::size_t n = a.cols();
  std::vector<double> y(out_rows * n, 0.0);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= out_rows) throw Error(Errc::ShapeMismatch, "scatter_add_rows index out of range");
    for (std::size_t j = 0; j < n; ++j) y[idx[k] * n + j] += a.values()[k * n + j];
  }
  return make_result(out_rows, n, std::move(y), {a.node()}, [idx, n](Node& self) {
    if (double* g = sink(self, 0))
      for (std::size_t k = 0; k < idx.size(); ++k)
        for (std::size_t j = 0; j < n; ++j) g[k * n + j] += self.grad[idx[k] * n + j];
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return add_row(matmul(x, w), b); }

}  // namespace vnfscale::diff

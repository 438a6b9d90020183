// SPDX-License-Identifier: Apache-2.0
//
// Dense 2-D tensors with tape-free reverse-mode differentiation: every op
// result keeps shared references to its inputs plus a backward closure, and
// backward() walks that DAG in reverse topological order.
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace vnfscale::diff {

struct Node {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient reaches this node
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;

  double* grad_buffer();  // allocates zeros on first use
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor constant(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor scalar(double v) { return constant(1, 1, {v}); }
  /// Trainable leaf.
  static Tensor parameter(std::size_t rows, std::size_t cols, std::vector<double> values);

  bool defined() const { return static_cast<bool>(node_); }
  std::size_t rows() const { return node_->rows; }
  std::size_t cols() const { return node_->cols; }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  double operator()(std::size_t i, std::size_t j) const { return node_->value[i * node_->cols + j]; }
  double item() const;
  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  /// Empty span when no gradient has been accumulated.
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad();

  /// Same values, cut from the graph.
  Tensor detach() const;
  /// Independent leaf with copied values and the same requires_grad flag.
  Tensor clone() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Whether new ops record backward closures on this thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Accumulates d(loss)/d(leaf) into every reachable trainable leaf.
/// Throws NonScalarLoss unless loss is 1x1.
void backward(const Tensor& loss);

namespace detail {
/// Builds an op result; parents/backward are dropped when no input needs a
/// gradient or recording is disabled.
Tensor make_result(std::size_t rows, std::size_t cols, std::vector<double> value,
                   std::vector<std::shared_ptr<Node>> parents, std::function<void(Node&)> backward_fn);
}  // namespace detail

}  // namespace vnfscale::diff

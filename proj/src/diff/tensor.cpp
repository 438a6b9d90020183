// SPDX-License-Identifier: Apache-2.0
#include "vnfscale/diff/tensor.hpp"

#include <algorithm>
#include <string>
#include <unordered_set>

#include "vnfscale/error.hpp"

namespace vnfscale::diff {

namespace {
thread_local bool g_grad_enabled = true;
}

double* Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad.data();
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) { return constant(rows, cols, std::vector<double>(rows * cols, 0.0)); }

Tensor Tensor::constant(std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (values.size() != rows * cols)
    throw Error(Errc::ShapeMismatch, "constant " + std::to_string(rows) + "x" + std::to_string(cols) + " given " +
                                         std::to_string(values.size()) + " values");
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->value = std::move(values);
  return Tensor(std::move(n));
}

Tensor Tensor::parameter(std::size_t rows, std::size_t cols, std::vector<double> values) {
  Tensor t = constant(rows, cols, std::move(values));
  t.node_->requires_grad = true;
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw Error(Errc::ShapeMismatch, "item() on " + std::to_string(rows()) + "x" + std::to_string(cols()));
  return node_->value[0];
}

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return constant(rows(), cols(), node_->value); }

Tensor Tensor::clone() const {
  Tensor t = constant(rows(), cols(), node_->value);
  t.node_->requires_grad = node_->requires_grad;
  return t;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

namespace detail {

Tensor make_result(std::size_t rows, std::size_t cols, std::vector<double> value,
                   std::vector<std::shared_ptr<Node>> parents, std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->value = std::move(value);
  if (g_grad_enabled && std::any_of(parents.begin(), parents.end(), [](const auto& p) { return p->requires_grad; })) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(n));
}

}  // namespace detail

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw Error(Errc::NonScalarLoss, "loss must be 1x1, got " + (loss.defined() ? std::to_string(loss.rows()) + "x" +
                                                                                       std::to_string(loss.cols())
                                                                                 : std::string("undefined")));
  Node* root = loss.node().get();
  if (!root->requires_grad) return;

  // Iterative post-order DFS.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) {
      n->backward_fn(*n);
      // Interior gradients are consumed; only leaves keep theirs.
      n->grad.clear();
    }
  }
}

}  // namespace vnfscale::diff

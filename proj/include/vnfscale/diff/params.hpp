// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "vnfscale/diff/tensor.hpp"
#include "vnfscale/io.hpp"
#include "vnfscale/rng.hpp"

namespace vnfscale::diff {

/// Named trainable tensors plus adaptive-moment state. Copies are deep: a
/// copied store shares no tensors with its source, so snapshots are immutable.
class ParamStore {
 public:
  struct Slot {
    Tensor value;
    std::vector<double> m;
    std::vector<double> v;
  };

  ParamStore() = default;
  ParamStore(const ParamStore& other);
  ParamStore& operator=(const ParamStore& other);
  ParamStore(ParamStore&&) noexcept = default;
  ParamStore& operator=(ParamStore&&) noexcept = default;

  /// Throws InvalidArgument on a duplicate name.
  const Tensor& add(const std::string& name, std::size_t rows, std::size_t cols, std::vector<double> values);
  /// Glorot-uniform initialisation.
  const Tensor& add_glorot(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng);
  const Tensor& add_uniform(const std::string& name, std::size_t rows, std::size_t cols, double limit, Rng& rng);
  const Tensor& add_zeros(const std::string& name, std::size_t rows, std::size_t cols);
  const Tensor& add_filled(const std::string& name, std::size_t rows, std::size_t cols, double v);

  bool contains(const std::string& name) const { return slots_.count(name) != 0; }
  /// Throws InvalidArgument when missing.
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  Slot& slot(const std::string& name);
  const std::map<std::string, Slot>& slots() const { return slots_; }

  std::vector<std::string> names() const;
  std::size_t parameter_count() const;
  void zero_grad();

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }

  /// Bitwise equality of values (moments excluded).
  bool same_values(const ParamStore& other) const;

 private:
  std::map<std::string, Slot> slots_;
  std::uint64_t step_ = 0;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

using GradMap = std::map<std::string, std::vector<double>>;

/// Gradients currently held by the store's tensors; names failing `keep` are
/// left out. Tensors without an accumulated gradient contribute zeros.
GradMap collect_grads(const ParamStore& store, const std::function<bool(const std::string&)>& keep = {});

/// Rescales so the global L2 norm is at most `max_norm`; returns the norm before.
double clip_grad_norm(GradMap& grads, double max_norm);

/// One bias-corrected adaptive-moment update of every parameter in `grads`;
/// parameters absent from `grads` are untouched. Increments the step counter.
/// Throws ShapeMismatch / InvalidArgument for unknown or mis-sized gradients.
void adam_step(ParamStore& store, const GradMap& grads, const AdamConfig& cfg);

io::Json to_json(const ParamStore& store);
/// Throws CorruptCheckpoint on malformed input.
ParamStore store_from_json(const io::Json& j);

}  // namespace vnfscale::diff

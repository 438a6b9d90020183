// SPDX-License-Identifier: Apache-2.0
#include "vnfscale/diff/params.hpp"

#include <cmath>
#include <cstring>

#include "vnfscale/error.hpp"

namespace vnfscale::diff {

ParamStore::ParamStore(const ParamStore& other) : step_(other.step_) {
  for (const auto& [name, s] : other.slots_) slots_.emplace(name, Slot{s.value.clone(), s.m, s.v});
}

ParamStore& ParamStore::operator=(const ParamStore& other) {
  if (this != &other) {
    ParamStore tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

const Tensor& ParamStore::add(const std::string& name, std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (slots_.count(name)) throw Error(Errc::InvalidArgument, "duplicate parameter '" + name + "'");
  Tensor t = Tensor::parameter(rows, cols, std::move(values));
  const std::size_t n = t.size();
  return slots_.emplace(name, Slot{std::move(t), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)})
      .first->second.value;
}

const Tensor& ParamStore::add_glorot(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return add_uniform(name, rows, cols, limit, rng);
}

const Tensor& ParamStore::add_uniform(const std::string& name, std::size_t rows, std::size_t cols, double limit,
                                      Rng& rng) {
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = rng.uniform(-limit, limit);
  return add(name, rows, cols, std::move(v));
}

const Tensor& ParamStore::add_zeros(const std::string& name, std::size_t rows, std::size_t cols) {
  return add(name, rows, cols, std::vector<double>(rows * cols, 0.0));
}

const Tensor& ParamStore::add_filled(const std::string& name, std::size_t rows, std::size_t cols, double v) {
  return add(name, rows, cols, std::vector<double>(rows * cols, v));
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw Error(Errc::InvalidArgument, "unknown parameter '" + name + "'");
  return it->second.value;
}

Tensor& ParamStore::get(const std::string& name) { return slot(name).value; }

ParamStore::Slot& ParamStore::slot(const std::string& name) {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw Error(Errc::InvalidArgument, "unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : slots_) out.push_back(name);
  return out;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, s] : slots_) n += s.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, s] : slots_) s.value.zero_grad();
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (slots_.size() != other.slots_.size()) return false;
  for (const auto& [name, s] : slots_) {
    auto it = other.slots_.find(name);
    if (it == other.slots_.end()) return false;
    const auto a = s.value.values();
    const auto b = it->second.value.values();
    if (a.size() != b.size() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

GradMap collect_grads(const ParamStore& store, const std::function<bool(const std::string&)>& keep) {
  GradMap out;
  for (const auto& [name, s] : store.slots()) {
    if (keep && !keep(name)) continue;
    const auto g = s.value.grad();
    out[name] = g.empty() ? std::vector<double>(s.value.size(), 0.0) : std::vector<double>(g.begin(), g.end());
  }
  return out;
}

double clip_grad_norm(GradMap& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [_, g] : grads)
    for (double x : g) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double k = max_norm / norm;
    for (auto& [_, g] : grads)
      for (double& x : g) x *= k;
  }
  return norm;
}

void adam_step(ParamStore& store, const GradMap& grads, const AdamConfig& cfg) {
  for (const auto& [name, g] : grads) {
    const auto& s = store.slot(name);
    if (g.size() != s.value.size())
      throw Error(Errc::ShapeMismatch, "gradient for '" + name + "' has " + std::to_string(g.size()) + " values, expected " +
                                           std::to_string(s.value.size()));
  }
  store.set_step(store.step() + 1);
  const double t = static_cast<double>(store.step());
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (const auto& [name, g] : grads) {
    auto& s = store.slot(name);
    auto w = s.value.mutable_values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      s.m[i] = cfg.beta1 * s.m[i] + (1.0 - cfg.beta1) * g[i];
      s.v[i] = cfg.beta2 * s.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = s.m[i] / c1;
      const double vhat = s.v[i] / c2;
      w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

io::Json to_json(const ParamStore& store) {
  io::Json params = io::Json::object();
  for (const auto& [name, s] : store.slots()) {
    const auto v = s.value.values();
    params[name] = io::Json{{"shape", {s.value.rows(), s.value.cols()}},
                            {"values", std::vector<double>(v.begin(), v.end())},
                            {"m", s.m},
                            {"v", s.v}};
  }
  return io::Json{{"step", store.step()}, {"params", params}};
}

ParamStore store_from_json(const io::Json& j) {
  ParamStore store;
  try {
    io::expect_fields(j, {"step", "params"}, "param store");
    for (const auto& [name, p] : j.at("params").items()) {
      io::expect_fields(p, {"shape", "values", "m", "v"}, "parameter '" + name + "'");
      const auto shape = p.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2) throw Error(Errc::CorruptCheckpoint, "parameter '" + name + "' shape");
      auto values = p.at("values").get<std::vector<double>>();
      auto m = p.at("m").get<std::vector<double>>();
      auto v = p.at("v").get<std::vector<double>>();
      const std::size_t n = shape[0] * shape[1];
      if (values.size() != n || m.size() != n || v.size() != n)
        throw Error(Errc::CorruptCheckpoint, "parameter '" + name + "' size does not match its shape");
      store.add(name, shape[0], shape[1], std::move(values));
      store.slot(name).m = std::move(m);
      store.slot(name).v = std::move(v);
    }
    store.set_step(j.at("step").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptCheckpoint, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::CorruptCheckpoint) throw;
    throw Error(Errc::CorruptCheckpoint, e.what());
  }
  return store;
}

}  // namespace vnfscale::diff

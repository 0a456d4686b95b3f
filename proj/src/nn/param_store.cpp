#include "mctsnet/nn/param_store.hpp"

#include <cmath>

#include "mctsnet/errors.hpp"

namespace mctsnet::nn {

void ParamStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw UsageError("duplicate parameter name: " + name);
  Tensor grad(value.shape(), 0.0);
  entries_.emplace(name, Entry{std::move(value), std::move(grad), true});
}

void ParamStore::add_glorot(const std::string& name, Shape shape, std::size_t fan_in,
                            std::size_t fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = dist(rng);
  add(name, std::move(t));
}

void ParamStore::add_zeros(const std::string& name, Shape shape) { add(name, Tensor(std::move(shape), 0.0)); }

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw UsageError("unknown parameter: " + name);
  return it->second;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw UsageError("unknown parameter: " + name);
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_) n += e.value.size();
  return n;
}

void ParamStore::set_trainable(const std::string& prefix, bool trainable) {
  for (auto& [name, e] : entries_) {
    if (name.starts_with(prefix)) e.trainable = trainable;
  }
}

void ParamStore::zero_grad() {
  for (auto& [_, e] : entries_) e.grad.fill(0.0);
}

void ParamStore::accumulate(const Gradients& grads) {
  for (const auto& [name, g] : grads) {
    auto& target = entry(name).grad;
    if (target.shape() != g.shape()) {
      throw DimensionError("gradient for " + name + " has shape " + shape_string(g.shape()) +
                           ", expected " + shape_string(target.shape()));
    }
    for (std::size_t i = 0; i < g.size(); ++i) target[i] += g[i];
  }
}

double ParamStore::grad_norm(const std::string& prefix) const {
  double sq = 0.0;
  for (const auto& [name, e] : entries_) {
    if (!name.starts_with(prefix)) continue;
    for (double v : e.grad.values()) sq += v * v;
  }
  return std::sqrt(sq);
}

void sgd_step(ParamStore& store, double lr) {
  if (!(lr > 0.0)) throw UsageError("learning rate must be positive");
  for (const auto& [name, e] : store.entries()) {
    if (!e.grad.all_finite()) throw NumericError("non-finite gradient in parameter " + name);
  }
  for (const auto& name : store.names()) {
    auto& e = store.entry(name);
    if (e.trainable) {
      for (std::size_t i = 0; i < e.value.size(); ++i) e.value[i] -= lr * e.grad[i];
    }
    e.grad.fill(0.0);
  }
  store.bump_step();
}

}  // namespace mctsnet::nn

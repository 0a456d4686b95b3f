#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mctsnet/nn/tensor.hpp"

namespace mctsnet::nn {

// Gradient contributions keyed by parameter name. Used by workers that
// accumulate privately before merging into a shared store.
using Gradients = std::map<std::string, Tensor>;

// Named parameter tensors, each paired with a gradient accumulator of the
// same shape. Iteration order is lexicographic by name.
class ParamStore {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
    bool trainable = true;
  };

  // Adds a parameter with the given initial value; the gradient starts at 0.
  // Throws UsageError if the name already exists.
  void add(const std::string& name, Tensor value);

  // Glorot-uniform weight, a = sqrt(6 / (fan_in + fan_out)).
  void add_glorot(const std::string& name, Shape shape, std::size_t fan_in, std::size_t fan_out,
                  std::mt19937_64& rng);
  void add_zeros(const std::string& name, Shape shape);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Entry& entry(const std::string& name) const;
  Entry& entry(const std::string& name);
  const Tensor& value(const std::string& name) const { return entry(name).value; }
  Tensor& value(const std::string& name) { return entry(name).value; }
  const Tensor& grad(const std::string& name) const { return entry(name).grad; }
  Tensor& grad(const std::string& name) { return entry(name).grad; }

  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::vector<std::string> names() const;
  std::size_t parameter_count() const;

  // Marks every parameter whose name starts with `prefix`.
  void set_trainable(const std::string& prefix, bool trainable);

  void zero_grad();
  void accumulate(const Gradients& grads);
  // L2 norm of the gradients of parameters starting with `prefix`.
  double grad_norm(const std::string& prefix = "") const;

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t step) { step_ = step; }
  void bump_step() { ++step_; }

 private:
  std::map<std::string, Entry> entries_;
  std::uint64_t step_ = 0;
};

// value <- value - lr * grad for every trainable entry, then zero all
// gradients and bump the step counter. A NaN/Inf gradient aborts with a
// NumericError naming the parameter, leaving values untouched.
void sgd_step(ParamStore& store, double lr);

}  // namespace mctsnet::nn

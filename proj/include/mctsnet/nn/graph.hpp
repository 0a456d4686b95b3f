#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mctsnet/nn/param_store.hpp"
#include "mctsnet/nn/tensor.hpp"

namespace mctsnet::nn {

// Handle to a record on a Graph tape.
struct Var {
  std::size_t id = 0;
  bool operator==(const Var&) const = default;
};

enum class OpTag {
  constant,
  param,
  linear,
  conv2d,
  relu,
  sigmoid,
  tanh,
  add,
  mul,
  scale,
  scale_by,
  concat,
  stack,
  reshape,
  log_softmax,
  softmax,
  pick,
  sum,
  custom,
};

// Append-only tape of computation records. Inputs always precede their
// consumer, so reverse append order is a valid reverse topological order.
//
// A graph reads parameter values from a ParamStore and, on backward, adds
// d(loss)/d(param) either into the store's own accumulators or into a
// caller-owned Gradients map (for workers sharing a read-only snapshot).
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

  explicit Graph(ParamStore& store);
  Graph(const ParamStore& store, Gradients& sink);

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Leaf bound to a named parameter; one record per name per graph.
  Var param(const std::string& name);
  // Appends an operation record. `backward` receives d(loss)/d(output) and
  // must add the input contributions through grad_buffer().
  Var record(OpTag op, std::vector<Var> inputs, Tensor value, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  OpTag op(Var v) const { return nodes_.at(v.id).op; }
  const std::vector<Var>& inputs(Var v) const { return nodes_.at(v.id).inputs; }
  std::size_t size() const { return nodes_.size(); }

  // d(loss)/d(v) after backward; zeros if v was not reached.
  Tensor grad(Var v) const;
  // Mutable gradient slot for v, allocated as zeros on first use.
  Tensor& grad_buffer(Var v);

  // Reverse sweep from a scalar loss. Allowed once per graph.
  void backward(Var loss);
  bool backward_done() const { return backward_done_; }

  const ParamStore& store() const { return *store_; }

 private:
  struct Node {
    OpTag op;
    std::vector<Var> inputs;
    Tensor value;
    std::optional<Tensor> grad;
    BackwardFn backward;
    std::string param_name;
  };

  const ParamStore* store_;
  ParamStore* mutable_store_ = nullptr;
  Gradients* sink_ = nullptr;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> param_ids_;
  bool backward_done_ = false;
};

}  // namespace mctsnet::nn

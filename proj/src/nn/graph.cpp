#include "mctsnet/nn/graph.hpp"

#include "mctsnet/errors.hpp"

namespace mctsnet::nn {

Graph::Graph(ParamStore& store) : store_(&store), mutable_store_(&store) {}

Graph::Graph(const ParamStore& store, Gradients& sink) : store_(&store), sink_(&sink) {}

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{OpTag::constant, {}, std::move(value), std::nullopt, nullptr, {}});
  return Var{nodes_.size() - 1};
}

Var Graph::param(const std::string& name) {
  if (auto it = param_ids_.find(name); it != param_ids_.end()) return Var{it->second};
  nodes_.push_back(Node{OpTag::param, {}, store_->value(name), std::nullopt, nullptr, name});
  param_ids_.emplace(name, nodes_.size() - 1);
  return Var{nodes_.size() - 1};
}

Var Graph::record(OpTag op, std::vector<Var> inputs, Tensor value, BackwardFn backward) {
  if (backward_done_) throw UsageError("cannot extend a graph after backward");
  for (auto in : inputs) {
    if (in.id >= nodes_.size()) throw UsageError("record input refers to a future node");
  }
  nodes_.push_back(Node{op, std::move(inputs), std::move(value), std::nullopt, std::move(backward), {}});
  return Var{nodes_.size() - 1};
}

Tensor Graph::grad(Var v) const {
  const auto& node = nodes_.at(v.id);
  if (node.grad) return *node.grad;
  return Tensor(node.value.shape(), 0.0);
}

Tensor& Graph::grad_buffer(Var v) {
  auto& node = nodes_.at(v.id);
  if (!node.grad) node.grad.emplace(node.value.shape(), 0.0);
  return *node.grad;
}

void Graph::backward(Var loss) {
  if (backward_done_) throw UsageError("backward called twice on the same graph");
  if (value(loss).size() != 1) {
    throw UsageError("backward requires a scalar loss, got shape " + shape_string(value(loss).shape()));
  }
  backward_done_ = true;
  grad_buffer(loss).fill(1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.grad) continue;
    if (node.op == OpTag::param) {
      const Tensor& g = *node.grad;
      if (sink_ != nullptr) {
        auto [it, inserted] = sink_->try_emplace(node.param_name, g);
        if (!inserted) {
          for (std::size_t k = 0; k < g.size(); ++k) it->second[k] += g[k];
        }
      } else {
        auto& target = mutable_store_->grad(node.param_name);
        for (std::size_t k = 0; k < g.size(); ++k) target[k] += g[k];
      }
    } else if (node.backward) {
      node.backward(*this, *node.grad);
    }
  }
}

}  // namespace mctsnet::nn

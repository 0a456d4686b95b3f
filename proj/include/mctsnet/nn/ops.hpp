#pragma once

#include <span>
#include <string>
#include <string_view>

#include "mctsnet/nn/graph.hpp"

namespace mctsnet::nn {

enum class Pointwise { relu, sigmoid, tanh };

// Parses "relu" | "sigmoid" | "tanh"; anything else is a UsageError.
Pointwise parse_pointwise(std::string_view kind);

// x·W + b with parameters `name.W` [I×O] and `name.b` [O].
// x is [I] (returns [O]) or [B×I] (returns [B×O]).
Var linear(Graph& g, Var x, const std::string& name);

// Stride-1 cross-correlation with zero padding k/2 using `name.W`
// [C_out×C_in×k×k] and `name.b` [C_out]. x is [C×H×W] or [B×C×H×W].
Var conv2d(Graph& g, Var x, const std::string& name);
// conv2d restricted to 3×3 kernels.
Var conv3x3(Graph& g, Var x, const std::string& name);

Var pointwise(Graph& g, Var x, Pointwise kind);
inline Var relu(Graph& g, Var x) { return pointwise(g, x, Pointwise::relu); }
inline Var sigmoid(Graph& g, Var x) { return pointwise(g, x, Pointwise::sigmoid); }
inline Var tanh(Graph& g, Var x) { return pointwise(g, x, Pointwise::tanh); }

Var add(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);
Var scale(Graph& g, Var x, double factor);
// Multiplies every entry of x by the single-element tensor s.
Var scale_by(Graph& g, Var x, Var s);
// Concatenates flattened inputs into one vector.
Var concat(Graph& g, std::span<const Var> parts);
// Stacks equally sized vectors into rows of a [k×d] matrix.
Var stack(Graph& g, std::span<const Var> rows);
Var reshape(Graph& g, Var x, Shape shape);
// Row-wise over the last axis; x is [K] or [B×K].
Var log_softmax(Graph& g, Var x);
Var softmax(Graph& g, Var x);
// Single element of a flattened tensor, as a [1] tensor.
Var pick(Graph& g, Var x, std::size_t index);
Var sum(Graph& g, Var x);
// -sum(p * log p) over a [K] logit vector, as a [1] tensor.
Var entropy(Graph& g, Var logits);

struct SoftmaxXent {
  Tensor probs;
  Var loss;  // [1], sum over rows of -log probs[row][label]
};

// Softmax cross-entropy with a single label shared by every row. Uses
// max-subtraction for the log-sum-exp. Label out of range is a UsageError.
SoftmaxXent softmax_xent(Graph& g, Var logits, std::size_t label);

// Plain softmax of a [K] value vector outside any graph.
Tensor softmax_values(std::span<const double> logits);

}  // namespace mctsnet::nn

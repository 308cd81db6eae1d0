// Copyright 2026 The Gradleak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Tape-based reverse-mode differentiation over rank-2 tensors.
//
// A Graph records every primitive op in creation order, which is a valid
// topological order because an op can only consume existing nodes. Backward()
// walks the tape once in reverse and accumulates gradients into every node
// that depends on a leaf.
//
//   Graph g;
//   Var w = g.Leaf(weights);
//   Var loss = Mean(Square(MatMul(x, w)));
//   g.Backward(loss);
//   Tensor dw = g.grad(w);

#ifndef GRADLEAK_NDCORE_GRAPH_H_
#define GRADLEAK_NDCORE_GRAPH_H_

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gradleak/ndcore/tensor.h"

namespace gradleak::ndcore {

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid as long as its Graph.
class Var {
 public:
  Var() = default;

  Graph* graph() const { return graph_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  // Accumulates the node's output gradient into its inputs' gradients.
  using BackwardFn = std::function<void(Graph& graph, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // A differentiable input.
  Var Leaf(Tensor value);
  // A non-differentiable input.
  Var Constant(Tensor value);

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }

  // Gradient with respect to `v` from the most recent Backward(). Zero when
  // `v` does not influence the output.
  Tensor grad(Var v) const;

  // Differentiates a single-element output. Throws ContractError otherwise.
  void Backward(Var output);

  std::size_t node_count() const { return nodes_.size(); }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  // Op plumbing. Records a node; throws NumericError if `value` is not finite.
  Var Record(const char* op, Tensor value, std::vector<std::size_t> inputs,
             BackwardFn backward);
  const Tensor& node_value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& node_grad(std::size_t id) const { return nodes_[id].grad; }
  bool node_requires_grad(std::size_t id) const {
    return nodes_[id].requires_grad;
  }
  const std::vector<std::size_t>& node_inputs(std::size_t id) const {
    return nodes_[id].inputs;
  }
  // Zero-initialized on first use after a Backward() reset.
  Tensor& grad_buffer(std::size_t id);

 private:
  struct Node {
    const char* op;
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
};

// Matrix product of {m, k} and {k, n}.
Var MatMul(Var a, Var b);
// Elementwise; `b` may also be a {1, n} row broadcast over the rows of `a`.
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
// Elementwise product of equal shapes.
Var Mul(Var a, Var b);
Var Scale(Var a, double factor);

Var Sigmoid(Var a);
Var Relu(Var a);
Var Tanh(Var a);
Var Exp(Var a);
Var Log(Var a);
Var Square(Var a);
// log(1 + exp(a)), computed without overflow.
Var Softplus(Var a);
// 1 where a > 0, else 0. Not differentiable: the result is a constant.
Var Step(Var a);

Var Sum(Var a);
Var Mean(Var a);
// {m, n} -> {1, n}.
Var ColSum(Var a);
// {m, n} -> {m, 1}.
Var RowSum(Var a);
Var Transpose(Var a);
Var Reshape(Var a, Shape shape);
// Each row of `a` repeated `times` times consecutively: {m, n} -> {m*times, n}.
Var RepeatRows(Var a, std::size_t times);
Var ConcatCols(std::span<const Var> parts);
Var ConcatRows(std::span<const Var> parts);
// Rows [begin, begin + count) of `a`.
Var SliceRows(Var a, std::size_t begin, std::size_t count);
Var SoftmaxRows(Var a);
// log(mean(exp(a))) over all entries, stabilized by subtracting the maximum.
Var LogMeanExp(Var a);

}  // namespace gradleak::ndcore

#endif  // GRADLEAK_NDCORE_GRAPH_H_

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

#include "gradleak/ndcore/mlp.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "gradleak/errors.h"

namespace gradleak::ndcore {

std::string_view ActivationName(Activation activation) {
  switch (activation) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kRelu:
      return "relu";
    case Activation::kSigmoid:
      return "sigmoid";
    case Activation::kTanh:
      return "tanh";
  }
  return "unknown";
}

Activation ParseActivation(std::string_view name) {
  for (Activation a : {Activation::kIdentity, Activation::kRelu,
                       Activation::kSigmoid, Activation::kTanh}) {
    if (ActivationName(a) == name) return a;
  }
  throw ContractError("unknown activation '" + std::string(name) + "'");
}

Var Apply(Activation activation, Var x) {
  switch (activation) {
    case Activation::kIdentity:
      return x;
    case Activation::kRelu:
      return Relu(x);
    case Activation::kSigmoid:
      return Sigmoid(x);
    case Activation::kTanh:
      return Tanh(x);
  }
  return x;
}

namespace {

void ValidateSpec(const MlpSpec& spec) {
  if (spec.layer_dims.size() < 2) {
    throw ContractError("an MLP needs at least input and output dims");
  }
  for (std::size_t d : spec.layer_dims) {
    if (d == 0) throw ContractError("MLP layer widths must be positive");
  }
}

}  // namespace

Mlp Mlp::Initialized(MlpSpec spec, Rng& rng) {
  ValidateSpec(spec);
  std::vector<Tensor> params;
  for (std::size_t l = 0; l + 1 < spec.layer_dims.size(); ++l) {
    const std::size_t fan_in = spec.layer_dims[l];
    const std::size_t fan_out = spec.layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w({fan_in, fan_out});
    for (double& v : w.values()) v = rng.Uniform(-limit, limit);
    params.push_back(std::move(w));
    params.emplace_back(Shape{1, fan_out}, 0.0);
  }
  return Mlp(std::move(spec), std::move(params));
}

Mlp Mlp::Zeros(MlpSpec spec) {
  ValidateSpec(spec);
  std::vector<Tensor> params;
  for (std::size_t l = 0; l + 1 < spec.layer_dims.size(); ++l) {
    params.emplace_back(Shape{spec.layer_dims[l], spec.layer_dims[l + 1]});
    params.emplace_back(Shape{1, spec.layer_dims[l + 1]});
  }
  return Mlp(std::move(spec), std::move(params));
}

Mlp::Mlp(MlpSpec spec, std::vector<Tensor> parameters)
    : spec_(std::move(spec)), parameters_(std::move(parameters)) {
  ValidateSpec(spec_);
  if (parameters_.size() != 2 * num_layers()) {
    throw DimensionError("MLP with " + std::to_string(num_layers()) +
                         " layers needs " + std::to_string(2 * num_layers()) +
                         " parameter tensors, got " +
                         std::to_string(parameters_.size()));
  }
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const Shape w{spec_.layer_dims[l], spec_.layer_dims[l + 1]};
    const Shape b{1, spec_.layer_dims[l + 1]};
    if (weight(l).shape() != w || bias(l).shape() != b) {
      throw DimensionError("layer " + std::to_string(l) +
                           " parameters have shapes " +
                           ShapeToString(weight(l).shape()) + "/" +
                           ShapeToString(bias(l).shape()) + ", expected " +
                           ShapeToString(w) + "/" + ShapeToString(b));
    }
  }
}

std::size_t Mlp::ParameterCount(std::span<const std::size_t> layer_dims) {
  std::size_t count = 0;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    count += (layer_dims[l] + 1) * layer_dims[l + 1];
  }
  return count;
}

std::size_t Mlp::ParameterCount() const {
  return ParameterCount(spec_.layer_dims);
}

std::vector<double> Mlp::Flatten() const {
  std::vector<double> flat;
  flat.reserve(ParameterCount());
  for (const Tensor& p : parameters_) {
    flat.insert(flat.end(), p.values().begin(), p.values().end());
  }
  return flat;
}

void Mlp::Unflatten(std::span<const double> flat) {
  if (flat.size() != ParameterCount()) {
    throw DimensionError("flat parameter vector has " +
                         std::to_string(flat.size()) + " entries, MLP has " +
                         std::to_string(ParameterCount()));
  }
  std::size_t offset = 0;
  for (Tensor& p : parameters_) {
    std::copy_n(flat.begin() + offset, p.size(), p.values().begin());
    offset += p.size();
  }
}

Tensor Mlp::Forward(const Tensor& input) const {
  Graph graph;
  std::vector<Var> bound;
  bound.reserve(parameters_.size());
  for (const Tensor& p : parameters_) bound.push_back(graph.Constant(p));
  return Forward(graph.Constant(input), bound).value();
}

std::vector<Var> Mlp::Bind(Graph& graph) const {
  std::vector<Var> bound;
  bound.reserve(parameters_.size());
  for (const Tensor& p : parameters_) bound.push_back(graph.Leaf(p));
  return bound;
}

Var Mlp::Forward(Var input, std::span<const Var> bound) const {
  if (bound.size() != parameters_.size()) {
    throw ContractError("MLP forward got " + std::to_string(bound.size()) +
                        " bound parameters, expected " +
                        std::to_string(parameters_.size()));
  }
  Var h = input;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const Tensor& x = h.value();
    if (x.rank() != 2 || x.cols() != spec_.layer_dims[l]) {
      throw DimensionError("layer " + std::to_string(l) +
                           " expects input width " +
                           std::to_string(spec_.layer_dims[l]) + ", got " +
                           ShapeToString(x.shape()));
    }
    h = Add(MatMul(h, bound[2 * l]), bound[2 * l + 1]);
    h = Apply(l + 1 == num_layers() ? spec_.output : spec_.hidden, h);
  }
  return h;
}

}  // namespace gradleak::ndcore

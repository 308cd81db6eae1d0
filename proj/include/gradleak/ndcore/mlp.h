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

#ifndef GRADLEAK_NDCORE_MLP_H_
#define GRADLEAK_NDCORE_MLP_H_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gradleak/ndcore/graph.h"
#include "gradleak/ndcore/rng.h"
#include "gradleak/ndcore/tensor.h"

namespace gradleak::ndcore {

enum class Activation { kIdentity, kRelu, kSigmoid, kTanh };

std::string_view ActivationName(Activation activation);
// Throws ContractError on an unknown name.
Activation ParseActivation(std::string_view name);
Var Apply(Activation activation, Var x);

struct MlpSpec {
  // {input, hidden..., output}; at least two entries.
  std::vector<std::size_t> layer_dims;
  Activation hidden = Activation::kRelu;
  Activation output = Activation::kIdentity;
};

// Fully connected network. Layer l maps rows of width layer_dims[l] to
// layer_dims[l+1] through weight {layer_dims[l], layer_dims[l+1]} and bias
// {1, layer_dims[l+1]}.
class Mlp {
 public:
  // Weights uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static Mlp Initialized(MlpSpec spec, Rng& rng);
  static Mlp Zeros(MlpSpec spec);

  // `parameters` is {W0, b0, W1, b1, ...}; shapes are validated.
  Mlp(MlpSpec spec, std::vector<Tensor> parameters);

  const MlpSpec& spec() const { return spec_; }
  std::size_t num_layers() const { return spec_.layer_dims.size() - 1; }
  std::size_t input_dim() const { return spec_.layer_dims.front(); }
  std::size_t output_dim() const { return spec_.layer_dims.back(); }

  Tensor& weight(std::size_t layer) { return parameters_[2 * layer]; }
  const Tensor& weight(std::size_t layer) const {
    return parameters_[2 * layer];
  }
  Tensor& bias(std::size_t layer) { return parameters_[2 * layer + 1]; }
  const Tensor& bias(std::size_t layer) const {
    return parameters_[2 * layer + 1];
  }
  std::vector<Tensor>& parameters() { return parameters_; }
  const std::vector<Tensor>& parameters() const { return parameters_; }

  std::size_t ParameterCount() const;
  // Sum over layers of (dims[l] + 1) * dims[l+1].
  static std::size_t ParameterCount(std::span<const std::size_t> layer_dims);

  // Concatenation of parameters() in order, each row-major.
  std::vector<double> Flatten() const;
  // Inverse of Flatten(). Throws DimensionError on a length mismatch.
  void Unflatten(std::span<const double> flat);

  // Evaluates on rows of `input` ({n, input_dim}) without recording
  // gradients.
  Tensor Forward(const Tensor& input) const;

  // Registers every parameter as a leaf of `graph`, in parameters() order.
  std::vector<Var> Bind(Graph& graph) const;
  // Differentiable forward pass using leaves returned by Bind().
  Var Forward(Var input, std::span<const Var> bound) const;

 private:
  MlpSpec spec_;
  std::vector<Tensor> parameters_;
};

}  // namespace gradleak::ndcore

#endif  // GRADLEAK_NDCORE_MLP_H_

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

#ifndef GRADLEAK_MIEST_STATNET_H_
#define GRADLEAK_MIEST_STATNET_H_

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "gradleak/ndcore/graph.h"
#include "gradleak/ndcore/mlp.h"
#include "gradleak/ndcore/rng.h"
#include "gradleak/ndcore/tensor.h"

namespace gradleak::miest {

enum class StatNetKind {
  kFlat,          // one MLP over concat(x_1, ..., x_B, G)
  kHierarchical,  // shared BlockModel per (x_j, G), MixModel over embeddings
};

std::string_view StatNetKindName(StatNetKind kind);
StatNetKind ParseStatNetKind(std::string_view name);

struct StatNetSpec {
  StatNetKind kind = StatNetKind::kHierarchical;
  std::size_t batch_size = 1;  // B
  std::size_t x_dim = 0;       // width of one x_j
  std::size_t g_dim = 0;       // width of G
  std::vector<std::size_t> block_widths = {200, 200, 5};
  std::vector<std::size_t> mix_widths = {500, 1};
  std::vector<std::size_t> flat_widths = {200, 200, 1};
  // MixModel sees G next to the embeddings. Off gives embeddings only.
  bool mix_uses_gradient = true;
  ndcore::Activation activation = ndcore::Activation::kRelu;
};

// Statistic network T(X_B, G). Scores are evaluated for n (X_B, G) pairs at
// once: `x` holds n * B rows of width x_dim, pair-major, and `g` holds n rows
// of width g_dim.
class StatNet {
 public:
  // Glorot-initialized from `rng`. Throws ContractError on an invalid spec.
  static StatNet Create(const StatNetSpec& spec, ndcore::Rng& rng);

  const StatNetSpec& spec() const { return spec_; }
  std::size_t embedding_dim() const;

  // kHierarchical only.
  const ndcore::Mlp& block_model() const { return nets_[0]; }
  ndcore::Mlp& block_model() { return nets_[0]; }
  const ndcore::Mlp& mix_model() const { return nets_[1]; }
  ndcore::Mlp& mix_model() { return nets_[1]; }
  // kFlat only.
  const ndcore::Mlp& flat_model() const { return nets_[0]; }

  std::size_t ParameterCount() const;
  // Parameters of the first fully connected layer that sees x.
  std::size_t InputLayerParameterCount() const;

  // All parameters, block then mix for kHierarchical.
  std::vector<ndcore::Tensor*> MutableParameters();
  std::vector<ndcore::Tensor> Parameters() const;

  // h_j = BlockModel(x_j, G) for each row of `x` ({m, x_dim}) against one
  // gradient `g` ({1, g_dim}); returns {m, embedding_dim}. Throws
  // ContractError on a width mismatch.
  ndcore::Tensor BlockEmbed(const ndcore::Tensor& x,
                            const ndcore::Tensor& g) const;
  // MixModel(h_1..h_B, G). Throws ContractError unless `h` has B rows.
  double MixScore(const ndcore::Tensor& h, const ndcore::Tensor& g) const;

  // Non-differentiable scores, {n, 1}.
  ndcore::Tensor Scores(const ndcore::Tensor& x,
                        const ndcore::Tensor& g) const;

  // Leaves for every parameter, in MutableParameters() order.
  std::vector<ndcore::Var> Bind(ndcore::Graph& graph) const;
  // Differentiable scores, {n, 1}.
  ndcore::Var Scores(ndcore::Graph& graph, std::span<const ndcore::Var> bound,
                     const ndcore::Tensor& x, const ndcore::Tensor& g) const;

 private:
  StatNet(StatNetSpec spec, std::vector<ndcore::Mlp> nets);

  void CheckInputs(const ndcore::Tensor& x, const ndcore::Tensor& g) const;

  StatNetSpec spec_;
  std::vector<ndcore::Mlp> nets_;
};

}  // namespace gradleak::miest

#endif  // GRADLEAK_MIEST_STATNET_H_

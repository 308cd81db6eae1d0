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

#include "gradleak/miest/statnet.h"

#include <algorithm>
#include <string>

#include "gradleak/errors.h"

namespace gradleak::miest {

using ndcore::Graph;
using ndcore::Mlp;
using ndcore::Tensor;
using ndcore::Var;

std::string_view StatNetKindName(StatNetKind kind) {
  return kind == StatNetKind::kFlat ? "flat" : "hierarchical";
}

StatNetKind ParseStatNetKind(std::string_view name) {
  if (name == "flat") return StatNetKind::kFlat;
  if (name == "hierarchical") return StatNetKind::kHierarchical;
  throw ContractError("unknown statistic network '" + std::string(name) + "'");
}

namespace {

std::vector<std::size_t> Dims(std::size_t input,
                              const std::vector<std::size_t>& widths) {
  std::vector<std::size_t> dims = {input};
  dims.insert(dims.end(), widths.begin(), widths.end());
  return dims;
}

}  // namespace

StatNet::StatNet(StatNetSpec spec, std::vector<Mlp> nets)
    : spec_(std::move(spec)), nets_(std::move(nets)) {}

StatNet StatNet::Create(const StatNetSpec& spec, ndcore::Rng& rng) {
  if (spec.batch_size < 1 || spec.x_dim < 1 || spec.g_dim < 1) {
    throw ContractError("statistic network needs B, dim(x), dim(G) >= 1");
  }
  const ndcore::Activation act = spec.activation;
  std::vector<Mlp> nets;
  if (spec.kind == StatNetKind::kFlat) {
    if (spec.flat_widths.empty() || spec.flat_widths.back() != 1) {
      throw ContractError("flat statistic network must end in one unit");
    }
    nets.push_back(Mlp::Initialized(
        {Dims(spec.batch_size * spec.x_dim + spec.g_dim, spec.flat_widths),
         act, ndcore::Activation::kIdentity},
        rng));
  } else {
    if (spec.block_widths.empty() || spec.mix_widths.empty() ||
        spec.mix_widths.back() != 1) {
      throw ContractError("MixModel must end in one unit");
    }
    // The embedding is linear so that h_j can take any sign.
    nets.push_back(Mlp::Initialized(
        {Dims(spec.x_dim + spec.g_dim, spec.block_widths), act,
         ndcore::Activation::kIdentity},
        rng));
    const std::size_t mix_input =
        spec.batch_size * spec.block_widths.back() +
        (spec.mix_uses_gradient ? spec.g_dim : 0);
    nets.push_back(Mlp::Initialized(
        {Dims(mix_input, spec.mix_widths), act, ndcore::Activation::kIdentity},
        rng));
  }
  return StatNet(spec, std::move(nets));
}

std::size_t StatNet::embedding_dim() const {
  return spec_.kind == StatNetKind::kHierarchical ? spec_.block_widths.back()
                                                  : 0;
}

std::size_t StatNet::ParameterCount() const {
  std::size_t total = 0;
  for (const Mlp& net : nets_) total += net.ParameterCount();
  return total;
}

std::size_t StatNet::InputLayerParameterCount() const {
  return nets_[0].weight(0).size();
}

std::vector<Tensor*> StatNet::MutableParameters() {
  std::vector<Tensor*> out;
  for (Mlp& net : nets_) {
    for (Tensor& p : net.parameters()) out.push_back(&p);
  }
  return out;
}

std::vector<Tensor> StatNet::Parameters() const {
  std::vector<Tensor> out;
  for (const Mlp& net : nets_) {
    out.insert(out.end(), net.parameters().begin(), net.parameters().end());
  }
  return out;
}

void StatNet::CheckInputs(const Tensor& x, const Tensor& g) const {
  if (x.rank() != 2 || x.cols() != spec_.x_dim) {
    throw ContractError("statistic network expects x rows of width " +
                        std::to_string(spec_.x_dim) + ", got " +
                        ndcore::ShapeToString(x.shape()));
  }
  if (g.rank() != 2 || g.cols() != spec_.g_dim) {
    throw ContractError("statistic network expects G rows of width " +
                        std::to_string(spec_.g_dim) + ", got " +
                        ndcore::ShapeToString(g.shape()));
  }
  if (x.rows() != g.rows() * spec_.batch_size) {
    throw ContractError(std::to_string(g.rows()) + " gradients need " +
                        std::to_string(g.rows() * spec_.batch_size) +
                        " x rows, got " + std::to_string(x.rows()));
  }
}

namespace {

// Rows [x_j, G_k] for x row j belonging to pair k = j / per.
Tensor PairRows(const Tensor& x, const Tensor& g, std::size_t per) {
  const std::size_t xd = x.cols(), gd = g.cols();
  Tensor out({x.rows(), xd + gd});
  double* dst = out.values().data();
  for (std::size_t j = 0; j < x.rows(); ++j) {
    const double* xs = x.values().data() + j * xd;
    const double* gs = g.values().data() + (j / per) * gd;
    dst = std::copy_n(xs, xd, dst);
    dst = std::copy_n(gs, gd, dst);
  }
  return out;
}

}  // namespace

Tensor StatNet::BlockEmbed(const Tensor& x, const Tensor& g) const {
  if (spec_.kind != StatNetKind::kHierarchical) {
    throw ContractError("BlockEmbed needs a hierarchical statistic network");
  }
  if (x.rank() != 2 || x.cols() != spec_.x_dim || g.rank() != 2 ||
      g.rows() != 1 || g.cols() != spec_.g_dim) {
    throw ContractError("BlockModel input must be {m, " +
                        std::to_string(spec_.x_dim) + "} and {1, " +
                        std::to_string(spec_.g_dim) + "}");
  }
  return block_model().Forward(PairRows(x, g, x.rows()));
}

double StatNet::MixScore(const Tensor& h, const Tensor& g) const {
  if (spec_.kind != StatNetKind::kHierarchical) {
    throw ContractError("MixScore needs a hierarchical statistic network");
  }
  if (h.rank() != 2 || h.rows() != spec_.batch_size ||
      h.cols() != embedding_dim()) {
    throw ContractError("MixModel expects " +
                        std::to_string(spec_.batch_size) +
                        " embeddings, got " + ndcore::ShapeToString(h.shape()));
  }
  if (g.rank() != 2 || g.rows() != 1 || g.cols() != spec_.g_dim) {
    throw ContractError("MixModel expects G of width " +
                        std::to_string(spec_.g_dim));
  }
  std::vector<double> input = h.vector();
  if (spec_.mix_uses_gradient) {
    input.insert(input.end(), g.values().begin(), g.values().end());
  }
  const std::size_t width = input.size();
  return mix_model().Forward(Tensor({1, width}, std::move(input))).item();
}

std::vector<Var> StatNet::Bind(Graph& graph) const {
  std::vector<Var> bound;
  for (const Mlp& net : nets_) {
    const std::vector<Var> leaves = net.Bind(graph);
    bound.insert(bound.end(), leaves.begin(), leaves.end());
  }
  return bound;
}

Var StatNet::Scores(Graph& graph, std::span<const Var> bound, const Tensor& x,
                    const Tensor& g) const {
  CheckInputs(x, g);
  const std::size_t n = g.rows(), b = spec_.batch_size;
  if (spec_.kind == StatNetKind::kFlat) {
    Var parts[] = {graph.Constant(x.Reshaped({n, b * spec_.x_dim})),
                   graph.Constant(g)};
    return flat_model().Forward(ndcore::ConcatCols(parts), bound);
  }
  const std::size_t block_params = block_model().parameters().size();
  Var h = block_model().Forward(graph.Constant(PairRows(x, g, b)),
                                bound.first(block_params));
  Var embeddings = ndcore::Reshape(h, {n, b * embedding_dim()});
  Var mix_input = embeddings;
  if (spec_.mix_uses_gradient) {
    Var parts[] = {embeddings, graph.Constant(g)};
    mix_input = ndcore::ConcatCols(parts);
  }
  return mix_model().Forward(mix_input, bound.subspan(block_params));
}

Tensor StatNet::Scores(const Tensor& x, const Tensor& g) const {
  Graph graph;
  std::vector<Var> bound;
  for (const Mlp& net : nets_) {
    for (const Tensor& p : net.parameters()) bound.push_back(graph.Constant(p));
  }
  return Scores(graph, bound, x, g).value();
}

}  // namespace gradleak::miest

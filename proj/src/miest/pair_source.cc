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

#include "gradleak/miest/pair_source.h"

#include <algorithm>
#include <cmath>

#include "gradleak/dataio/sampling.h"
#include "gradleak/errors.h"

namespace gradleak::miest {

using ndcore::Rng;
using ndcore::Tensor;

GradientPairSource::GradientPairSource(const fedsim::TaskModel& model,
                                       const dataio::Dataset& dataset,
                                       GradientSourceOptions options)
    : model_(model), dataset_(dataset), options_(options) {
  if (options_.batch_size < 1) {
    throw ContractError("gradient source batch size must be >= 1");
  }
  if (!(options_.noise_sigma >= 0.0)) {
    throw ContractError("gradient source noise sigma must be >= 0");
  }
  if (dataset_.num_features() != model_.input_dim()) {
    throw DimensionError("dataset has " +
                         std::to_string(dataset_.num_features()) +
                         " features, task model expects " +
                         std::to_string(model_.input_dim()));
  }
}

std::size_t GradientPairSource::x_dim() const {
  return dataset_.num_features() + (options_.include_label ? 1 : 0);
}

std::size_t GradientPairSource::g_dim() const {
  return model_.parameter_count();
}

void GradientPairSource::DrawBatches(std::size_t n, Rng& rng, Tensor& x,
                                     Tensor& g) const {
  const std::size_t b = options_.batch_size, d = dataset_.num_features();
  const std::size_t xd = x_dim();
  Tensor features({n * b, d}), labels({n * b, 1});
  x = Tensor({n * b, xd});
  for (std::size_t k = 0; k < n; ++k) {
    const dataio::Batch batch = dataio::SampleBatch(dataset_, b, rng);
    for (std::size_t j = 0; j < b; ++j) {
      const std::size_t row = k * b + j;
      const dataio::Sample& s = batch.samples[j];
      std::copy(s.features.begin(), s.features.end(),
                features.values().begin() + row * d);
      std::copy(s.features.begin(), s.features.end(),
                x.values().begin() + row * xd);
      labels[row] = s.label;
      if (options_.include_label) x(row, d) = s.label;
    }
  }
  g = fedsim::BatchGradients(model_, features, labels, b);
  if (options_.noise_sigma > 0.0) {
    for (double& v : g.values()) v += options_.noise_sigma * rng.Normal();
  }
}

PairDraw GradientPairSource::Draw(std::size_t n, Rng& rng) const {
  PairDraw draw;
  DrawBatches(n, rng, draw.x, draw.joint);
  Tensor unused;
  DrawBatches(n, rng, unused, draw.marginal);
  return draw;
}

GaussianPairSource::GaussianPairSource(std::size_t dim, double rho)
    : dim_(dim), rho_(rho) {
  // Validates dim and rho.
  dataio::GaussianMutualInformation(dim, rho);
}

PairDraw GaussianPairSource::Draw(std::size_t n, Rng& rng) const {
  PairDraw draw;
  dataio::GaussianPairs joint = dataio::MakeGaussianPairs(dim_, rho_, n, rng);
  dataio::GaussianPairs other = dataio::MakeGaussianPairs(dim_, rho_, n, rng);
  draw.x = std::move(joint.x);
  draw.joint = std::move(joint.g);
  draw.marginal = std::move(other.g);
  return draw;
}

double GaussianPairSource::AnalyticMi() const {
  return dataio::GaussianMutualInformation(dim_, rho_);
}

}  // namespace gradleak::miest

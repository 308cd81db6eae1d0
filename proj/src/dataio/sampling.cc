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

#include "gradleak/dataio/sampling.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "gradleak/errors.h"

namespace gradleak::dataio {

using ndcore::Rng;
using ndcore::Tensor;

Tensor Batch::Features() const {
  const std::size_t d = samples.front().features.size();
  Tensor out({samples.size(), d});
  for (std::size_t r = 0; r < samples.size(); ++r) {
    std::copy(samples[r].features.begin(), samples[r].features.end(),
              out.values().begin() + r * d);
  }
  return out;
}

Tensor Batch::Labels() const {
  Tensor out({samples.size(), 1});
  for (std::size_t r = 0; r < samples.size(); ++r) {
    out[r] = samples[r].label;
  }
  return out;
}

Batch SampleBatch(const Dataset& dataset, std::size_t batch_size, Rng& rng) {
  if (batch_size < 1) throw ContractError("batch size must be >= 1");
  Batch batch;
  batch.samples.reserve(batch_size);
  batch.indices.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t index = rng.Index(dataset.size());
    batch.indices.push_back(index);
    batch.samples.push_back(dataset[index]);
  }
  return batch;
}

Dataset ResampleImbalance(const Dataset& dataset,
                          std::optional<double> positive_ratio,
                          std::size_t size, Rng& rng) {
  std::vector<std::size_t> positives, negatives;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (dataset.labels()[i] == 1 ? positives : negatives).push_back(i);
  }
  if (positives.empty() || negatives.empty()) {
    throw ContractError("imbalance resampling needs both classes present");
  }
  const double ratio = positive_ratio.value_or(
      static_cast<double>(positives.size()) /
      static_cast<double>(dataset.size()));
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ContractError("positive ratio must lie in (0, 1), got " +
                        std::to_string(ratio));
  }
  if (size < 1) throw ContractError("resampled size must be >= 1");

  const auto num_positive =
      static_cast<std::size_t>(std::llround(static_cast<double>(size) * ratio));
  std::vector<std::size_t> chosen;
  chosen.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    const auto& pool = i < num_positive ? positives : negatives;
    chosen.push_back(pool[rng.Index(pool.size())]);
  }
  // Fisher-Yates so classes are interleaved.
  for (std::size_t i = chosen.size(); i > 1; --i) {
    std::swap(chosen[i - 1], chosen[rng.Index(i)]);
  }

  std::vector<std::vector<double>> encoded;
  std::vector<int> labels;
  encoded.reserve(size);
  labels.reserve(size);
  for (std::size_t index : chosen) {
    encoded.push_back(dataset.encoded()[index]);
    labels.push_back(dataset.labels()[index]);
  }
  return Dataset(dataset.columns(), std::move(encoded), std::move(labels));
}

GaussianPairs MakeGaussianPairs(std::size_t dim, double rho, std::size_t n,
                                Rng& rng) {
  if (dim < 1) throw ContractError("Gaussian pair dimension must be >= 1");
  if (!(std::abs(rho) < 1.0)) {
    throw ContractError("correlation must satisfy |rho| < 1");
  }
  if (n < 1) throw ContractError("need at least one Gaussian pair");
  const double residual = std::sqrt(1.0 - rho * rho);
  GaussianPairs pairs{Tensor({n, dim}), Tensor({n, dim})};
  for (std::size_t i = 0; i < n * dim; ++i) {
    const double x = rng.Normal();
    pairs.x[i] = x;
    pairs.g[i] = rho * x + residual * rng.Normal();
  }
  return pairs;
}

double GaussianMutualInformation(std::size_t dim, double rho) {
  if (dim < 1) throw ContractError("Gaussian pair dimension must be >= 1");
  if (!(std::abs(rho) < 1.0)) {
    throw ContractError("correlation must satisfy |rho| < 1");
  }
  return -0.5 * static_cast<double>(dim) * std::log1p(-rho * rho);
}

}  // namespace gradleak::dataio

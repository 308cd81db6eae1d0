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

#ifndef GRADLEAK_DATAIO_SAMPLING_H_
#define GRADLEAK_DATAIO_SAMPLING_H_

#include <cstddef>
#include <optional>
#include <vector>

#include "gradleak/dataio/dataset.h"
#include "gradleak/ndcore/rng.h"
#include "gradleak/ndcore/tensor.h"

namespace gradleak::dataio {

struct Batch {
  std::vector<Sample> samples;
  std::vector<std::size_t> indices;  // into the parent dataset

  std::size_t size() const { return samples.size(); }
  // {B, num_features}.
  ndcore::Tensor Features() const;
  // {B, 1} of 0/1.
  ndcore::Tensor Labels() const;
};

// `batch_size` indices drawn uniformly with replacement.
Batch SampleBatch(const Dataset& dataset, std::size_t batch_size,
                  ndcore::Rng& rng);

// A dataset of `size` rows with exactly round(size * positive_ratio)
// positives, drawn with replacement per class and re-standardized. Without a
// ratio, the source's own positive fraction is used.
Dataset ResampleImbalance(const Dataset& dataset,
                          std::optional<double> positive_ratio,
                          std::size_t size, ndcore::Rng& rng);

// n draws of (x, g) in R^dim where each coordinate pair is standard bivariate
// normal with correlation rho, independent across coordinates.
struct GaussianPairs {
  ndcore::Tensor x;  // {n, dim}
  ndcore::Tensor g;  // {n, dim}
};

GaussianPairs MakeGaussianPairs(std::size_t dim, double rho, std::size_t n,
                                ndcore::Rng& rng);

// -(dim / 2) * ln(1 - rho^2), in nats.
double GaussianMutualInformation(std::size_t dim, double rho);

}  // namespace gradleak::dataio

#endif  // GRADLEAK_DATAIO_SAMPLING_H_

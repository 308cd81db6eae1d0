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

#ifndef GRADLEAK_MIEST_PAIR_SOURCE_H_
#define GRADLEAK_MIEST_PAIR_SOURCE_H_

#include <cstddef>

#include "gradleak/dataio/dataset.h"
#include "gradleak/fedsim/task_model.h"
#include "gradleak/ndcore/rng.h"
#include "gradleak/ndcore/tensor.h"

namespace gradleak::miest {

// One round of estimator inputs: n batches X_B as n * B rows of `x`, their
// gradients `joint` ({n, g_dim}) and gradients of n independent batches
// `marginal` ({n, g_dim}).
struct PairDraw {
  ndcore::Tensor x;
  ndcore::Tensor joint;
  ndcore::Tensor marginal;
};

class PairSource {
 public:
  virtual ~PairSource() = default;

  virtual std::size_t batch_size() const = 0;
  virtual std::size_t x_dim() const = 0;
  virtual std::size_t g_dim() const = 0;
  // Draws n joint pairs and n marginal gradients from `rng`.
  virtual PairDraw Draw(std::size_t n, ndcore::Rng& rng) const = 0;
};

struct GradientSourceOptions {
  std::size_t batch_size = 1;
  double noise_sigma = 0.0;   // Gaussian noise on every published gradient
  bool include_label = true;  // append y_j to x_j
};

// Batches sampled with replacement from `dataset`, gradients of a fixed task
// model. Holds references; both must outlive the source.
class GradientPairSource final : public PairSource {
 public:
  GradientPairSource(const fedsim::TaskModel& model,
                     const dataio::Dataset& dataset,
                     GradientSourceOptions options);

  std::size_t batch_size() const override { return options_.batch_size; }
  std::size_t x_dim() const override;
  std::size_t g_dim() const override;
  PairDraw Draw(std::size_t n, ndcore::Rng& rng) const override;

  // n batches and their (noised) gradients. `x` gets n * B rows.
  void DrawBatches(std::size_t n, ndcore::Rng& rng, ndcore::Tensor& x,
                   ndcore::Tensor& g) const;

 private:
  const fedsim::TaskModel& model_;
  const dataio::Dataset& dataset_;
  GradientSourceOptions options_;
};

// x ~ N(0, I_dim), g = rho x + sqrt(1 - rho^2) z per coordinate, B = 1.
class GaussianPairSource final : public PairSource {
 public:
  GaussianPairSource(std::size_t dim, double rho);

  std::size_t batch_size() const override { return 1; }
  std::size_t x_dim() const override { return dim_; }
  std::size_t g_dim() const override { return dim_; }
  PairDraw Draw(std::size_t n, ndcore::Rng& rng) const override;

  // Closed-form I(x; g) in nats.
  double AnalyticMi() const;

 private:
  std::size_t dim_;
  double rho_;
};

}  // namespace gradleak::miest

#endif  // GRADLEAK_MIEST_PAIR_SOURCE_H_

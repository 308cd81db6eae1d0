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

#ifndef GRADLEAK_FEDSIM_TASK_MODEL_H_
#define GRADLEAK_FEDSIM_TASK_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gradleak/dataio/sampling.h"
#include "gradleak/ndcore/graph.h"
#include "gradleak/ndcore/mlp.h"
#include "gradleak/ndcore/rng.h"
#include "gradleak/ndcore/tensor.h"

namespace gradleak::fedsim {

enum class TaskKind {
  kLogistic,  // one sigmoid output, binary cross-entropy
  kMlp,       // softmax over logits, cross-entropy
};

std::string_view TaskKindName(TaskKind kind);
TaskKind ParseTaskKind(std::string_view name);

// Names a contiguous slice of a flat parameter vector.
struct Segment {
  std::string name;
  ndcore::Shape shape;
  std::size_t offset = 0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct ParamVector {
  std::vector<double> values;
  std::vector<Segment> layout;

  std::size_t size() const { return values.size(); }
  friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

struct GradientProvenance {
  std::int64_t round = -1;
  std::int64_t client = -1;
  std::size_t batch_size = 0;
  double noise_sigma = 0.0;
};

struct GradientVector {
  std::vector<double> values;  // same layout as the model's ParamVector
  GradientProvenance provenance;

  std::size_t size() const { return values.size(); }
};

// Classifier f_theta over feature rows. Parameters live in an Mlp whose
// flattened order (W0, b0, W1, b1, ...) is the ParamVector layout.
class TaskModel {
 public:
  // input_dim -> 1 logistic regression with zero parameters.
  static TaskModel Logistic(std::size_t input_dim);
  // input -> hidden... -> classes, Glorot-initialized.
  static TaskModel MlpClassifier(std::size_t input_dim,
                                 std::vector<std::size_t> hidden,
                                 std::size_t classes, ndcore::Rng& rng,
                                 ndcore::Activation activation =
                                     ndcore::Activation::kRelu);

  TaskKind kind() const { return kind_; }
  std::size_t input_dim() const { return net_.input_dim(); }
  std::size_t parameter_count() const { return net_.ParameterCount(); }
  const ndcore::Mlp& network() const { return net_; }

  ParamVector params() const;
  // Throws DimensionError unless `theta` matches this model's layout.
  void set_params(const ParamVector& theta);
  void set_params(std::span<const double> values);

  // Per-sample loss for rows of `features` ({B, input_dim}) and `labels`
  // ({B, 1} of class ids). Throws NumericError naming the first sample whose
  // loss is not finite.
  std::vector<double> SampleLosses(const ndcore::Tensor& features,
                                   const ndcore::Tensor& labels) const;
  double MeanLoss(const ndcore::Tensor& features,
                  const ndcore::Tensor& labels) const;
  double DatasetLoss(const dataio::Dataset& dataset) const;
  double Accuracy(const dataio::Dataset& dataset) const;

  // The {1, P} gradient of loss_scale * mean loss with respect to theta, as a
  // differentiable function of `features`. Theta enters as constants, so the
  // result can be differentiated with respect to the inputs.
  ndcore::Var GradientExpression(ndcore::Var features,
                                 const ndcore::Tensor& labels,
                                 double loss_scale = 1.0) const;

 private:
  TaskModel(TaskKind kind, ndcore::Mlp net);

  [[noreturn]] void ThrowAtFirstNonFinite(
      const ndcore::Tensor& features) const;

  ndcore::Var LogisticGradient(ndcore::Var features,
                               const ndcore::Tensor& labels,
                               double scale) const;
  ndcore::Var SoftmaxGradient(ndcore::Var features,
                              const ndcore::Tensor& labels,
                              double scale) const;

  TaskKind kind_;
  ndcore::Mlp net_;
};

// Mean-over-batch gradient at the model's current theta. Throws NumericError
// naming the first sample whose loss is not finite.
GradientVector ComputeGradient(const TaskModel& model,
                               const dataio::Batch& batch,
                               double loss_scale = 1.0);
GradientVector ComputeGradient(const TaskModel& model,
                               const ndcore::Tensor& features,
                               const ndcore::Tensor& labels,
                               double loss_scale = 1.0);

// Gradients of `count` consecutive batches stacked as rows of a {count, P}
// tensor. `features` holds count * batch_size rows, batch-major. Equivalent
// to calling ComputeGradient() per batch; logistic models use a direct loop.
ndcore::Tensor BatchGradients(const TaskModel& model,
                              const ndcore::Tensor& features,
                              const ndcore::Tensor& labels,
                              std::size_t batch_size);

// G + N(0, sigma^2) per coordinate. sigma == 0 returns G unchanged.
GradientVector AddGradientNoise(GradientVector gradient, double sigma,
                                ndcore::Rng& rng);

}  // namespace gradleak::fedsim

#endif  // GRADLEAK_FEDSIM_TASK_MODEL_H_

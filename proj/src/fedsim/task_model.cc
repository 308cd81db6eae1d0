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

#include "gradleak/fedsim/task_model.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "gradleak/errors.h"

namespace gradleak::fedsim {

using ndcore::Activation;
using ndcore::Graph;
using ndcore::Mlp;
using ndcore::Shape;
using ndcore::Tensor;
using ndcore::Var;

std::string_view TaskKindName(TaskKind kind) {
  return kind == TaskKind::kLogistic ? "logreg" : "mlp";
}

TaskKind ParseTaskKind(std::string_view name) {
  if (name == "logreg") return TaskKind::kLogistic;
  if (name == "mlp") return TaskKind::kMlp;
  throw ContractError("unknown task model '" + std::string(name) + "'");
}

TaskModel::TaskModel(TaskKind kind, Mlp net)
    : kind_(kind), net_(std::move(net)) {}

TaskModel TaskModel::Logistic(std::size_t input_dim) {
  return TaskModel(TaskKind::kLogistic,
                   Mlp::Zeros({{input_dim, 1}, Activation::kIdentity,
                               Activation::kIdentity}));
}

TaskModel TaskModel::MlpClassifier(std::size_t input_dim,
                                   std::vector<std::size_t> hidden,
                                   std::size_t classes, ndcore::Rng& rng,
                                   Activation activation) {
  if (classes < 2) throw ContractError("an MLP classifier needs >= 2 classes");
  std::vector<std::size_t> dims = {input_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(classes);
  return TaskModel(TaskKind::kMlp,
                   Mlp::Initialized({dims, activation, Activation::kIdentity},
                                    rng));
}

ParamVector TaskModel::params() const {
  ParamVector theta;
  theta.values = net_.Flatten();
  std::size_t offset = 0;
  for (std::size_t l = 0; l < net_.num_layers(); ++l) {
    for (const char* part : {"W", "b"}) {
      const Tensor& t = part[0] == 'W' ? net_.weight(l) : net_.bias(l);
      theta.layout.push_back({part + std::to_string(l), t.shape(), offset});
      offset += t.size();
    }
  }
  return theta;
}

void TaskModel::set_params(const ParamVector& theta) {
  if (theta.layout != params().layout) {
    throw DimensionError("parameter layout does not match the task model");
  }
  set_params(theta.values);
}

void TaskModel::set_params(std::span<const double> values) {
  net_.Unflatten(values);
}

namespace {

void CheckBatchShapes(const Tensor& features, const Tensor& labels,
                      std::size_t input_dim) {
  if (features.rank() != 2 || features.cols() != input_dim) {
    throw DimensionError("task model expects {B, " +
                         std::to_string(input_dim) + "} features, got " +
                         ndcore::ShapeToString(features.shape()));
  }
  if (labels.rank() != 2 || labels.cols() != 1 ||
      labels.rows() != features.rows()) {
    throw DimensionError("labels must be {B, 1} matching the features, got " +
                         ndcore::ShapeToString(labels.shape()));
  }
}

double Softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace

std::vector<double> TaskModel::SampleLosses(const Tensor& features,
                                            const Tensor& labels) const {
  CheckBatchShapes(features, labels, input_dim());
  Tensor logits;
  try {
    logits = net_.Forward(features);
  } catch (const NumericError&) {
    ThrowAtFirstNonFinite(features);
  }
  std::vector<double> losses(features.rows());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const double y = labels[r];
    if (kind_ == TaskKind::kLogistic) {
      const double z = logits(r, 0);
      losses[r] = Softplus(z) - y * z;
    } else {
      double top = logits(r, 0);
      for (std::size_t c = 1; c < logits.cols(); ++c) {
        top = std::max(top, logits(r, c));
      }
      double total = 0.0;
      for (std::size_t c = 0; c < logits.cols(); ++c) {
        total += std::exp(logits(r, c) - top);
      }
      losses[r] = top + std::log(total) - logits(r, static_cast<std::size_t>(y));
    }
    if (!std::isfinite(losses[r])) {
      throw NumericError("non-finite loss at batch sample " +
                         std::to_string(r));
    }
  }
  return losses;
}

// Re-evaluates rows one at a time to name the first one whose loss cannot be
// computed.
void TaskModel::ThrowAtFirstNonFinite(const Tensor& features) const {
  const std::size_t d = features.cols();
  for (std::size_t r = 0; r < features.rows(); ++r) {
    Tensor row({1, d});
    std::copy_n(features.values().begin() + r * d, d, row.values().begin());
    try {
      net_.Forward(row);
    } catch (const NumericError&) {
      throw NumericError("non-finite loss at batch sample " +
                         std::to_string(r));
    }
  }
  throw NumericError("non-finite loss in batch");
}

double TaskModel::MeanLoss(const Tensor& features, const Tensor& labels) const {
  const std::vector<double> losses = SampleLosses(features, labels);
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(losses.size());
}

namespace {

void DatasetAsTensors(const dataio::Dataset& dataset, Tensor& features,
                      Tensor& labels) {
  const std::size_t d = dataset.num_features();
  features = Tensor({dataset.size(), d});
  labels = Tensor({dataset.size(), 1});
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    std::copy(dataset[i].features.begin(), dataset[i].features.end(),
              features.values().begin() + i * d);
    labels[i] = dataset[i].label;
  }
}

}  // namespace

double TaskModel::DatasetLoss(const dataio::Dataset& dataset) const {
  Tensor features, labels;
  DatasetAsTensors(dataset, features, labels);
  return MeanLoss(features, labels);
}

double TaskModel::Accuracy(const dataio::Dataset& dataset) const {
  Tensor features, labels;
  DatasetAsTensors(dataset, features, labels);
  const Tensor logits = net_.Forward(features);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    int predicted;
    if (kind_ == TaskKind::kLogistic) {
      predicted = logits(r, 0) > 0 ? 1 : 0;
    } else {
      predicted = logits(r, 1) > logits(r, 0) ? 1 : 0;
    }
    correct += predicted == static_cast<int>(labels[r]);
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

Var TaskModel::GradientExpression(Var features, const Tensor& labels,
                                  double loss_scale) const {
  CheckBatchShapes(features.value(), labels, input_dim());
  const double scale =
      loss_scale / static_cast<double>(features.value().rows());
  return kind_ == TaskKind::kLogistic
             ? LogisticGradient(features, labels, scale)
             : SoftmaxGradient(features, labels, scale);
}

// With r = scale * (sigmoid(XW + b) - y): dW = X^T r, db = sum(r).
Var TaskModel::LogisticGradient(Var features, const Tensor& labels,
                                double scale) const {
  Graph& g = *features.graph();
  const std::size_t d = input_dim();
  Var z = Add(MatMul(features, g.Constant(net_.weight(0))),
              g.Constant(net_.bias(0)));
  Var residual = Scale(Sub(Sigmoid(z), g.Constant(labels)), scale);
  Var grad_w = MatMul(Transpose(features), residual);
  Var parts[] = {Reshape(grad_w, {1, d}), ColSum(residual)};
  return ConcatCols(parts);
}

// Backpropagation written out as graph ops: delta_L = scale * (softmax - Y),
// dW_l = a_l^T delta_l, db_l = colsum(delta_l),
// delta_{l-1} = (delta_l W_l^T) * act'(z_{l-1}).
Var TaskModel::SoftmaxGradient(Var features, const Tensor& labels,
                               double scale) const {
  Graph& g = *features.graph();
  const std::size_t layers = net_.num_layers();
  const std::size_t batch = labels.rows();
  const std::size_t classes = net_.output_dim();
  const Activation hidden = net_.spec().hidden;

  std::vector<Var> inputs = {features};  // input to each layer
  std::vector<Var> pre;                  // pre-activations
  std::vector<Var> weights;
  for (std::size_t l = 0; l < layers; ++l) {
    weights.push_back(g.Constant(net_.weight(l)));
    Var z = Add(MatMul(inputs.back(), weights.back()),
                g.Constant(net_.bias(l)));
    pre.push_back(z);
    if (l + 1 < layers) inputs.push_back(ndcore::Apply(hidden, z));
  }

  Tensor one_hot({batch, classes});
  for (std::size_t r = 0; r < batch; ++r) {
    const auto y = static_cast<std::size_t>(labels[r]);
    if (y >= classes) throw ContractError("label out of range");
    one_hot(r, y) = 1.0;
  }
  Var delta =
      Scale(Sub(SoftmaxRows(pre.back()), g.Constant(one_hot)), scale);

  std::vector<Var> parts(2 * layers);
  for (std::size_t l = layers; l-- > 0;) {
    Var grad_w = MatMul(Transpose(inputs[l]), delta);
    parts[2 * l] = Reshape(grad_w, {1, net_.weight(l).size()});
    parts[2 * l + 1] = ColSum(delta);
    if (l == 0) break;
    Var back = MatMul(delta, Transpose(weights[l]));
    const Var& a = inputs[l];
    switch (hidden) {
      case Activation::kIdentity:
        delta = back;
        break;
      case Activation::kRelu:
        delta = Mul(back, ndcore::Step(pre[l - 1]));
        break;
      case Activation::kSigmoid:
        delta = Mul(back, Sub(a, Square(a)));
        break;
      case Activation::kTanh:
        delta = Mul(back, Sub(g.Constant(Tensor(a.shape(), 1.0)), Square(a)));
        break;
    }
  }
  return ConcatCols(parts);
}

GradientVector ComputeGradient(const TaskModel& model, const Tensor& features,
                               const Tensor& labels, double loss_scale) {
  GradientVector out;
  try {
    Graph g;
    Var flat =
        model.GradientExpression(g.Constant(features), labels, loss_scale);
    out.values = flat.value().vector();
  } catch (const NumericError&) {
    // Names the offending sample if a loss is to blame.
    model.SampleLosses(features, labels);
    throw;
  }
  out.provenance.batch_size = features.rows();
  return out;
}

GradientVector ComputeGradient(const TaskModel& model,
                               const dataio::Batch& batch, double loss_scale) {
  return ComputeGradient(model, batch.Features(), batch.Labels(), loss_scale);
}

Tensor BatchGradients(const TaskModel& model, const Tensor& features,
                      const Tensor& labels, std::size_t batch_size) {
  CheckBatchShapes(features, labels, model.input_dim());
  if (batch_size < 1 || features.rows() % batch_size != 0) {
    throw ContractError(std::to_string(features.rows()) +
                        " rows do not split into batches of " +
                        std::to_string(batch_size));
  }
  const std::size_t count = features.rows() / batch_size;
  const std::size_t d = model.input_dim();
  const std::size_t p = model.parameter_count();
  Tensor out({count, p});
  if (model.kind() != TaskKind::kLogistic) {
    for (std::size_t k = 0; k < count; ++k) {
      Tensor x({batch_size, d}), y({batch_size, 1});
      std::copy_n(features.values().begin() + k * batch_size * d,
                  batch_size * d, x.values().begin());
      std::copy_n(labels.values().begin() + k * batch_size, batch_size,
                  y.values().begin());
      const GradientVector g = ComputeGradient(model, x, y);
      std::copy(g.values.begin(), g.values.end(),
                out.values().begin() + k * p);
    }
    return out;
  }
  const Tensor& w = model.network().weight(0);
  const double b = model.network().bias(0)[0];
  const double inv = 1.0 / static_cast<double>(batch_size);
  for (std::size_t k = 0; k < count; ++k) {
    double* g = out.values().data() + k * p;
    for (std::size_t j = 0; j < batch_size; ++j) {
      const std::size_t row = k * batch_size + j;
      const double* x = features.values().data() + row * d;
      double z = b;
      for (std::size_t c = 0; c < d; ++c) z += x[c] * w[c];
      if (!std::isfinite(z)) {
        throw NumericError("non-finite loss at batch sample " +
                           std::to_string(j));
      }
      const double r = inv * (1.0 / (1.0 + std::exp(-z)) - labels[row]);
      for (std::size_t c = 0; c < d; ++c) g[c] += r * x[c];
      g[d] += r;
    }
  }
  return out;
}

GradientVector AddGradientNoise(GradientVector gradient, double sigma,
                                ndcore::Rng& rng) {
  if (!(sigma >= 0.0)) throw ContractError("noise sigma must be >= 0");
  if (sigma > 0.0) {
    for (double& v : gradient.values) v += sigma * rng.Normal();
  }
  gradient.provenance.noise_sigma = sigma;
  return gradient;
}

}  // namespace gradleak::fedsim

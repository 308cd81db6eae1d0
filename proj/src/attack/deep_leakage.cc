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

#include "gradleak/attack/deep_leakage.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <string>

#include "gradleak/errors.h"
#include "gradleak/ndcore/adam.h"
#include "gradleak/ndcore/graph.h"
#include "gradleak/ndcore/rng.h"

namespace gradleak::attack {

using ndcore::Graph;
using ndcore::Tensor;
using ndcore::Var;

void AttackConfig::Validate() const {
  if (restarts < 2) throw ContractError("attack needs >= 2 restarts");
  if (!(learning_rate > 0.0)) {
    throw ContractError("attack learning rate must be > 0");
  }
}

namespace {

void CheckTarget(const fedsim::TaskModel& model,
                 std::span<const double> target_gradient,
                 const Tensor& labels) {
  if (target_gradient.size() != model.parameter_count()) {
    throw ContractError("target gradient of length " +
                        std::to_string(target_gradient.size()) +
                        " does not match " +
                        std::to_string(model.parameter_count()) +
                        " model parameters");
  }
  if (labels.rank() != 2 || labels.cols() != 1) {
    throw ContractError("attack labels must be {B, 1}, got " +
                        ndcore::ShapeToString(labels.shape()));
  }
}

Var Objective(Graph& graph, const fedsim::TaskModel& model, Var features,
              const Tensor& labels, const Tensor& target) {
  Var diff = ndcore::Sub(model.GradientExpression(features, labels),
                         graph.Constant(target));
  return ndcore::Sum(ndcore::Square(diff));
}

}  // namespace

double MatchingLoss(const fedsim::TaskModel& model, const Tensor& features,
                    const Tensor& labels,
                    std::span<const double> target_gradient) {
  CheckTarget(model, target_gradient, labels);
  Graph graph;
  const Tensor target({1, target_gradient.size()},
                      {target_gradient.begin(), target_gradient.end()});
  return Objective(graph, model, graph.Constant(features), labels, target)
      .value()
      .item();
}

AttackReport RunAttack(const fedsim::TaskModel& model,
                       std::span<const double> target_gradient,
                       const Tensor& labels, const AttackConfig& config) {
  config.Validate();
  CheckTarget(model, target_gradient, labels);
  const Tensor target({1, target_gradient.size()},
                      {target_gradient.begin(), target_gradient.end()});
  const ndcore::Shape shape = {labels.rows(), model.input_dim()};
  const ndcore::Rng root(config.seed);

  AttackReport report;
  report.config = config;
  for (std::size_t k = 0; k < config.restarts; ++k) {
    ndcore::Rng rng = root.Split(config.reuse_seed ? 0 : k);
    std::vector<Tensor> x = {Tensor(shape)};
    for (double& v : x[0].values()) v = rng.Normal();
    ndcore::AdamState adam({.learning_rate = config.learning_rate}, x);

    double loss = std::numeric_limits<double>::quiet_NaN();
    bool aborted = false;
    try {
      for (std::size_t it = 0;; ++it) {
        Graph graph;
        Var features = graph.Leaf(x[0]);
        Var objective = Objective(graph, model, features, labels, target);
        loss = objective.value().item();
        if (!std::isfinite(loss)) {
          aborted = true;
          break;
        }
        if (it == config.iterations) break;
        graph.Backward(objective);
        const std::vector<Tensor> grads = {graph.grad(features)};
        adam.Step(x, grads, ndcore::Direction::kDescent);
      }
    } catch (const NumericError&) {
      aborted = true;
    }
    report.aborted.push_back(aborted);
    report.final_losses.push_back(
        aborted ? std::numeric_limits<double>::quiet_NaN() : loss);
    if (!aborted) {
      if (report.reconstructions.empty() || loss < report.best_loss) {
        report.best = report.reconstructions.size();
        report.best_loss = loss;
      }
      report.reconstructions.push_back(std::move(x[0]));
    }
  }
  if (report.reconstructions.size() < 2) {
    throw AttackError("only " + std::to_string(report.reconstructions.size()) +
                      " of " + std::to_string(config.restarts) +
                      " attack restarts completed with a finite loss");
  }
  report.epsilon = InferenceError(report.reconstructions);
  return report;
}

double InferenceError(std::span<const Tensor> reconstructions) {
  if (reconstructions.size() < 2) {
    throw ContractError("inference error needs >= 2 reconstructions");
  }
  const ndcore::Shape& shape = reconstructions[0].shape();
  for (const Tensor& r : reconstructions) {
    if (r.shape() != shape) {
      throw ContractError("reconstruction shapes differ: " +
                          ndcore::ShapeToString(shape) + " vs " +
                          ndcore::ShapeToString(r.shape()));
    }
  }
  const double k = static_cast<double>(reconstructions.size());
  const std::size_t n = reconstructions[0].size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (const Tensor& r : reconstructions) mean += r[i];
    mean /= k;
    double ss = 0.0;
    for (const Tensor& r : reconstructions) ss += (r[i] - mean) * (r[i] - mean);
    total += ss / (k - 1.0);
  }
  return total / static_cast<double>(n);
}

void WriteAttackReport(const std::filesystem::path& path,
                       const AttackReport& report) {
  std::ofstream out(path);
  if (!out) throw RunError("cannot write '" + path.string() + "'");
  out << "restart,final_loss,aborted\n" << std::setprecision(17);
  for (std::size_t k = 0; k < report.final_losses.size(); ++k) {
    out << k << "," << report.final_losses[k] << ","
        << (report.aborted[k] ? 1 : 0) << "\n";
  }
  out << "# epsilon=" << report.epsilon << "\n";
}

}  // namespace gradleak::attack

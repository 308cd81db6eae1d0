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

#ifndef GRADLEAK_ATTACK_DEEP_LEAKAGE_H_
#define GRADLEAK_ATTACK_DEEP_LEAKAGE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "gradleak/fedsim/task_model.h"
#include "gradleak/ndcore/tensor.h"

namespace gradleak::attack {

struct AttackConfig {
  std::size_t restarts = 5;  // K
  // Adam steps per restart. Zero returns the random initializations.
  std::size_t iterations = 2000;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  // Every restart draws its initialization from the same stream.
  bool reuse_seed = false;

  // Throws ContractError on K < 2 or a non-positive learning rate.
  void Validate() const;
};

struct AttackReport {
  // One {B, input_dim} reconstruction per completed restart.
  std::vector<ndcore::Tensor> reconstructions;
  // Per restart, in restart order; NaN for aborted restarts.
  std::vector<double> final_losses;
  std::vector<bool> aborted;
  double epsilon = 0.0;  // inference error over completed restarts
  // Index into `reconstructions` of the lowest final loss: the attacker's
  // answer, since the matching loss is observable without the true input.
  std::size_t best = 0;
  double best_loss = 0.0;
  AttackConfig config;
};

// Gradient-matching inversion: per restart, X_hat ~ N(0, 1) is moved by Adam
// to minimize ||grad_theta f(X_hat; labels) - G||^2 at the model's theta.
// `labels` is {B, 1}. A restart whose loss stops being finite is aborted.
// Throws AttackError when fewer than two restarts complete and ContractError
// when G does not match the model.
AttackReport RunAttack(const fedsim::TaskModel& model,
                       std::span<const double> target_gradient,
                       const ndcore::Tensor& labels,
                       const AttackConfig& config);

// ||grad_theta f(features; labels) - G||^2.
double MatchingLoss(const fedsim::TaskModel& model,
                    const ndcore::Tensor& features,
                    const ndcore::Tensor& labels,
                    std::span<const double> target_gradient);

// Sample variance (n - 1) across reconstructions per coordinate, averaged
// over coordinates. Throws ContractError on fewer than two reconstructions or
// mismatched shapes.
double InferenceError(std::span<const ndcore::Tensor> reconstructions);

// "restart,final_loss,aborted" rows, then "# epsilon=<value>".
void WriteAttackReport(const std::filesystem::path& path,
                       const AttackReport& report);

}  // namespace gradleak::attack

#endif  // GRADLEAK_ATTACK_DEEP_LEAKAGE_H_

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

#ifndef GRADLEAK_HARNESS_CONFIG_H_
#define GRADLEAK_HARNESS_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gradleak/attack/deep_leakage.h"
#include "gradleak/fedsim/fedsgd.h"
#include "gradleak/fedsim/task_model.h"
#include "gradleak/miest/estimator.h"
#include "gradleak/miest/statnet.h"

namespace gradleak::harness {

enum class ExperimentKind { kConvergence, kValidateAttack, kFactors };
enum class Axis { kBatchSize, kNoise, kEpoch, kImbalance };

std::string_view ExperimentKindName(ExperimentKind kind);
ExperimentKind ParseExperimentKind(std::string_view name);
std::string_view AxisName(Axis axis);
Axis ParseAxis(std::string_view name);

struct TaskSpec {
  fedsim::TaskKind kind = fedsim::TaskKind::kLogistic;
  std::vector<std::size_t> hidden = {100, 100};  // kMlp only
  std::size_t classes = 2;                       // kMlp only
};

// Settings of one probed gradient. The grid axis overrides one of them.
struct ProbeSettings {
  std::size_t batch_size = 3;  // B, also the client's training batch
  double noise_sigma = 0.0;    // on probed gradients only
  std::size_t epoch = 3;       // theta at the start of this epoch
  std::optional<double> positive_ratio;  // resample the dataset if set
  bool include_label = true;
  std::size_t covariance_draws = 256;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kValidateAttack;
  Axis axis = Axis::kBatchSize;
  std::vector<double> grid = {1, 2, 3, 4};
  // Statistic networks compared by the convergence experiment.
  std::vector<miest::StatNetKind> variants = {
      miest::StatNetKind::kHierarchical, miest::StatNetKind::kFlat};
  TaskSpec task;
  ProbeSettings probe;
  fedsim::FedConfig fed;
  miest::EstimatorConfig estimator;
  miest::StatNetSpec statnet;
  attack::AttackConfig attack;
  bool run_attack = true;
  std::filesystem::path dataset = "data/adult.data";
  std::filesystem::path out_dir = "out";
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;

  // Throws ConfigError on an empty grid, an axis that does not belong to the
  // experiment kind, or out-of-range grid values; nested configs are
  // validated too.
  void Validate() const;
};

// The probe settings of one grid point.
ProbeSettings ProbeAt(const ExperimentConfig& config, double axis_value);

// JSON text <-> config. Unknown keys and type mismatches raise ConfigError;
// missing keys keep their defaults.
ExperimentConfig ParseConfig(std::string_view json_text);
ExperimentConfig LoadConfig(const std::filesystem::path& path);
std::string ConfigToJson(const ExperimentConfig& config);

// FNV-1a over the canonical JSON, ignoring out_dir and workers.
std::uint64_t ConfigHash(const ExperimentConfig& config);

}  // namespace gradleak::harness

#endif  // GRADLEAK_HARNESS_CONFIG_H_

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

#ifndef GRADLEAK_HARNESS_EXPERIMENTS_H_
#define GRADLEAK_HARNESS_EXPERIMENTS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gradleak/dataio/dataset.h"
#include "gradleak/fedsim/task_model.h"
#include "gradleak/harness/config.h"
#include "gradleak/miest/estimator.h"
#include "gradleak/miest/pair_source.h"
#include "gradleak/miest/statnet.h"

namespace gradleak::harness {

// Seed shared by every point of a run: (master seed, config hash).
std::uint64_t RunSeed(const ExperimentConfig& config);
// Seed owned by one grid point: (master seed, config hash, axis value).
std::uint64_t PointSeed(const ExperimentConfig& config, double axis_value);

// Parses and preprocesses the configured Adult file.
dataio::Dataset LoadDataset(const ExperimentConfig& config);

// The client dataset a probe sees: `base`, or a resample of it when the
// probe fixes a positive ratio. Resamples depend only on (run seed, ratio).
dataio::Dataset ProbeDataset(const ExperimentConfig& config,
                             const dataio::Dataset& base,
                             const ProbeSettings& probe);

// The untrained task model; MLP weights come from the run seed.
fedsim::TaskModel InitialModel(const ExperimentConfig& config,
                               std::size_t input_dim);

// Trains FedSGD with batch size probe.batch_size and returns the model at
// the start of each requested epoch, in request order.
std::vector<fedsim::TaskModel> TrainToEpochs(
    const ExperimentConfig& config, const dataio::Dataset& dataset,
    std::size_t batch_size, std::span<const std::size_t> epochs);

struct RunRecord {
  std::uint64_t config_hash = 0;
  double axis_value = 0.0;
  double mi_nats = 0.0;
  double cov_baseline = 0.0;
  std::optional<double> epsilon;  // empty when no attack ran or it failed
  bool converged = false;
  double wall_seconds = 0.0;
  std::string error;  // empty on success
  miest::MiTrace trace;
};

// Estimates MI, the covariance baseline and (if enabled) the attack's
// inference error for `model` probed with `probe`. Every random choice comes
// from `point_seed`.
RunRecord ProbeModel(const ExperimentConfig& config,
                     const fedsim::TaskModel& model,
                     const dataio::Dataset& dataset,
                     const ProbeSettings& probe, std::uint64_t point_seed);

// One grid point of a validate-attack or factors run, computed on its own.
RunRecord RunPoint(const ExperimentConfig& config,
                   const dataio::Dataset& base, double axis_value);

struct RunOptions {
  bool serial = false;  // ignore config.workers
};

struct GridResult {
  std::vector<RunRecord> records;  // grid order
  std::optional<double> spearman_mi;
  std::optional<double> spearman_epsilon;
  std::optional<double> spearman_cov;
};

// validate-attack and factors. Grid points run on up to config.workers
// threads; results do not depend on the worker count.
GridResult RunGrid(const ExperimentConfig& config,
                   const dataio::Dataset& base, RunOptions options = {});

struct ConvergenceCell {
  miest::StatNetKind variant = miest::StatNetKind::kHierarchical;
  std::size_t batch_size = 0;
  miest::MiTrace trace;
  std::string error;  // empty if a trace was produced
  double wall_seconds = 0.0;
};

// Every (variant, B) cell at theta of epoch probe.epoch. A failing cell is
// recorded and the run continues.
std::vector<ConvergenceCell> RunConvergence(const ExperimentConfig& config,
                                            const dataio::Dataset& base,
                                            RunOptions options = {});

struct PrealarmDecision {
  bool publish = false;
  double estimate = 0.0;
  bool converged = false;
  std::string reason;
};

// Withholds iff the estimate reaches `threshold` nats, or when the estimator
// does not converge or fails. Throws ContractError on a negative or NaN
// threshold.
PrealarmDecision RiskPrealarm(const miest::PairSource& source,
                              double threshold,
                              const miest::EstimatorConfig& estimator,
                              const miest::StatNetSpec& spec);
// Probes the client's model at probe.epoch with batch size probe.batch_size.
PrealarmDecision RiskPrealarm(const ExperimentConfig& config,
                              const dataio::Dataset& base, double threshold);

// "axis_value,mi_nats,cov_baseline,epsilon,converged"; a missing epsilon is
// an empty field.
void WriteGrid(const std::filesystem::path& path,
               std::span<const RunRecord> records);
// Grid columns plus config_hash, wall_seconds and error.
void WriteRecords(const std::filesystem::path& path,
                  std::span<const RunRecord> records);
// "variant,batch_size,converged,final_nats,iterations,max_abs,error".
void WriteConvergenceSummary(const std::filesystem::path& path,
                             std::span<const ConvergenceCell> cells);

}  // namespace gradleak::harness

#endif  // GRADLEAK_HARNESS_EXPERIMENTS_H_

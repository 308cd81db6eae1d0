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

#ifndef GRADLEAK_FEDSIM_FEDSGD_H_
#define GRADLEAK_FEDSIM_FEDSGD_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "gradleak/dataio/dataset.h"
#include "gradleak/fedsim/task_model.h"
#include "gradleak/ndcore/rng.h"

namespace gradleak::fedsim {

struct FedConfig {
  std::size_t num_clients = 1;
  std::size_t batch_size = 32;
  double learning_rate = 0.1;
  double noise_sigma = 0.0;  // applied to every published gradient
  std::uint64_t seed = 0;

  // Throws ContractError on N < 1, B < 1, eta < 0 or sigma < 0.
  void Validate() const;
};

// theta - eta * sum_i G_i.
ParamVector Aggregate(const ParamVector& theta,
                      std::span<const GradientVector> gradients,
                      double learning_rate);

// ceil(|D| / B): FedSGD rounds in one epoch.
std::size_t RoundsPerEpoch(std::size_t dataset_size, std::size_t batch_size);
// Round at which epoch `epoch` (1-based) begins: (epoch - 1) * rounds.
std::size_t EpochStartRound(std::size_t epoch, std::size_t rounds_per_epoch);

struct ClientStreams {
  ndcore::Rng batches;
  ndcore::Rng noise;
};
// Streams of client `client`, derived only from (seed, client).
ClientStreams ClientStreamsFor(std::uint64_t seed, std::size_t client);

struct Checkpoint {
  std::size_t round = 0;  // theta after this many rounds
  ParamVector theta;
};

struct Trajectory {
  std::vector<Checkpoint> checkpoints;

  // Throws RunError if no checkpoint was stored at `round`.
  const Checkpoint& at_round(std::size_t round) const;
};

// Runs FedSGD from `initial` until the largest requested round, storing theta
// at each round in `checkpoint_rounds`. Each round every client samples a
// batch, computes its gradient, optionally adds noise, and the server
// aggregates. Throws RunError (naming the round) if theta stops being finite.
Trajectory RunFedSgd(const FedConfig& config, const TaskModel& initial,
                     std::span<const dataio::Dataset> client_datasets,
                     std::vector<std::size_t> checkpoint_rounds);

// Versioned CSV: a "# gradleak-checkpoints v1" line, a header
// "round,theta_0,...", then one row per checkpoint at full precision.
void WriteCheckpoints(const std::filesystem::path& path,
                      const Trajectory& trajectory);
// Reads rows written by WriteCheckpoints(); layouts are taken from `like`.
Trajectory ReadCheckpoints(const std::filesystem::path& path,
                           const ParamVector& like);

}  // namespace gradleak::fedsim

#endif  // GRADLEAK_FEDSIM_FEDSGD_H_

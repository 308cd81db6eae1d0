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

#include "gradleak/fedsim/fedsgd.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "gradleak/dataio/sampling.h"
#include "gradleak/errors.h"

namespace gradleak::fedsim {

void FedConfig::Validate() const {
  if (num_clients < 1) throw ContractError("FedSGD needs >= 1 client");
  if (batch_size < 1) throw ContractError("FedSGD batch size must be >= 1");
  // eta == 0 is accepted so a frozen run can be expressed.
  if (!(learning_rate >= 0.0)) {
    throw ContractError("FedSGD learning rate must be >= 0");
  }
  if (!(noise_sigma >= 0.0)) {
    throw ContractError("FedSGD noise sigma must be >= 0");
  }
}

ParamVector Aggregate(const ParamVector& theta,
                      std::span<const GradientVector> gradients,
                      double learning_rate) {
  ParamVector next = theta;
  for (const GradientVector& g : gradients) {
    if (g.size() != theta.size()) {
      throw ContractError("gradient of length " + std::to_string(g.size()) +
                          " does not match theta of length " +
                          std::to_string(theta.size()));
    }
  }
  // Summed in a canonical order so that reordering clients gives bit-identical
  // results.
  std::vector<double> total(theta.size(), 0.0);
  std::vector<const GradientVector*> ordered;
  for (const GradientVector& g : gradients) ordered.push_back(&g);
  std::sort(ordered.begin(), ordered.end(),
            [](const GradientVector* a, const GradientVector* b) {
              return a->values < b->values;
            });
  for (const GradientVector* g : ordered) {
    for (std::size_t k = 0; k < total.size(); ++k) total[k] += g->values[k];
  }
  for (std::size_t k = 0; k < total.size(); ++k) {
    next.values[k] -= learning_rate * total[k];
  }
  return next;
}

std::size_t RoundsPerEpoch(std::size_t dataset_size, std::size_t batch_size) {
  if (batch_size < 1) throw ContractError("batch size must be >= 1");
  return (dataset_size + batch_size - 1) / batch_size;
}

std::size_t EpochStartRound(std::size_t epoch, std::size_t rounds_per_epoch) {
  if (epoch < 1) throw ContractError("epochs are numbered from 1");
  return (epoch - 1) * rounds_per_epoch;
}

ClientStreams ClientStreamsFor(std::uint64_t seed, std::size_t client) {
  const ndcore::Rng root = ndcore::Rng(seed).Split(client);
  return {root.Split(0), root.Split(1)};
}

const Checkpoint& Trajectory::at_round(std::size_t round) const {
  for (const Checkpoint& c : checkpoints) {
    if (c.round == round) return c;
  }
  throw RunError("no checkpoint stored at round " + std::to_string(round));
}

Trajectory RunFedSgd(const FedConfig& config, const TaskModel& initial,
                     std::span<const dataio::Dataset> client_datasets,
                     std::vector<std::size_t> checkpoint_rounds) {
  config.Validate();
  if (client_datasets.size() != config.num_clients) {
    throw ContractError("FedSGD needs one dataset per client (" +
                        std::to_string(config.num_clients) + "), got " +
                        std::to_string(client_datasets.size()));
  }
  std::sort(checkpoint_rounds.begin(), checkpoint_rounds.end());
  checkpoint_rounds.erase(
      std::unique(checkpoint_rounds.begin(), checkpoint_rounds.end()),
      checkpoint_rounds.end());

  std::vector<ClientStreams> streams;
  for (std::size_t i = 0; i < config.num_clients; ++i) {
    streams.push_back(ClientStreamsFor(config.seed, i));
  }

  TaskModel model = initial;
  ParamVector theta = model.params();
  Trajectory trajectory;
  std::size_t next = 0;
  const std::size_t last =
      checkpoint_rounds.empty() ? 0 : checkpoint_rounds.back();
  std::vector<GradientVector> gradients(config.num_clients);
  for (std::size_t round = 0;; ++round) {
    while (next < checkpoint_rounds.size() &&
           checkpoint_rounds[next] == round) {
      trajectory.checkpoints.push_back({round, theta});
      ++next;
    }
    if (round >= last) break;

    for (std::size_t i = 0; i < config.num_clients; ++i) {
      const dataio::Batch batch = dataio::SampleBatch(
          client_datasets[i], config.batch_size, streams[i].batches);
      try {
        gradients[i] = ComputeGradient(model, batch);
      } catch (const NumericError& e) {
        throw RunError("round " + std::to_string(round) + ", client " +
                       std::to_string(i) + ": " + e.what());
      }
      gradients[i] = AddGradientNoise(std::move(gradients[i]),
                                      config.noise_sigma, streams[i].noise);
      gradients[i].provenance.round = static_cast<std::int64_t>(round);
      gradients[i].provenance.client = static_cast<std::int64_t>(i);
    }
    theta = Aggregate(theta, gradients, config.learning_rate);
    for (double v : theta.values) {
      if (!std::isfinite(v)) {
        throw RunError("FedSGD diverged at round " + std::to_string(round) +
                       ": theta is not finite");
      }
    }
    model.set_params(theta.values);
  }
  return trajectory;
}

void WriteCheckpoints(const std::filesystem::path& path,
                      const Trajectory& trajectory) {
  std::ofstream out(path);
  if (!out) throw RunError("cannot write '" + path.string() + "'");
  out << "# gradleak-checkpoints v1\n";
  const std::size_t p = trajectory.checkpoints.empty()
                            ? 0
                            : trajectory.checkpoints.front().theta.size();
  out << "round";
  for (std::size_t k = 0; k < p; ++k) out << ",theta_" << k;
  out << "\n" << std::setprecision(17);
  for (const Checkpoint& c : trajectory.checkpoints) {
    out << c.round;
    for (double v : c.theta.values) out << "," << v;
    out << "\n";
  }
}

Trajectory ReadCheckpoints(const std::filesystem::path& path,
                           const ParamVector& like) {
  std::ifstream in(path);
  if (!in) throw RunError("cannot read '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "# gradleak-checkpoints v1") {
    throw ParseError("'" + path.string() +
                     "' is not a v1 checkpoint file");
  }
  std::getline(in, line);  // header
  Trajectory trajectory;
  std::size_t line_number = 2;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string field;
    std::getline(row, field, ',');
    Checkpoint c;
    c.round = std::stoull(field);
    c.theta.layout = like.layout;
    while (std::getline(row, field, ',')) {
      double v = 0.0;
      auto [ptr, ec] =
          std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc()) {
        throw ParseError("checkpoint line " + std::to_string(line_number) +
                         ": bad value '" + field + "'");
      }
      c.theta.values.push_back(v);
    }
    if (c.theta.values.size() != like.size()) {
      throw ParseError("checkpoint line " + std::to_string(line_number) +
                       " has " + std::to_string(c.theta.values.size()) +
                       " values, expected " + std::to_string(like.size()));
    }
    trajectory.checkpoints.push_back(std::move(c));
  }
  return trajectory;
}

}  // namespace gradleak::fedsim

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

#include "gradleak/harness/experiments.h"

#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>

#include "gradleak/attack/deep_leakage.h"
#include "gradleak/dataio/sampling.h"
#include "gradleak/errors.h"
#include "gradleak/fedsim/fedsgd.h"
#include "gradleak/harness/stats.h"
#include "gradleak/miest/bounds.h"
#include "gradleak/ndcore/rng.h"

namespace gradleak::harness {

using ndcore::MixSeed;
using ndcore::Rng;
using ndcore::Tensor;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Point streams.
enum Stream : std::uint64_t {
  kEstimatorStream = 0,
  kCovarianceStream = 1,
  kAttackNoiseStream = 2,
};

// Run-level streams, shared by every grid point so that points differ only
// in their axis value where possible.
enum RunStream : std::uint64_t {
  kTrainingStream = 0,
  kModelInitStream = 1,
  kResampleStream = 2,
  kAttackBatchStream = 3,
  kAttackInitStream = 4,
};

std::uint64_t ValueBits(double v) {
  // 0.0 and -0.0 name the same grid point.
  return std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v);
}

double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

// Runs fn(0..n-1) on up to `workers` threads. The first exception thrown by
// any call is rethrown after all threads join.
void ParallelFor(std::size_t n, std::size_t workers,
                 const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::size_t Workers(const ExperimentConfig& config, RunOptions options) {
  return options.serial ? 1 : config.workers;
}

}  // namespace

std::uint64_t RunSeed(const ExperimentConfig& config) {
  return MixSeed(config.master_seed ^ MixSeed(ConfigHash(config)));
}

std::uint64_t PointSeed(const ExperimentConfig& config, double axis_value) {
  return MixSeed(RunSeed(config) ^ MixSeed(ValueBits(axis_value)));
}

dataio::Dataset LoadDataset(const ExperimentConfig& config) {
  return dataio::Preprocess(dataio::LoadAdult(config.dataset));
}

dataio::Dataset ProbeDataset(const ExperimentConfig& config,
                             const dataio::Dataset& base,
                             const ProbeSettings& probe) {
  if (!probe.positive_ratio) return base;
  Rng rng = Rng(RunSeed(config))
                .Split(kResampleStream)
                .Split(ValueBits(*probe.positive_ratio));
  return dataio::ResampleImbalance(base, probe.positive_ratio, base.size(),
                                   rng);
}

fedsim::TaskModel InitialModel(const ExperimentConfig& config,
                               std::size_t input_dim) {
  if (config.task.kind == fedsim::TaskKind::kLogistic) {
    return fedsim::TaskModel::Logistic(input_dim);
  }
  Rng rng = Rng(RunSeed(config)).Split(kModelInitStream);
  return fedsim::TaskModel::MlpClassifier(input_dim, config.task.hidden,
                                          config.task.classes, rng);
}

std::vector<fedsim::TaskModel> TrainToEpochs(
    const ExperimentConfig& config, const dataio::Dataset& dataset,
    std::size_t batch_size, std::span<const std::size_t> epochs) {
  fedsim::FedConfig fed = config.fed;
  fed.batch_size = batch_size;
  fed.seed = Rng(RunSeed(config)).Split(kTrainingStream).seed();
  const std::size_t rounds = fedsim::RoundsPerEpoch(dataset.size(),
                                                    batch_size);
  std::vector<std::size_t> checkpoint_rounds;
  for (std::size_t e : epochs) {
    checkpoint_rounds.push_back(fedsim::EpochStartRound(e, rounds));
  }
  const fedsim::TaskModel initial =
      InitialModel(config, dataset.num_features());
  // Every client samples from the full dataset.
  const std::vector<dataio::Dataset> clients(fed.num_clients, dataset);
  const fedsim::Trajectory trajectory =
      fedsim::RunFedSgd(fed, initial, clients, checkpoint_rounds);
  std::vector<fedsim::TaskModel> models;
  for (std::size_t r : checkpoint_rounds) {
    fedsim::TaskModel m = initial;
    m.set_params(trajectory.at_round(r).theta);
    models.push_back(std::move(m));
  }
  return models;
}

RunRecord ProbeModel(const ExperimentConfig& config,
                     const fedsim::TaskModel& model,
                     const dataio::Dataset& dataset,
                     const ProbeSettings& probe, std::uint64_t point_seed) {
  const auto start = std::chrono::steady_clock::now();
  const Rng point(point_seed);
  RunRecord record;
  record.config_hash = ConfigHash(config);

  const miest::GradientPairSource source(
      model, dataset,
      {.batch_size = probe.batch_size,
       .noise_sigma = probe.noise_sigma,
       .include_label = probe.include_label});
  miest::EstimatorConfig estimator = config.estimator;
  estimator.seed = point.Split(kEstimatorStream).seed();
  try {
    record.trace = miest::EstimateMi(source, estimator, config.statnet);
    record.mi_nats = record.trace.mi_nats();
    record.converged = record.trace.converged;
  } catch (const EstimationError& e) {
    record.mi_nats = kNaN;
    record.error = e.what();
  }

  Rng cov_rng = point.Split(kCovarianceStream);
  Tensor x, g;
  source.DrawBatches(probe.covariance_draws, cov_rng, x, g);
  record.cov_baseline = miest::CovarianceMetric(
      x.Reshaped({probe.covariance_draws, probe.batch_size * source.x_dim()}),
      g);

  if (config.run_attack) {
    // The attacked batch and the restart initializations are common to all
    // grid points; the gradient noise belongs to the point.
    const Rng run(RunSeed(config));
    Rng batch_rng = run.Split(kAttackBatchStream);
    const dataio::Batch batch =
        dataio::SampleBatch(dataset, probe.batch_size, batch_rng);
    Rng noise_rng = point.Split(kAttackNoiseStream);
    const fedsim::GradientVector target = fedsim::AddGradientNoise(
        fedsim::ComputeGradient(model, batch), probe.noise_sigma, noise_rng);
    attack::AttackConfig attack_config = config.attack;
    attack_config.seed = run.Split(kAttackInitStream).seed();
    try {
      record.epsilon = attack::RunAttack(model, target.values, batch.Labels(),
                                         attack_config)
                           .epsilon;
    } catch (const AttackError& e) {
      if (!record.error.empty()) record.error += "; ";
      record.error += e.what();
    }
  }
  record.wall_seconds = Seconds(start);
  return record;
}

RunRecord RunPoint(const ExperimentConfig& config,
                   const dataio::Dataset& base, double axis_value) {
  const ProbeSettings probe = ProbeAt(config, axis_value);
  const dataio::Dataset dataset = ProbeDataset(config, base, probe);
  const std::size_t epochs[] = {probe.epoch};
  const std::vector<fedsim::TaskModel> models =
      TrainToEpochs(config, dataset, probe.batch_size, epochs);
  RunRecord record = ProbeModel(config, models[0], dataset, probe,
                                PointSeed(config, axis_value));
  record.axis_value = axis_value;
  return record;
}

GridResult RunGrid(const ExperimentConfig& config,
                   const dataio::Dataset& base, RunOptions options) {
  config.Validate();
  if (config.kind == ExperimentKind::kConvergence) {
    throw ConfigError("RunGrid handles validate-attack and factors only");
  }
  const std::size_t n = config.grid.size();
  GridResult result;
  result.records.resize(n);

  auto record_failure = [&](std::size_t i, const Error& e) {
    RunRecord& r = result.records[i];
    r.config_hash = ConfigHash(config);
    r.axis_value = config.grid[i];
    r.mi_nats = kNaN;
    r.cov_baseline = kNaN;
    r.error = e.what();
  };

  if (config.axis == Axis::kEpoch) {
    // One training run supplies every checkpoint.
    const dataio::Dataset dataset =
        ProbeDataset(config, base, config.probe);
    std::vector<std::size_t> epochs;
    for (double v : config.grid) epochs.push_back(static_cast<std::size_t>(v));
    const std::vector<fedsim::TaskModel> models =
        TrainToEpochs(config, dataset, config.probe.batch_size, epochs);
    ParallelFor(n, Workers(config, options), [&](std::size_t i) {
      try {
        const double v = config.grid[i];
        result.records[i] = ProbeModel(config, models[i], dataset,
                                       ProbeAt(config, v),
                                       PointSeed(config, v));
        result.records[i].axis_value = v;
      } catch (const Error& e) {
        record_failure(i, e);
      }
    });
  } else {
    ParallelFor(n, Workers(config, options), [&](std::size_t i) {
      try {
        result.records[i] = RunPoint(config, base, config.grid[i]);
      } catch (const Error& e) {
        record_failure(i, e);
      }
    });
  }

  std::vector<double> mi, cov, eps;
  bool all_eps = true;
  for (const RunRecord& r : result.records) {
    mi.push_back(r.mi_nats);
    cov.push_back(r.cov_baseline);
    all_eps = all_eps && r.epsilon.has_value();
    eps.push_back(r.epsilon.value_or(kNaN));
  }
  result.spearman_mi = Spearman(config.grid, mi);
  result.spearman_cov = Spearman(config.grid, cov);
  if (all_eps) result.spearman_epsilon = Spearman(config.grid, eps);
  return result;
}

std::vector<ConvergenceCell> RunConvergence(const ExperimentConfig& config,
                                            const dataio::Dataset& base,
                                            RunOptions options) {
  config.Validate();
  if (config.kind != ExperimentKind::kConvergence) {
    throw ConfigError("RunConvergence needs a convergence config");
  }
  std::vector<ConvergenceCell> cells;
  for (double b : config.grid) {
    for (miest::StatNetKind v : config.variants) {
      ConvergenceCell cell;
      cell.variant = v;
      cell.batch_size = static_cast<std::size_t>(b);
      cells.push_back(std::move(cell));
    }
  }
  ParallelFor(cells.size(), Workers(config, options), [&](std::size_t i) {
    ConvergenceCell& cell = cells[i];
    const auto start = std::chrono::steady_clock::now();
    try {
      ProbeSettings probe = config.probe;
      probe.batch_size = cell.batch_size;
      const dataio::Dataset dataset = ProbeDataset(config, base, probe);
      const std::size_t epochs[] = {probe.epoch};
      const std::vector<fedsim::TaskModel> models =
          TrainToEpochs(config, dataset, probe.batch_size, epochs);
      const miest::GradientPairSource source(
          models[0], dataset,
          {.batch_size = probe.batch_size,
           .noise_sigma = probe.noise_sigma,
           .include_label = probe.include_label});
      miest::EstimatorConfig estimator = config.estimator;
      estimator.seed =
          Rng(PointSeed(config, static_cast<double>(cell.batch_size)))
              .Split(static_cast<std::uint64_t>(cell.variant))
              .seed();
      miest::StatNetSpec spec = config.statnet;
      spec.kind = cell.variant;
      cell.trace = miest::EstimateMi(source, estimator, spec);
    } catch (const Error& e) {
      cell.error = e.what();
    }
    cell.wall_seconds = Seconds(start);
  });
  return cells;
}

PrealarmDecision RiskPrealarm(const miest::PairSource& source,
                              double threshold,
                              const miest::EstimatorConfig& estimator,
                              const miest::StatNetSpec& spec) {
  if (!(threshold >= 0.0)) {
    throw ContractError("pre-alarm threshold must be >= 0 nats");
  }
  PrealarmDecision d;
  try {
    const miest::MiTrace trace = miest::EstimateMi(source, estimator, spec);
    d.estimate = trace.mi_nats();
    d.converged = trace.converged;
    std::ostringstream reason;
    if (!trace.converged) {
      reason << "estimator did not converge in " << trace.iterations()
             << " iterations";
      d.publish = false;
    } else {
      d.publish = d.estimate < threshold;
      reason << "estimate " << d.estimate << " nats "
             << (d.publish ? "below" : "at or above") << " threshold "
             << threshold;
    }
    d.reason = reason.str();
  } catch (const EstimationError& e) {
    d.estimate = kNaN;
    d.publish = false;
    d.reason = e.what();
  }
  return d;
}

PrealarmDecision RiskPrealarm(const ExperimentConfig& config,
                              const dataio::Dataset& base, double threshold) {
  config.Validate();
  const dataio::Dataset dataset = ProbeDataset(config, base, config.probe);
  const std::size_t epochs[] = {config.probe.epoch};
  const std::vector<fedsim::TaskModel> models =
      TrainToEpochs(config, dataset, config.probe.batch_size, epochs);
  const miest::GradientPairSource source(
      models[0], dataset,
      {.batch_size = config.probe.batch_size,
       .noise_sigma = config.probe.noise_sigma,
       .include_label = config.probe.include_label});
  miest::EstimatorConfig estimator = config.estimator;
  estimator.seed =
      Rng(PointSeed(config, 0.0)).Split(kEstimatorStream).seed();
  return RiskPrealarm(source, threshold, estimator, config.statnet);
}

namespace {

std::ofstream OpenCsv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RunError("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  return out;
}

void WriteGridColumns(std::ostream& out, const RunRecord& r) {
  out << r.axis_value << "," << r.mi_nats << "," << r.cov_baseline << ",";
  if (r.epsilon) out << *r.epsilon;
  out << "," << (r.converged ? 1 : 0);
}

std::string CsvField(std::string text) {
  for (char& c : text) {
    if (c == '"' || c == '\n') c = '\'';
  }
  return "\"" + text + "\"";
}

}  // namespace

void WriteGrid(const std::filesystem::path& path,
               std::span<const RunRecord> records) {
  std::ofstream out = OpenCsv(path);
  out << "axis_value,mi_nats,cov_baseline,epsilon,converged\n";
  for (const RunRecord& r : records) {
    WriteGridColumns(out, r);
    out << "\n";
  }
}

void WriteRecords(const std::filesystem::path& path,
                  std::span<const RunRecord> records) {
  std::ofstream out = OpenCsv(path);
  out << "axis_value,mi_nats,cov_baseline,epsilon,converged,config_hash,"
         "wall_seconds,error\n";
  for (const RunRecord& r : records) {
    WriteGridColumns(out, r);
    out << "," << std::hex << std::setw(16) << std::setfill('0')
        << r.config_hash << std::dec << std::setfill(' ') << ","
        << r.wall_seconds << "," << CsvField(r.error) << "\n";
  }
}

void WriteConvergenceSummary(const std::filesystem::path& path,
                             std::span<const ConvergenceCell> cells) {
  std::ofstream out = OpenCsv(path);
  out << "variant,batch_size,converged,final_nats,iterations,max_abs,error\n";
  for (const ConvergenceCell& c : cells) {
    out << miest::StatNetKindName(c.variant) << "," << c.batch_size << ","
        << (c.trace.converged ? 1 : 0) << ","
        << (c.error.empty() ? c.trace.mi_nats() : kNaN) << ","
        << c.trace.iterations() << "," << c.trace.max_abs << ","
        << CsvField(c.error) << "\n";
  }
}

}  // namespace gradleak::harness

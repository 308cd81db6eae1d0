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

#ifndef GRADLEAK_MIEST_ESTIMATOR_H_
#define GRADLEAK_MIEST_ESTIMATOR_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "gradleak/miest/pair_source.h"
#include "gradleak/miest/statnet.h"

namespace gradleak::miest {

struct EstimatorConfig {
  std::size_t sample_size = 64;  // S
  std::size_t max_iterations = 20000;
  // Convergence is first tested once this many iterations have run.
  std::size_t min_iterations = 2000;
  std::size_t window = 1000;
  double tolerance = 0.02;
  // How often (in iterations) convergence is tested.
  std::size_t check_every = 100;
  double smoothing = 0.99;  // EMA factor for the reported estimate
  double learning_rate = 5e-5;
  std::uint64_t seed = 0;
  // Biased-gradient correction with a moving average of mean(exp(T)).
  bool moving_average_correction = false;
  double moving_average_rate = 0.01;
  // Consecutive non-finite iterations tolerated before giving up.
  std::size_t nan_patience = 50;

  // Throws ContractError on S < 2, window < 1 or other invalid values.
  void Validate() const;
};

struct ConvergenceResult {
  bool converged = false;
  double estimate = 0.0;  // mean of the window (meaningful if converged)
};

// Converged iff the last `window` values hold no NaN and their standard
// deviation is below `tolerance`. Throws ContractError if the trace is shorter
// than `window`.
ConvergenceResult CheckConvergence(std::span<const double> smoothed,
                                   std::size_t window, double tolerance);

struct MiTrace {
  std::vector<double> raw;       // V per iteration, NaN if not finite
  std::vector<double> smoothed;  // EMA of the finite raw values
  bool converged = false;
  std::optional<double> final_estimate;  // present iff converged
  std::size_t nan_count = 0;
  double max_abs = 0.0;

  std::size_t iterations() const { return raw.size(); }
  // final_estimate if converged, otherwise the last smoothed value.
  double mi_nats() const;
};

// Trains a statistic network on `source` by Adam ascent of the DV bound and
// returns the trace. Each iteration draws S joint and S marginal pairs.
// Throws EstimationError if V stays non-finite for nan_patience iterations.
MiTrace EstimateMi(const PairSource& source, const EstimatorConfig& config,
                   StatNetSpec spec);

// CSV "iteration,v_raw,v_smoothed" then "# converged=<0|1> final_nats=<x>".
void WriteTrace(const std::filesystem::path& path, const MiTrace& trace);

}  // namespace gradleak::miest

#endif  // GRADLEAK_MIEST_ESTIMATOR_H_

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

#include "gradleak/miest/estimator.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <string>

#include "gradleak/errors.h"
#include "gradleak/ndcore/adam.h"
#include "gradleak/ndcore/graph.h"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace gradleak::miest {

using ndcore::Graph;
using ndcore::Tensor;
using ndcore::Var;

void EstimatorConfig::Validate() const {
  if (sample_size < 2) throw ContractError("sample size S must be >= 2");
  if (max_iterations < 1) throw ContractError("max iterations must be >= 1");
  if (window < 1) throw ContractError("convergence window must be >= 1");
  if (check_every < 1) throw ContractError("check interval must be >= 1");
  if (!(tolerance > 0.0)) throw ContractError("tolerance must be > 0");
  if (!(smoothing >= 0.0 && smoothing < 1.0)) {
    throw ContractError("smoothing factor must be in [0, 1)");
  }
  if (!(learning_rate > 0.0)) throw ContractError("learning rate must be > 0");
  if (!(moving_average_rate > 0.0 && moving_average_rate <= 1.0)) {
    throw ContractError("moving-average rate must be in (0, 1]");
  }
}

ConvergenceResult CheckConvergence(std::span<const double> smoothed,
                                   std::size_t window, double tolerance) {
  if (window < 1 || smoothed.size() < window) {
    throw ContractError("trace of length " + std::to_string(smoothed.size()) +
                        " is shorter than the window " +
                        std::to_string(window));
  }
  const std::span<const double> tail = smoothed.last(window);
  double mean = 0.0;
  for (double v : tail) {
    if (!std::isfinite(v)) return {};
    mean += v;
  }
  mean /= static_cast<double>(window);
  double var = 0.0;
  for (double v : tail) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(window));
  return {sd < tolerance, mean};
}

double MiTrace::mi_nats() const {
  if (final_estimate) return *final_estimate;
  return smoothed.empty() ? std::numeric_limits<double>::quiet_NaN()
                          : smoothed.back();
}

namespace {

// Every iteration allocates and frees the same set of large tensors. Keeping
// them on the heap instead of fresh mmap pages avoids a page-fault storm.
void KeepLargeBlocksOnHeap() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
  });
#endif
}

Tensor StackRows(const Tensor& top, const Tensor& bottom) {
  std::vector<double> data = top.vector();
  data.insert(data.end(), bottom.values().begin(), bottom.values().end());
  return Tensor({top.rows() + bottom.rows(), top.cols()}, std::move(data));
}

}  // namespace

MiTrace EstimateMi(const PairSource& source, const EstimatorConfig& config,
                   StatNetSpec spec) {
  config.Validate();
  KeepLargeBlocksOnHeap();
  spec.batch_size = source.batch_size();
  spec.x_dim = source.x_dim();
  spec.g_dim = source.g_dim();
  ndcore::Rng root(config.seed);
  ndcore::Rng init_rng = root.Split(0);
  ndcore::Rng data_rng = root.Split(1);
  StatNet net = StatNet::Create(spec, init_rng);
  std::vector<Tensor*> params = net.MutableParameters();
  ndcore::AdamState adam({.learning_rate = config.learning_rate},
                         net.Parameters());

  MiTrace trace;
  trace.raw.reserve(config.max_iterations);
  trace.smoothed.reserve(config.max_iterations);
  double smoothed = std::numeric_limits<double>::quiet_NaN();
  double moving_average = std::numeric_limits<double>::quiet_NaN();
  std::size_t nan_run = 0;
  const double s = static_cast<double>(config.sample_size);

  std::vector<Tensor> grads(params.size());
  std::vector<Tensor> values(params.size());
  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    const PairDraw draw = source.Draw(config.sample_size, data_rng);
    const Tensor stacked_x = StackRows(draw.x, draw.x);
    const Tensor stacked_g = StackRows(draw.joint, draw.marginal);
    double v = std::numeric_limits<double>::quiet_NaN();
    bool stepped = false;
    try {
      Graph graph;
      const std::vector<Var> bound = net.Bind(graph);
      // Joint and marginal pairs share X_B, so both go through one pass.
      Var scores = net.Scores(graph, bound, stacked_x, stacked_g);
      Var joint = ndcore::SliceRows(scores, 0, config.sample_size);
      Var marginal =
          ndcore::SliceRows(scores, config.sample_size, config.sample_size);
      Var joint_mean = ndcore::Mean(joint);
      Var bound_value = ndcore::Sub(joint_mean, ndcore::LogMeanExp(marginal));
      v = bound_value.value().item();
      Var objective = bound_value;
      if (config.moving_average_correction) {
        // Replace grad log E[e^T] by grad E[e^T] / ma.
        const Tensor& m = marginal.value();
        double top = -INFINITY;
        for (double t : m.values()) top = std::max(top, t);
        double mean_exp = 0.0;
        for (double t : m.values()) mean_exp += std::exp(t - top);
        mean_exp = mean_exp / s;  // scaled by exp(-top)
        const double current = std::log(mean_exp) + top;
        moving_average =
            std::isnan(moving_average)
                ? current
                : std::log((1 - config.moving_average_rate) *
                               std::exp(moving_average - current) +
                           config.moving_average_rate) +
                      current;
        Var shifted = ndcore::Exp(ndcore::Sub(
            marginal, graph.Constant(Tensor(m.shape(), moving_average))));
        objective = ndcore::Sub(joint_mean, ndcore::Mean(shifted));
      }
      graph.Backward(objective);
      for (std::size_t p = 0; p < params.size(); ++p) {
        grads[p] = graph.grad(bound[p]);
      }
      for (std::size_t p = 0; p < params.size(); ++p) {
        values[p] = std::move(*params[p]);
      }
      try {
        adam.Step(values, grads, ndcore::Direction::kAscent);
      } catch (...) {
        for (std::size_t p = 0; p < params.size(); ++p) {
          *params[p] = std::move(values[p]);
        }
        throw;
      }
      for (std::size_t p = 0; p < params.size(); ++p) {
        *params[p] = std::move(values[p]);
      }
      stepped = true;
    } catch (const NumericError&) {
      stepped = false;
    }
    if (!stepped || !std::isfinite(v)) {
      ++trace.nan_count;
      if (++nan_run >= config.nan_patience) {
        throw EstimationError(
            "DV bound not finite for " + std::to_string(nan_run) +
            " consecutive iterations (iteration " + std::to_string(it) +
            ", " + std::to_string(trace.nan_count) + " non-finite in total)");
      }
      trace.raw.push_back(std::numeric_limits<double>::quiet_NaN());
      trace.smoothed.push_back(smoothed);
      continue;
    }
    nan_run = 0;
    trace.max_abs = std::max(trace.max_abs, std::abs(v));
    smoothed = std::isnan(smoothed)
                   ? v
                   : config.smoothing * smoothed + (1 - config.smoothing) * v;
    trace.raw.push_back(v);
    trace.smoothed.push_back(smoothed);

    const std::size_t done = it + 1;
    if (done >= std::max(config.min_iterations, config.window) &&
        done % config.check_every == 0) {
      const ConvergenceResult result =
          CheckConvergence(trace.smoothed, config.window, config.tolerance);
      if (result.converged) {
        trace.converged = true;
        trace.final_estimate = result.estimate;
        break;
      }
    }
  }
  return trace;
}

void WriteTrace(const std::filesystem::path& path, const MiTrace& trace) {
  std::ofstream out(path);
  if (!out) throw RunError("cannot write '" + path.string() + "'");
  out << "iteration,v_raw,v_smoothed\n" << std::setprecision(17);
  for (std::size_t i = 0; i < trace.raw.size(); ++i) {
    out << i << "," << trace.raw[i] << "," << trace.smoothed[i] << "\n";
  }
  out << "# converged=" << (trace.converged ? 1 : 0)
      << " final_nats=" << trace.mi_nats() << "\n";
}

}  // namespace gradleak::miest

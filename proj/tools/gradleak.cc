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

// Command-line runner for the leakage experiments.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gradleak/errors.h"
#include "gradleak/harness/config.h"
#include "gradleak/harness/experiments.h"
#include "gradleak/miest/estimator.h"
#include "gradleak/miest/pair_source.h"

namespace {

using gradleak::harness::ExperimentConfig;

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> workers;
  bool serial = false;
};

ExperimentConfig LoadWithOverrides(const GlobalFlags& flags) {
  ExperimentConfig config =
      flags.config_path.empty()
          ? ExperimentConfig{}
          : gradleak::harness::LoadConfig(flags.config_path);
  if (flags.seed) config.master_seed = *flags.seed;
  if (flags.out_dir) config.out_dir = *flags.out_dir;
  if (flags.workers) config.workers = *flags.workers;
  config.Validate();
  return config;
}

void PrepareOutDir(const ExperimentConfig& config) {
  std::filesystem::create_directories(config.out_dir);
  std::ofstream out(config.out_dir / "config.json");
  out << gradleak::harness::ConfigToJson(config) << "\n";
}

// Shortest default rendering: 1 rather than 1.000000.
std::string Compact(double value) {
  std::ostringstream out;
  out << value;
  return out.str();
}

std::string Correlation(const std::optional<double>& value) {
  return value ? std::to_string(*value) : "undefined";
}

void RunGridCommand(const GlobalFlags& flags,
                    gradleak::harness::ExperimentKind kind) {
  const ExperimentConfig config = LoadWithOverrides(flags);
  if (config.kind != kind) {
    throw gradleak::ConfigError(
        "config describes a '" +
        std::string(gradleak::harness::ExperimentKindName(config.kind)) +
        "' experiment");
  }
  PrepareOutDir(config);
  const gradleak::dataio::Dataset base =
      gradleak::harness::LoadDataset(config);
  const gradleak::harness::GridResult result =
      gradleak::harness::RunGrid(config, base, {.serial = flags.serial});
  gradleak::harness::WriteGrid(config.out_dir / "grid.csv", result.records);
  gradleak::harness::WriteRecords(config.out_dir / "records.csv",
                                  result.records);
  for (const auto& r : result.records) {
    const std::string name = "trace_" +
                             std::string(AxisName(config.axis)) + "_" +
                             Compact(r.axis_value) + ".csv";
    if (r.trace.iterations() > 0) {
      gradleak::miest::WriteTrace(config.out_dir / name, r.trace);
    }
    std::cout << AxisName(config.axis) << "=" << r.axis_value
              << " mi_nats=" << r.mi_nats << " cov=" << r.cov_baseline
              << " epsilon="
              << (r.epsilon ? std::to_string(*r.epsilon) : "missing")
              << " converged=" << r.converged
              << (r.error.empty() ? "" : " error=" + r.error) << "\n";
  }
  std::ofstream summary(config.out_dir / "summary.csv");
  summary << "statistic,value\n"
          << "spearman_axis_mi," << Correlation(result.spearman_mi) << "\n"
          << "spearman_axis_epsilon," << Correlation(result.spearman_epsilon)
          << "\n"
          << "spearman_axis_cov," << Correlation(result.spearman_cov) << "\n";
  std::cout << "spearman(axis, mi)=" << Correlation(result.spearman_mi)
            << " spearman(axis, epsilon)="
            << Correlation(result.spearman_epsilon) << "\n";
}

void RunConvergenceCommand(const GlobalFlags& flags) {
  const ExperimentConfig config = LoadWithOverrides(flags);
  if (config.kind != gradleak::harness::ExperimentKind::kConvergence) {
    throw gradleak::ConfigError("config is not a convergence experiment");
  }
  PrepareOutDir(config);
  const gradleak::dataio::Dataset base =
      gradleak::harness::LoadDataset(config);
  const auto cells =
      gradleak::harness::RunConvergence(config, base, {.serial = flags.serial});
  gradleak::harness::WriteConvergenceSummary(config.out_dir / "summary.csv",
                                             cells);
  for (const auto& c : cells) {
    const std::string variant(gradleak::miest::StatNetKindName(c.variant));
    if (c.error.empty()) {
      gradleak::miest::WriteTrace(config.out_dir /
                                      ("trace_" + variant + "_B" +
                                       std::to_string(c.batch_size) + ".csv"),
                                  c.trace);
    }
    std::cout << variant << " B=" << c.batch_size
              << " converged=" << c.trace.converged
              << " final_nats=" << c.trace.mi_nats()
              << " iterations=" << c.trace.iterations()
              << (c.error.empty() ? "" : " error=" + c.error) << "\n";
  }
}

void RunEstimateCommand(const GlobalFlags& flags,
                        std::optional<double> gaussian_rho,
                        std::size_t gaussian_dim) {
  ExperimentConfig config = LoadWithOverrides(flags);
  std::filesystem::create_directories(config.out_dir);
  gradleak::miest::MiTrace trace;
  if (gaussian_rho) {
    const gradleak::miest::GaussianPairSource source(gaussian_dim,
                                                     *gaussian_rho);
    gradleak::miest::EstimatorConfig estimator = config.estimator;
    estimator.seed = gradleak::harness::PointSeed(config, *gaussian_rho);
    trace = gradleak::miest::EstimateMi(source, estimator, config.statnet);
    std::cout << "analytic_nats=" << source.AnalyticMi() << "\n";
  } else {
    const gradleak::dataio::Dataset base =
        gradleak::harness::LoadDataset(config);
    config.run_attack = false;
    config.kind = gradleak::harness::ExperimentKind::kFactors;
    config.axis = gradleak::harness::Axis::kEpoch;
    config.grid = {static_cast<double>(config.probe.epoch)};
    trace = gradleak::harness::RunPoint(config, base, config.grid[0]).trace;
  }
  gradleak::miest::WriteTrace(config.out_dir / "trace.csv", trace);
  std::cout << "converged=" << trace.converged
            << " mi_nats=" << trace.mi_nats()
            << " iterations=" << trace.iterations() << "\n";
}

void RunPrealarmCommand(const GlobalFlags& flags, double threshold) {
  const ExperimentConfig config = LoadWithOverrides(flags);
  const gradleak::dataio::Dataset base =
      gradleak::harness::LoadDataset(config);
  const gradleak::harness::PrealarmDecision d =
      gradleak::harness::RiskPrealarm(config, base, threshold);
  std::cout << "decision=" << (d.publish ? "publish" : "withhold")
            << " estimate_nats=" << d.estimate
            << " converged=" << d.converged << " reason=\"" << d.reason
            << "\"\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient leakage risk experiments"};
  app.require_subcommand(1);
  GlobalFlags flags;
  app.add_option("--config", flags.config_path, "JSON experiment config")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", flags.seed, "Master seed override");
  app.add_option("--out-dir", flags.out_dir, "Output directory override");
  app.add_option("--workers", flags.workers, "Parallel grid points")
      ->check(CLI::PositiveNumber);
  app.add_flag("--serial", flags.serial, "Run grid points one at a time");

  CLI::App* estimate = app.add_subcommand(
      "estimate", "Estimate MI for one probe (or a Gaussian oracle)");
  std::optional<double> gaussian_rho;
  std::size_t gaussian_dim = 1;
  estimate->add_option("--gaussian-rho", gaussian_rho,
                       "Use correlated Gaussian pairs instead of Adult");
  estimate->add_option("--gaussian-dim", gaussian_dim, "Gaussian dimension");
  CLI::App* convergence =
      app.add_subcommand("convergence", "H-MINE vs flat network traces");
  CLI::App* validate =
      app.add_subcommand("validate-attack", "MI vs attack inference error");
  CLI::App* factors =
      app.add_subcommand("factors", "MI over epochs or class imbalance");
  CLI::App* prealarm =
      app.add_subcommand("prealarm", "Publish-or-withhold decision");
  double threshold = 0.0;
  prealarm->add_option("--threshold", threshold, "Withhold at or above (nats)")
      ->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (estimate->parsed()) {
      RunEstimateCommand(flags, gaussian_rho, gaussian_dim);
    } else if (convergence->parsed()) {
      RunConvergenceCommand(flags);
    } else if (validate->parsed()) {
      RunGridCommand(flags, gradleak::harness::ExperimentKind::kValidateAttack);
    } else if (factors->parsed()) {
      RunGridCommand(flags, gradleak::harness::ExperimentKind::kFactors);
    } else if (prealarm->parsed()) {
      RunPrealarmCommand(flags, threshold);
    }
  } catch (const gradleak::Error& e) {
    std::cerr << "error: "
              << nlohmann::json{{"kind", e.kind()}, {"message", e.what()}}.dump()
              << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: "
              << nlohmann::json{{"kind", "internal"}, {"message", e.what()}}
                     .dump()
              << "\n";
    return 1;
  }
  return 0;
}

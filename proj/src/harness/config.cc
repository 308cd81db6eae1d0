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

#include "gradleak/harness/config.h"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gradleak/errors.h"

namespace gradleak::harness {

using nlohmann::json;

std::string_view ExperimentKindName(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kConvergence:
      return "convergence";
    case ExperimentKind::kValidateAttack:
      return "validate-attack";
    case ExperimentKind::kFactors:
      return "factors";
  }
  return "?";
}

ExperimentKind ParseExperimentKind(std::string_view name) {
  for (ExperimentKind k :
       {ExperimentKind::kConvergence, ExperimentKind::kValidateAttack,
        ExperimentKind::kFactors}) {
    if (ExperimentKindName(k) == name) return k;
  }
  throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

std::string_view AxisName(Axis axis) {
  switch (axis) {
    case Axis::kBatchSize:
      return "batch_size";
    case Axis::kNoise:
      return "noise";
    case Axis::kEpoch:
      return "epoch";
    case Axis::kImbalance:
      return "imbalance";
  }
  return "?";
}

Axis ParseAxis(std::string_view name) {
  for (Axis a : {Axis::kBatchSize, Axis::kNoise, Axis::kEpoch,
                 Axis::kImbalance}) {
    if (AxisName(a) == name) return a;
  }
  throw ConfigError("unknown axis '" + std::string(name) + "'");
}

namespace {

bool IsPositiveInteger(double v) {
  return v >= 1.0 && v == std::floor(v) && v < 1e9;
}

void CheckAxisValue(Axis axis, double v) {
  const std::string text = std::to_string(v);
  switch (axis) {
    case Axis::kBatchSize:
      if (!IsPositiveInteger(v)) {
        throw ConfigError("batch-size grid value " + text +
                          " is not a positive integer");
      }
      return;
    case Axis::kEpoch:
      if (!IsPositiveInteger(v)) {
        throw ConfigError("epoch grid value " + text +
                          " is not a positive integer");
      }
      return;
    case Axis::kNoise:
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw ConfigError("noise grid value " + text + " must be >= 0");
      }
      return;
    case Axis::kImbalance:
      if (!(v > 0.0 && v < 1.0)) {
        throw ConfigError("imbalance grid value " + text +
                          " must lie in (0, 1)");
      }
      return;
  }
}

}  // namespace

void ExperimentConfig::Validate() const {
  if (grid.empty()) throw ConfigError("grid must not be empty");
  bool axis_ok = false;
  switch (kind) {
    case ExperimentKind::kConvergence:
      axis_ok = axis == Axis::kBatchSize;
      if (variants.empty()) {
        throw ConfigError("convergence needs at least one variant");
      }
      break;
    case ExperimentKind::kValidateAttack:
      axis_ok = axis == Axis::kBatchSize || axis == Axis::kNoise;
      break;
    case ExperimentKind::kFactors:
      axis_ok = axis == Axis::kEpoch || axis == Axis::kImbalance;
      break;
  }
  if (!axis_ok) {
    throw ConfigError("axis '" + std::string(AxisName(axis)) +
                      "' is not valid for experiment '" +
                      std::string(ExperimentKindName(kind)) + "'");
  }
  for (double v : grid) CheckAxisValue(axis, v);
  if (probe.batch_size < 1) throw ConfigError("probe batch size must be >= 1");
  if (probe.epoch < 1) throw ConfigError("probe epoch must be >= 1");
  if (!(probe.noise_sigma >= 0.0)) {
    throw ConfigError("probe noise sigma must be >= 0");
  }
  if (probe.positive_ratio &&
      !(*probe.positive_ratio > 0.0 && *probe.positive_ratio < 1.0)) {
    throw ConfigError("positive ratio must lie in (0, 1)");
  }
  if (probe.covariance_draws < 2) {
    throw ConfigError("covariance baseline needs >= 2 draws");
  }
  if (task.kind == fedsim::TaskKind::kMlp && task.classes < 2) {
    throw ConfigError("MLP task needs >= 2 classes");
  }
  if (workers < 1) throw ConfigError("workers must be >= 1");
  try {
    fed.Validate();
    estimator.Validate();
    attack.Validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
}

ProbeSettings ProbeAt(const ExperimentConfig& config, double axis_value) {
  ProbeSettings p = config.probe;
  switch (config.axis) {
    case Axis::kBatchSize:
      p.batch_size = static_cast<std::size_t>(axis_value);
      break;
    case Axis::kNoise:
      p.noise_sigma = axis_value;
      break;
    case Axis::kEpoch:
      p.epoch = static_cast<std::size_t>(axis_value);
      break;
    case Axis::kImbalance:
      p.positive_ratio = axis_value;
      break;
  }
  return p;
}

namespace {

// Reads members of one JSON object and rejects keys that were never read.
class ObjectReader {
 public:
  ObjectReader(const json& object, std::string where)
      : object_(object), where_(std::move(where)) {
    if (!object_.is_object()) {
      throw ConfigError(where_ + " must be a JSON object");
    }
  }

  template <typename T>
  void Read(const char* key, T& out) {
    seen_.insert(key);
    auto it = object_.find(key);
    if (it == object_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* Child(const char* key) {
    seen_.insert(key);
    auto it = object_.find(key);
    return it == object_.end() ? nullptr : &*it;
  }

  void Finish() const {
    for (auto it = object_.begin(); it != object_.end(); ++it) {
      if (!seen_.contains(it.key())) {
        throw ConfigError("unknown key '" + where_ + "." + it.key() + "'");
      }
    }
  }

 private:
  const json& object_;
  std::string where_;
  std::set<std::string> seen_;
};

template <typename Fn>
auto Wrap(Fn fn) {
  try {
    return fn();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
}

void ReadTask(const json& j, TaskSpec& task) {
  ObjectReader r(j, "task");
  std::string model(fedsim::TaskKindName(task.kind));
  r.Read("model", model);
  task.kind = Wrap([&] { return fedsim::ParseTaskKind(model); });
  r.Read("hidden", task.hidden);
  r.Read("classes", task.classes);
  r.Finish();
}

void ReadProbe(const json& j, ProbeSettings& p) {
  ObjectReader r(j, "probe");
  r.Read("batch_size", p.batch_size);
  r.Read("noise_sigma", p.noise_sigma);
  r.Read("epoch", p.epoch);
  if (const json* ratio = r.Child("positive_ratio")) {
    if (ratio->is_null()) {
      p.positive_ratio.reset();
    } else if (ratio->is_number()) {
      p.positive_ratio = ratio->get<double>();
    } else {
      throw ConfigError("probe.positive_ratio must be a number or null");
    }
  }
  r.Read("include_label", p.include_label);
  r.Read("covariance_draws", p.covariance_draws);
  r.Finish();
}

void ReadFed(const json& j, fedsim::FedConfig& fed) {
  ObjectReader r(j, "fed");
  r.Read("clients", fed.num_clients);
  r.Read("learning_rate", fed.learning_rate);
  r.Read("noise_sigma", fed.noise_sigma);
  r.Finish();
}

void ReadEstimator(const json& j, miest::EstimatorConfig& e) {
  ObjectReader r(j, "estimator");
  r.Read("sample_size", e.sample_size);
  r.Read("max_iterations", e.max_iterations);
  r.Read("min_iterations", e.min_iterations);
  r.Read("window", e.window);
  r.Read("tolerance", e.tolerance);
  r.Read("check_every", e.check_every);
  r.Read("smoothing", e.smoothing);
  r.Read("learning_rate", e.learning_rate);
  r.Read("moving_average_correction", e.moving_average_correction);
  r.Read("moving_average_rate", e.moving_average_rate);
  r.Read("nan_patience", e.nan_patience);
  r.Finish();
}

void ReadStatNet(const json& j, miest::StatNetSpec& s) {
  ObjectReader r(j, "statnet");
  std::string kind(miest::StatNetKindName(s.kind));
  r.Read("kind", kind);
  s.kind = Wrap([&] { return miest::ParseStatNetKind(kind); });
  r.Read("block_widths", s.block_widths);
  r.Read("mix_widths", s.mix_widths);
  r.Read("flat_widths", s.flat_widths);
  r.Read("mix_uses_gradient", s.mix_uses_gradient);
  std::string activation(ndcore::ActivationName(s.activation));
  r.Read("activation", activation);
  s.activation = Wrap([&] { return ndcore::ParseActivation(activation); });
  r.Finish();
}

void ReadAttack(const json& j, attack::AttackConfig& a) {
  ObjectReader r(j, "attack");
  r.Read("restarts", a.restarts);
  r.Read("iterations", a.iterations);
  r.Read("learning_rate", a.learning_rate);
  r.Read("reuse_seed", a.reuse_seed);
  r.Finish();
}

json ToJson(const ExperimentConfig& c, bool with_run_fields) {
  json j;
  j["experiment"] = ExperimentKindName(c.kind);
  j["axis"] = AxisName(c.axis);
  j["grid"] = c.grid;
  std::vector<std::string> variants;
  for (miest::StatNetKind v : c.variants) {
    variants.emplace_back(miest::StatNetKindName(v));
  }
  j["variants"] = variants;
  j["task"] = {{"model", fedsim::TaskKindName(c.task.kind)},
               {"hidden", c.task.hidden},
               {"classes", c.task.classes}};
  j["probe"] = {{"batch_size", c.probe.batch_size},
                {"noise_sigma", c.probe.noise_sigma},
                {"epoch", c.probe.epoch},
                {"positive_ratio", c.probe.positive_ratio
                                       ? json(*c.probe.positive_ratio)
                                       : json(nullptr)},
                {"include_label", c.probe.include_label},
                {"covariance_draws", c.probe.covariance_draws}};
  j["fed"] = {{"clients", c.fed.num_clients},
              {"learning_rate", c.fed.learning_rate},
              {"noise_sigma", c.fed.noise_sigma}};
  const miest::EstimatorConfig& e = c.estimator;
  j["estimator"] = {{"sample_size", e.sample_size},
                    {"max_iterations", e.max_iterations},
                    {"min_iterations", e.min_iterations},
                    {"window", e.window},
                    {"tolerance", e.tolerance},
                    {"check_every", e.check_every},
                    {"smoothing", e.smoothing},
                    {"learning_rate", e.learning_rate},
                    {"moving_average_correction", e.moving_average_correction},
                    {"moving_average_rate", e.moving_average_rate},
                    {"nan_patience", e.nan_patience}};
  j["statnet"] = {{"kind", miest::StatNetKindName(c.statnet.kind)},
                  {"block_widths", c.statnet.block_widths},
                  {"mix_widths", c.statnet.mix_widths},
                  {"flat_widths", c.statnet.flat_widths},
                  {"mix_uses_gradient", c.statnet.mix_uses_gradient},
                  {"activation", ndcore::ActivationName(c.statnet.activation)}};
  j["attack"] = {{"restarts", c.attack.restarts},
                 {"iterations", c.attack.iterations},
                 {"learning_rate", c.attack.learning_rate},
                 {"reuse_seed", c.attack.reuse_seed}};
  j["run_attack"] = c.run_attack;
  j["dataset"] = c.dataset.string();
  j["master_seed"] = c.master_seed;
  if (with_run_fields) {
    j["out_dir"] = c.out_dir.string();
    j["workers"] = c.workers;
  }
  return j;
}

}  // namespace

ExperimentConfig ParseConfig(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  ExperimentConfig c;
  ObjectReader r(j, "config");
  std::string kind(ExperimentKindName(c.kind));
  r.Read("experiment", kind);
  c.kind = ParseExperimentKind(kind);
  std::string axis(AxisName(c.axis));
  r.Read("axis", axis);
  c.axis = ParseAxis(axis);
  r.Read("grid", c.grid);
  std::vector<std::string> variants;
  for (miest::StatNetKind v : c.variants) {
    variants.emplace_back(miest::StatNetKindName(v));
  }
  r.Read("variants", variants);
  c.variants.clear();
  for (const std::string& v : variants) {
    c.variants.push_back(Wrap([&] { return miest::ParseStatNetKind(v); }));
  }
  if (const json* t = r.Child("task")) ReadTask(*t, c.task);
  if (const json* p = r.Child("probe")) ReadProbe(*p, c.probe);
  if (const json* f = r.Child("fed")) ReadFed(*f, c.fed);
  if (const json* e = r.Child("estimator")) ReadEstimator(*e, c.estimator);
  if (const json* s = r.Child("statnet")) ReadStatNet(*s, c.statnet);
  if (const json* a = r.Child("attack")) ReadAttack(*a, c.attack);
  r.Read("run_attack", c.run_attack);
  std::string dataset = c.dataset.string();
  r.Read("dataset", dataset);
  c.dataset = dataset;
  std::string out_dir = c.out_dir.string();
  r.Read("out_dir", out_dir);
  c.out_dir = out_dir;
  r.Read("master_seed", c.master_seed);
  r.Read("workers", c.workers);
  r.Finish();
  c.Validate();
  return c;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream text;
  text << in.rdbuf();
  return ParseConfig(text.str());
}

std::string ConfigToJson(const ExperimentConfig& config) {
  return ToJson(config, true).dump(2);
}

std::uint64_t ConfigHash(const ExperimentConfig& config) {
  // nlohmann::json orders object keys, so the dump is canonical.
  const std::string text = ToJson(config, false).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace gradleak::harness

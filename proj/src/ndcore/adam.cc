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

#include "gradleak/ndcore/adam.h"

#include <cmath>
#include <string>

#include "gradleak/errors.h"

namespace gradleak::ndcore {

AdamState::AdamState(AdamOptions options, std::span<const Tensor> like)
    : options_(options) {
  if (!(options_.learning_rate > 0) || !(options_.beta1 >= 0) ||
      !(options_.beta1 < 1) || !(options_.beta2 >= 0) ||
      !(options_.beta2 < 1) || !(options_.epsilon > 0)) {
    throw ContractError("invalid Adam hyperparameters");
  }
  for (const Tensor& t : like) {
    m_.emplace_back(t.shape(), 0.0);
    v_.emplace_back(t.shape(), 0.0);
  }
}

void AdamState::Step(std::span<Tensor> params, std::span<const Tensor> grads,
                     Direction direction) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ContractError("Adam step over " + std::to_string(params.size()) +
                        " params / " + std::to_string(grads.size()) +
                        " grads, state has " + std::to_string(m_.size()));
  }
  for (std::size_t i = 0; i < m_.size(); ++i) {
    if (params[i].shape() != m_[i].shape() ||
        grads[i].shape() != m_[i].shape()) {
      throw ContractError("Adam tensor " + std::to_string(i) +
                          " has shape " + ShapeToString(params[i].shape()) +
                          ", state expects " + ShapeToString(m_[i].shape()));
    }
    if (!grads[i].AllFinite()) {
      throw NumericError("non-finite gradient in tensor " +
                         std::to_string(i) + "; Adam update aborted");
    }
  }

  ++step_;
  const double t = static_cast<double>(step_);
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);
  const double sign = direction == Direction::kAscent ? 1.0 : -1.0;
  for (std::size_t i = 0; i < m_.size(); ++i) {
    std::span<double> p = params[i].values();
    std::span<const double> g = grads[i].values();
    std::span<double> m = m_[i].values();
    std::span<double> v = v_[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p[k] += sign * options_.learning_rate * m_hat /
              (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

}  // namespace gradleak::ndcore

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

#ifndef GRADLEAK_NDCORE_ADAM_H_
#define GRADLEAK_NDCORE_ADAM_H_

#include <cstdint>
#include <span>
#include <vector>

#include "gradleak/ndcore/tensor.h"

namespace gradleak::ndcore {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

enum class Direction { kDescent, kAscent };

// Adam with bias-corrected moments. Moments start at zero and the step count
// advances by one per successful Step().
class AdamState {
 public:
  AdamState(AdamOptions options, std::span<const Tensor> like);

  // Updates `params` in place. Throws NumericError, leaving params and state
  // untouched, if any gradient entry is non-finite.
  void Step(std::span<Tensor> params, std::span<const Tensor> grads,
            Direction direction);

  const AdamOptions& options() const { return options_; }
  std::int64_t step_count() const { return step_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  AdamOptions options_;
  std::int64_t step_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace gradleak::ndcore

#endif  // GRADLEAK_NDCORE_ADAM_H_

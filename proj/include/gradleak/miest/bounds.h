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

#ifndef GRADLEAK_MIEST_BOUNDS_H_
#define GRADLEAK_MIEST_BOUNDS_H_

#include <span>

#include "gradleak/ndcore/tensor.h"

namespace gradleak::miest {

// Donsker-Varadhan lower bound in nats:
//   mean(joint) - log(mean(exp(marginal))),
// with the log-mean-exp shifted by max(marginal). Throws ContractError unless
// both lists have the same length S >= 2, and NumericError on non-finite
// input.
double DvLowerBound(std::span<const double> joint,
                    std::span<const double> marginal);

// Sum of all entries of the sample cross-covariance (n - 1 denominator)
// between rows of `x` ({n, p}) and rows of `g` ({n, q}). Throws ContractError
// for n < 2 or mismatched row counts.
double CovarianceMetric(const ndcore::Tensor& x, const ndcore::Tensor& g);

}  // namespace gradleak::miest

#endif  // GRADLEAK_MIEST_BOUNDS_H_

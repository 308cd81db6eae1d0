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

#include "gradleak/miest/bounds.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gradleak/errors.h"

namespace gradleak::miest {

double DvLowerBound(std::span<const double> joint,
                    std::span<const double> marginal) {
  if (joint.size() != marginal.size() || joint.size() < 2) {
    throw ContractError("DV bound needs equal joint and marginal lists of "
                        "length >= 2, got " +
                        std::to_string(joint.size()) + " and " +
                        std::to_string(marginal.size()));
  }
  double mean = 0.0;
  double top = -INFINITY;
  for (std::size_t k = 0; k < joint.size(); ++k) {
    if (!std::isfinite(joint[k]) || !std::isfinite(marginal[k])) {
      throw NumericError("DV bound input " + std::to_string(k) +
                         " is not finite");
    }
    mean += joint[k];
    top = std::max(top, marginal[k]);
  }
  mean /= static_cast<double>(joint.size());
  double total = 0.0;
  for (double v : marginal) total += std::exp(v - top);
  return mean - (top + std::log(total / static_cast<double>(marginal.size())));
}

double CovarianceMetric(const ndcore::Tensor& x, const ndcore::Tensor& g) {
  if (x.rank() != 2 || g.rank() != 2 || x.rows() != g.rows()) {
    throw ContractError("covariance needs paired {n, p} and {n, q} draws");
  }
  const std::size_t n = x.rows();
  if (n < 2) throw ContractError("covariance needs at least 2 draws");
  // sum_{a,b} cov(x_a, g_b) = cov(sum_a x_a, sum_b g_b).
  std::vector<double> sx(n, 0.0), sg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < x.cols(); ++a) sx[i] += x(i, a);
    for (std::size_t b = 0; b < g.cols(); ++b) sg[i] += g(i, b);
  }
  double mx = 0.0, mg = 0.0;
  for (std::size_t i = 0; i < n; ++i) mx += sx[i], mg += sg[i];
  mx /= static_cast<double>(n);
  mg /= static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += (sx[i] - mx) * (sg[i] - mg);
  return total / static_cast<double>(n - 1);
}

}  // namespace gradleak::miest

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

#ifndef GRADLEAK_HARNESS_STATS_H_
#define GRADLEAK_HARNESS_STATS_H_

#include <optional>
#include <span>
#include <vector>

namespace gradleak::harness {

// 1-based ranks; tied values share the mean of their positions.
std::vector<double> AverageRanks(std::span<const double> values);

// Pearson correlation of the average ranks. Empty when fewer than two pairs,
// when either side is constant, or when any value is NaN. Throws
// ContractError on a length mismatch.
std::optional<double> Spearman(std::span<const double> x,
                               std::span<const double> y);

}  // namespace gradleak::harness

#endif  // GRADLEAK_HARNESS_STATS_H_

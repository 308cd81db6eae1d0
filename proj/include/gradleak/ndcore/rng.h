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

#ifndef GRADLEAK_NDCORE_RNG_H_
#define GRADLEAK_NDCORE_RNG_H_

#include <cstddef>
#include <cstdint>
#include <random>

namespace gradleak::ndcore {

// Seeded pseudo-random stream. Independent sub-streams are derived with
// Split(), so a stream's output never depends on how many draws other
// streams made.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  // Child stream keyed by `stream`; deterministic in (seed, stream).
  Rng Split(std::uint64_t stream) const;

  double Normal();
  double Uniform();  // [0, 1)
  double Uniform(double lo, double hi);
  // Uniform index in [0, n).
  std::size_t Index(std::size_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// SplitMix64 finalizer; used to derive seeds.
std::uint64_t MixSeed(std::uint64_t value);

}  // namespace gradleak::ndcore

#endif  // GRADLEAK_NDCORE_RNG_H_

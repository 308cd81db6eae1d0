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

#include "gradleak/ndcore/rng.h"

#include "gradleak/errors.h"

namespace gradleak::ndcore {

std::uint64_t MixSeed(std::uint64_t value) {
  value += 0x9e3779b97f4a7c15ULL;
  value = (value ^ (value >> 30)) * 0xbf58476d1ce4e5b9ULL;
  value = (value ^ (value >> 27)) * 0x94d049bb133111ebULL;
  return value ^ (value >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(MixSeed(seed)) {}

Rng Rng::Split(std::uint64_t stream) const {
  return Rng(MixSeed(seed_ ^ MixSeed(stream + 0x632be59bd9b4e019ULL)));
}

double Rng::Normal() { return normal_(engine_); }

double Rng::Uniform() { return uniform_(engine_); }

double Rng::Uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform_(engine_);
}

std::size_t Rng::Index(std::size_t n) {
  if (n == 0) throw ContractError("Rng::Index needs n >= 1");
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

}  // namespace gradleak::ndcore

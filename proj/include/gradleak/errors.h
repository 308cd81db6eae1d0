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

#ifndef GRADLEAK_ERRORS_H_
#define GRADLEAK_ERRORS_H_

#include <stdexcept>
#include <string>

namespace gradleak {

// Base class for every error raised by the library. `kind()` is a stable,
// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

// Tensor or layer shapes disagree.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& message)
      : Error("dimension", message) {}
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& message)
      : Error("contract", message) {}
};

// NaN or infinity appeared where finite values are required.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message)
      : Error("numeric", message) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& message) : Error("parse", message) {}
};

class PreprocessError : public Error {
 public:
  explicit PreprocessError(const std::string& message)
      : Error("preprocess", message) {}
};

class EstimationError : public Error {
 public:
  explicit EstimationError(const std::string& message)
      : Error("estimation", message) {}
};

class AttackError : public Error {
 public:
  explicit AttackError(const std::string& message)
      : Error("attack", message) {}
};

// Failure of a multi-step run (training divergence, missing checkpoint).
class RunError : public Error {
 public:
  explicit RunError(const std::string& message) : Error("run", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error("config", message) {}
};

}  // namespace gradleak

#endif  // GRADLEAK_ERRORS_H_

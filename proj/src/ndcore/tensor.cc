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

#include "gradleak/ndcore/tensor.h"

#include <cmath>
#include <sstream>

#include <Eigen/Core>

#include "gradleak/errors.h"

namespace gradleak::ndcore {

std::string ShapeToString(const Shape& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << ", ";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

std::size_t ShapeSize(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

namespace {

void ValidateShape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must be non-empty");
  for (std::size_t d : shape) {
    if (d == 0) {
      throw DimensionError("tensor dimensions must be positive, got " +
                           ShapeToString(shape));
    }
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  ValidateShape(shape_);
  data_.assign(ShapeSize(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  ValidateShape(shape_);
  if (ShapeSize(shape_) != data_.size()) {
    throw DimensionError("shape " + ShapeToString(shape_) + " needs " +
                         std::to_string(ShapeSize(shape_)) +
                         " values, got " + std::to_string(data_.size()));
  }
}

Tensor Tensor::Scalar(double value) { return Tensor({1, 1}, {value}); }

Tensor Tensor::Row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::Column(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n, 1}, std::move(values));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) {
    throw DimensionError("expected rank-2 tensor, got " +
                         ShapeToString(shape_));
  }
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) {
    throw DimensionError("expected rank-2 tensor, got " +
                         ShapeToString(shape_));
  }
  return shape_[1];
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw DimensionError("item() on tensor of shape " + ShapeToString(shape_));
  }
  return data_[0];
}

bool Tensor::AllFinite() const {
  return Eigen::Map<const Eigen::ArrayXd>(
             data_.data(), static_cast<Eigen::Index>(data_.size()))
      .allFinite();
}

Tensor Tensor::Reshaped(Shape shape) const {
  if (ShapeSize(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + ShapeToString(shape_) + " to " +
                         ShapeToString(shape));
  }
  ValidateShape(shape);
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

}  // namespace gradleak::ndcore

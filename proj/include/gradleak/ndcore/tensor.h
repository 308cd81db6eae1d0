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

#ifndef GRADLEAK_NDCORE_TENSOR_H_
#define GRADLEAK_NDCORE_TENSOR_H_

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace gradleak::ndcore {

using Shape = std::vector<std::size_t>;

// Cache-line aligned storage. Vectorized reductions peel leading elements up
// to the first aligned address, so a fixed alignment keeps summation order,
// and therefore results, independent of where the heap places a buffer.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlignment));
  }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlignment); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
};

using Storage = std::vector<double, AlignedAllocator<double>>;

std::string ShapeToString(const Shape& shape);
std::size_t ShapeSize(const Shape& shape);

// Dense row-major array of doubles. Every dimension is positive and
// `size() == product(shape)`. Most of the library works with rank-2
// tensors; a scalar is represented as shape {1, 1}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor Scalar(double value);
  // Shape {1, n}.
  static Tensor Row(std::vector<double> values);
  // Shape {n, 1}.
  static Tensor Column(std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Rank-2 accessors; both throw DimensionError for other ranks.
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * shape_[1] + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double> vector() const { return {data_.begin(), data_.end()}; }

  // Value of a single-element tensor.
  double item() const;

  bool AllFinite() const;
  Tensor Reshaped(Shape shape) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  Storage data_;
};

}  // namespace gradleak::ndcore

#endif  // GRADLEAK_NDCORE_TENSOR_H_

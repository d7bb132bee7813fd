// Copyright 2026 The mdlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MDLAB_TENSOR_H_
#define MDLAB_TENSOR_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"

namespace mdlab {

using Shape = std::vector<std::size_t>;

std::size_t ShapeSize(const Shape& shape);
std::string ShapeToString(const Shape& shape);

// Shape-tagged row-major array of 32-bit floats. A batch of points is a rank-2
// tensor [n, d]; a single point is rank-1 [d].
class Tensor {
 public:
  Tensor() = default;
  // Zero-filled tensor of the given shape.
  explicit Tensor(Shape shape);
  Tensor(Shape shape, float fill);

  // Fails when the shape does not describe `data.size()` elements.
  static absl::StatusOr<Tensor> FromData(Shape shape, std::vector<float> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  // Rows and columns under the batch convention: rank-1 tensors are one row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  const std::vector<float>& values() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  std::span<float> row(std::size_t i);
  std::span<const float> row(std::size_t i) const;

  bool SameShape(const Tensor& other) const { return shape_ == other.shape_; }

  // Returns a copy with a new shape holding the same number of elements.
  absl::StatusOr<Tensor> Reshaped(Shape shape) const;

  // Bitwise equality of shape and values.
  friend bool operator==(const Tensor& a, const Tensor& b);

 private:
  Shape shape_;
  std::vector<float> data_;
};

// Stacks equal-shaped rank-1 tensors into a rank-2 batch.
absl::StatusOr<Tensor> StackRows(std::span<const Tensor> rows);

// Copies row `i` of a batch into a rank-1 tensor.
Tensor RowAsTensor(const Tensor& batch, std::size_t i);

double SquaredNorm(std::span<const float> v);
double SquaredDistance(std::span<const float> a, std::span<const float> b);

bool AllFinite(const Tensor& t);

}  // namespace mdlab

#endif  // MDLAB_TENSOR_H_

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

#include "mdlab/tensor.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <utility>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"

namespace mdlab {

std::size_t ShapeSize(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string ShapeToString(const Shape& shape) {
  return absl::StrCat("[", absl::StrJoin(shape, ", "), "]");
}

Tensor::Tensor(Shape shape) : Tensor(std::move(shape), 0.0f) {}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)), data_(ShapeSize(shape_), fill) {}

absl::StatusOr<Tensor> Tensor::FromData(Shape shape, std::vector<float> data) {
  if (ShapeSize(shape) != data.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("shape ", ShapeToString(shape), " describes ",
                     ShapeSize(shape), " elements but ", data.size(),
                     " were given"));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

std::size_t Tensor::rows() const {
  if (shape_.empty()) return data_.empty() ? 0 : 1;
  if (shape_.size() == 1) return 1;
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.empty()) return data_.size();
  if (shape_.size() == 1) return shape_[0];
  return shape_[0] == 0 ? 0 : data_.size() / shape_[0];
}

std::span<float> Tensor::row(std::size_t i) {
  const std::size_t c = cols();
  return std::span<float>(data_).subspan(i * c, c);
}

std::span<const float> Tensor::row(std::size_t i) const {
  const std::size_t c = cols();
  return std::span<const float>(data_).subspan(i * c, c);
}

absl::StatusOr<Tensor> Tensor::Reshaped(Shape shape) const {
  return FromData(std::move(shape), data_);
}

bool operator==(const Tensor& a, const Tensor& b) {
  return a.shape_ == b.shape_ && a.data_.size() == b.data_.size() &&
         (a.data_.empty() ||
          std::memcmp(a.data_.data(), b.data_.data(),
                      a.data_.size() * sizeof(float)) == 0);
}

absl::StatusOr<Tensor> StackRows(std::span<const Tensor> rows) {
  if (rows.empty()) return absl::InvalidArgumentError("no rows to stack");
  const Shape& first = rows.front().shape();
  if (first.size() != 1) {
    return absl::InvalidArgumentError("StackRows expects rank-1 tensors");
  }
  Tensor out(Shape{rows.size(), first[0]});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].shape() != first) {
      return absl::InvalidArgumentError(
          absl::StrCat("row ", i, " has shape ",
                       ShapeToString(rows[i].shape()), ", expected ",
                       ShapeToString(first)));
    }
    std::copy(rows[i].data().begin(), rows[i].data().end(),
              out.row(i).begin());
  }
  return out;
}

Tensor RowAsTensor(const Tensor& batch, std::size_t i) {
  auto r = batch.row(i);
  Tensor out(Shape{r.size()});
  std::copy(r.begin(), r.end(), out.data().begin());
  return out;
}

double SquaredNorm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return s;
}

double SquaredDistance(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return s;
}

bool AllFinite(const Tensor& t) {
  for (float x : t.data()) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace mdlab

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

#ifndef MDLAB_TESTS_TEST_UTIL_H_
#define MDLAB_TESTS_TEST_UTIL_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "gtest/gtest.h"
#include "mdlab/noise_predictor.h"
#include "mdlab/tensor.h"

#define MDLAB_TEST_CONCAT_INNER_(a, b) a##b
#define MDLAB_TEST_CONCAT_(a, b) MDLAB_TEST_CONCAT_INNER_(a, b)

#define ASSERT_OK(expr)                                   \
  do {                                                    \
    const ::absl::Status mdlab_test_status_ = (expr);     \
    ASSERT_TRUE(mdlab_test_status_.ok()) << mdlab_test_status_; \
  } while (0)

#define EXPECT_OK(expr)                                   \
  do {                                                    \
    const ::absl::Status mdlab_test_status_ = (expr);     \
    EXPECT_TRUE(mdlab_test_status_.ok()) << mdlab_test_status_; \
  } while (0)

#define ASSERT_OK_AND_ASSIGN_IMPL_(so, lhs, rexpr)  \
  auto so = (rexpr);                                \
  ASSERT_TRUE(so.ok()) << so.status();              \
  lhs = std::move(so).value()

#define ASSERT_OK_AND_ASSIGN(lhs, rexpr) \
  ASSERT_OK_AND_ASSIGN_IMPL_(MDLAB_TEST_CONCAT_(mdlab_so_, __LINE__), lhs, rexpr)

namespace mdlab::testing {

// Predicts the same noise vector for every input.
class ConstantPredictor : public NoisePredictor {
 public:
  explicit ConstantPredictor(std::vector<float> e) : e_(std::move(e)) {}
  std::size_t data_dim() const override { return e_.size(); }
  absl::StatusOr<Tensor> PredictNoise(const Tensor& x,
                                      std::span<const int> timesteps,
                                      std::span<const int>) const override {
    ++calls_;
    Tensor out(x.shape());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < e_.size(); ++c) out.row(r)[c] = e_[c];
    }
    (void)timesteps;
    return out;
  }
  int calls() const { return calls_; }

 private:
  std::vector<float> e_;
  mutable int calls_ = 0;
};

// Arbitrary per-row function of (x, t).
class FunctionPredictor : public NoisePredictor {
 public:
  using Fn = std::function<std::vector<double>(std::span<const float>, int)>;
  FunctionPredictor(std::size_t d, Fn fn) : d_(d), fn_(std::move(fn)) {}
  std::size_t data_dim() const override { return d_; }
  absl::StatusOr<Tensor> PredictNoise(const Tensor& x,
                                      std::span<const int> timesteps,
                                      std::span<const int>) const override {
    Tensor out(x.shape());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const auto v = fn_(x.row(r), timesteps[r]);
      for (std::size_t c = 0; c < d_; ++c) out.row(r)[c] = static_cast<float>(v[c]);
    }
    return out;
  }

 private:
  std::size_t d_;
  Fn fn_;
};

inline Tensor Point(std::vector<float> v) {
  const std::size_t n = v.size();
  return Tensor::FromData(Shape{n}, std::move(v)).value();
}

inline Tensor Batch(std::size_t n, std::size_t d, std::vector<float> v) {
  return Tensor::FromData(Shape{n, d}, std::move(v)).value();
}

inline std::filesystem::path TempDir(const std::string& name) {
  auto dir = std::filesystem::path(::testing::TempDir()) / ("mdlab_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace mdlab::testing

#endif  // MDLAB_TESTS_TEST_UTIL_H_

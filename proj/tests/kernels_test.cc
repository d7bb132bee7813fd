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

#include <vector>

#include "gtest/gtest.h"
#include "mdlab/kernels.h"
#include "mdlab/random.h"

namespace mdlab {
namespace {

std::vector<double> RandomDoubles(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = StandardNormal(rng);
  return v;
}

std::vector<float> RandomFloats(std::size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = StandardNormal(rng);
  return v;
}

class KernelsTest : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override {
    saved_ = kernels::MaxThreads();
    kernels::SetMaxThreads(GetParam());
  }
  void TearDown() override { kernels::SetMaxThreads(saved_); }

 private:
  int saved_ = 1;
};

TEST_P(KernelsTest, DenseForwardMatchesReference) {
  Rng rng = MakeRng(1);
  for (auto [n, k, m] : {std::tuple{1, 1, 1}, {7, 5, 3}, {64, 42, 128}, {33, 128, 2}}) {
    const auto in = RandomDoubles(n * k, rng);
    const auto w = RandomFloats(m * k, rng);
    const auto b = RandomFloats(m, rng);
    std::vector<double> fast(n * m), ref(n * m);
    kernels::DenseForward(in, n, k, w, b, m, fast);
    kernels::reference::DenseForward(in, n, k, w, b, m, ref);
    EXPECT_EQ(fast, ref);
  }
}

TEST_P(KernelsTest, DenseBackwardMatchesReference) {
  Rng rng = MakeRng(2);
  const std::size_t n = 29, k = 17, m = 11;
  const auto dout = RandomDoubles(n * m, rng);
  const auto in = RandomDoubles(n * k, rng);
  const auto w = RandomFloats(m * k, rng);
  std::vector<double> din(n * k), din_ref(n * k);
  kernels::DenseBackwardInput(dout, n, m, w, k, din);
  kernels::reference::DenseBackwardInput(dout, n, m, w, k, din_ref);
  EXPECT_EQ(din, din_ref);
  std::vector<double> dw(m * k), db(m), dw_ref(m * k), db_ref(m);
  kernels::DenseBackwardParams(dout, in, n, m, k, dw, db);
  kernels::reference::DenseBackwardParams(dout, in, n, m, k, dw_ref, db_ref);
  for (std::size_t i = 0; i < dw.size(); ++i) EXPECT_NEAR(dw[i], dw_ref[i], 1e-12);
  for (std::size_t i = 0; i < db.size(); ++i) EXPECT_NEAR(db[i], db_ref[i], 1e-12);
}

TEST_P(KernelsTest, DistancesMatchReference) {
  Rng rng = MakeRng(3);
  const std::size_t n = 301, m = 157, d = 2;
  const auto a = RandomFloats(n * d, rng);
  const auto b = RandomFloats(m * d, rng);
  EXPECT_NEAR(kernels::PairwiseDistanceSum(a, n, b, m, d),
              kernels::reference::PairwiseDistanceSum(a, n, b, m, d), 1e-8);
  for (std::size_t k : {1, 3}) {
    EXPECT_EQ(kernels::NearestDistances(a, n, b, m, d, k),
              kernels::reference::NearestDistances(a, n, b, m, d, k));
  }
}

INSTANTIATE_TEST_SUITE_P(Threads, KernelsTest, ::testing::Values(1, 2, 4));

TEST(KernelsReferenceTest, HandValues) {
  const std::vector<float> a{0.0f, 0.0f};
  const std::vector<float> b{3.0f, 4.0f, 6.0f, 8.0f};
  EXPECT_DOUBLE_EQ(kernels::reference::PairwiseDistanceSum(a, 1, b, 2, 2), 15.0);
  EXPECT_EQ(kernels::reference::NearestDistances(a, 1, b, 2, 2, 1),
            std::vector<double>{5.0});
  EXPECT_EQ(kernels::reference::NearestDistances(a, 1, b, 2, 2, 2),
            std::vector<double>{7.5});
}

}  // namespace
}  // namespace mdlab

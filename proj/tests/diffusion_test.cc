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

#include <cmath>
#include <vector>

#include "gtest/gtest.h"
#include "mdlab/denoiser.h"
#include "mdlab/diffusion.h"
#include "mdlab/random.h"
#include "mdlab/schedule.h"
#include "test_util.h"

namespace mdlab {
namespace {

using ::mdlab::testing::ConstantPredictor;
using ::mdlab::testing::Point;

TEST(ScheduleTest, FourStepLinear) {
  ASSERT_OK_AND_ASSIGN(NoiseSchedule s, MakeLinearSchedule(4, 0.1, 0.4));
  const std::vector<double> betas{0.1, 0.2, 0.3, 0.4};
  const std::vector<double> abar{0.9, 0.72, 0.504, 0.3024};
  ASSERT_EQ(s.num_steps(), 4);
  for (int t = 1; t <= 4; ++t) {
    EXPECT_NEAR(s.beta(t), betas[t - 1], 1e-15);
    EXPECT_NEAR(s.alpha(t), 1.0 - betas[t - 1], 1e-15);
    EXPECT_NEAR(s.alpha_bar(t), abar[t - 1], 1e-15);
  }
  EXPECT_EQ(s.alpha_bar(0), 1.0);
}

TEST(ScheduleTest, SingleStep) {
  ASSERT_OK_AND_ASSIGN(NoiseSchedule s, MakeLinearSchedule(1, 0.3, 0.3));
  EXPECT_EQ(s.betas(), std::vector<double>{0.3});
  EXPECT_NEAR(s.alpha_bar(1), 0.7, 1e-15);
}

TEST(ScheduleTest, LongScheduleMatchesHighPrecisionProduct) {
  ASSERT_OK_AND_ASSIGN(NoiseSchedule s, MakeLinearSchedule(1000, 1e-4, 0.02));
  // 50-digit product of (1 - beta_t).
  EXPECT_NEAR(s.alpha_bar(1000) / 4.0358297653756833e-05, 1.0, 1e-9);
}

TEST(ScheduleTest, DefaultToyScheduleEndpoint) {
  ASSERT_OK_AND_ASSIGN(NoiseSchedule s, MakeLinearSchedule(100, 1e-4, 0.05));
  EXPECT_NEAR(s.alpha_bar(100) / 0.07823431562186835, 1.0, 1e-9);
}

TEST(ScheduleTest, AlphaBarIsDecreasingRunningProduct) {
  ASSERT_OK_AND_ASSIGN(NoiseSchedule s, MakeLinearSchedule(1000, 1e-4, 0.02));
  double prod = 1.0;
  for (int t = 1; t <= 1000; ++t) {
    prod *= 1.0 - s.beta(t);
    EXPECT_NEAR(s.alpha_bar(t) / prod, 1.0, 1e-6);
    EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
  }
}

TEST(ScheduleTest, RejectsBadBetas) {
  EXPECT_FALSE(MakeLinearSchedule(0, 0.1, 0.2).ok());
  EXPECT_FALSE(MakeLinearSchedule(4, 0.0, 0.2).ok());
  EXPECT_FALSE(MakeLinearSchedule(4, 0.1, 1.5).ok());
  EXPECT_FALSE(NoiseSchedule::FromBetas({0.1, -0.2}).ok());
  EXPECT_FALSE(NoiseSchedule::FromBetas({}).ok());
}

// Increasing linear schedule over 40 steps ending at beta = 0.04, with the
// start chosen by bisection so that alpha_bar_40 = 0.25 and alpha_40 = 0.96.
NoiseSchedule QuarterSchedule() {
  double lo = 1e-6;
  double hi = 0.04;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double abar = MakeLinearSchedule(40, mid, 0.04).value().alpha_bar(40);
    (abar > 0.25 ? lo : hi) = mid;
  }
  return MakeLinearSchedule(40, lo, 0.04).value();
}

constexpr int kQ = 40;

TEST(DiffuseTest, HandExample) {
  ASSERT_OK_AND_ASSIGN(NoiseSchedule s, NoiseSchedule::FromBetas({0.75}));
  ASSERT_OK_AND_ASSIGN(Tensor out, Diffuse(Point({1.0f}), 1, Point({1.0f}), s));
  EXPECT_NEAR(out[0], 0.5 + std::sqrt(0.75), 1e-6);
  EXPECT_NEAR(out[0], 1.36603, 1e-5);
}

TEST(DiffuseTest, ZeroNoiseScalesSignal) {
  const NoiseSchedule s = QuarterSchedule();
  ASSERT_OK_AND_ASSIGN(Tensor out,
                       Diffuse(Point({2.0f, -4.0f}), kQ, Point({0.0f, 0.0f}), s));
  EXPECT_FLOAT_EQ(out[0], 1.0f);
  EXPECT_FLOAT_EQ(out[1], -2.0f);
}

TEST(DiffuseTest, LongScheduleApproachesNoise) {
  ASSERT_OK_AND_ASSIGN(NoiseSchedule s, MakeLinearSchedule(1000, 1e-4, 0.02));
  const Tensor x0 = Point({3.0f, -4.0f});
  const Tensor eps = Point({0.5f, 0.25f});
  ASSERT_OK_AND_ASSIGN(Tensor out, Diffuse(x0, 1000, eps, s));
  const double bound = std::sqrt(s.alpha_bar(1000)) * 5.0 + 1e-3;
  EXPECT_NEAR(out[0], 0.5, bound);
  EXPECT_NEAR(out[1], 0.25, bound);
}

TEST(DiffuseTest, RejectsShapeMismatchAndBadTimestep) {
  const NoiseSchedule s = QuarterSchedule();
  EXPECT_FALSE(Diffuse(Point({1.0f}), 1, Point({1.0f, 2.0f}), s).ok());
  EXPECT_FALSE(Diffuse(Point({1.0f}), 0, Point({1.0f}), s).ok());
  EXPECT_FALSE(Diffuse(Point({1.0f}), kQ + 1, Point({1.0f}), s).ok());
}

TEST(PosteriorMeanTest, HandExample) {
  const NoiseSchedule s = QuarterSchedule();
  ASSERT_NEAR(s.alpha(kQ), 0.96, 1e-15);
  ASSERT_NEAR(s.alpha_bar(kQ), 0.25, 1e-12);
  ASSERT_OK_AND_ASSIGN(Tensor out,
                       PosteriorMean(Point({1.0f}), kQ, Point({0.5f}), s));
  EXPECT_NEAR(out[0], 0.99705, 1e-5);
}

TEST(PosteriorMeanTest, ZeroPredictionDividesBySqrtAlpha) {
  const NoiseSchedule s = QuarterSchedule();
  ASSERT_OK_AND_ASSIGN(Tensor out,
                       PosteriorMean(Point({1.5f}), kQ, Point({0.0f}), s));
  EXPECT_NEAR(out[0], 1.5 / std::sqrt(0.96), 1e-6);
}

TEST(PosteriorMeanTest, DegenerateScheduleRejected) {
  EXPECT_FALSE(NoiseSchedule::FromBetas({0.0, 0.1}).ok());
  EXPECT_FALSE(NoiseSchedule::FromBetas({0.2, 0.1}).ok());
  EXPECT_FALSE(MakeLinearSchedule(2, 0.1, 0.1).ok());
}

TEST(PredictX0Test, InvertsDiffuse) {
  ASSERT_OK_AND_ASSIGN(NoiseSchedule s, MakeLinearSchedule(100, 1e-4, 0.05));
  Rng rng = MakeRng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int t = UniformInt(rng, 1, 100);
    const Tensor x0 = GaussianTensor(Shape{3}, rng);
    const Tensor eps = GaussianTensor(Shape{3}, rng);
    ASSERT_OK_AND_ASSIGN(Tensor xt, Diffuse(x0, t, eps, s));
    ASSERT_OK_AND_ASSIGN(Tensor back, PredictX0(xt, t, eps, s));
    for (int i = 0; i < 3; ++i) {
      EXPECT_NEAR(back[i], x0[i], 1e-5 * std::max(1.0f, std::abs(x0[i])))
          << "t = " << t;
    }
  }
}

TEST(PredictX0Test, HandExampleAndZeroPrediction) {
  ASSERT_OK_AND_ASSIGN(NoiseSchedule s, NoiseSchedule::FromBetas({0.75}));
  ASSERT_OK_AND_ASSIGN(Tensor a, PredictX0(Point({1.36603f}), 1, Point({1.0f}), s));
  EXPECT_NEAR(a[0], 1.0, 1e-5);
  ASSERT_OK_AND_ASSIGN(Tensor b, PredictX0(Point({1.0f}), 1, Point({0.0f}), s));
  EXPECT_NEAR(b[0], 2.0, 1e-6);
}

TEST(AncestralStepTest, LastStepIsPosteriorMean) {
  const NoiseSchedule s = QuarterSchedule();
  ConstantPredictor model({0.3f});
  Rng rng = MakeRng(1);
  ASSERT_OK_AND_ASSIGN(Tensor out, AncestralStep(model, Point({0.8f}), 1, s, rng));
  ASSERT_OK_AND_ASSIGN(Tensor mean, PosteriorMean(Point({0.8f}), 1, Point({0.3f}), s));
  EXPECT_EQ(out, mean);
}

TEST(AncestralStepTest, SeededStepIsReproducible) {
  const NoiseSchedule s = QuarterSchedule();
  ConstantPredictor model({0.3f, -0.1f});
  Rng r1 = MakeRng(11);
  Rng r2 = MakeRng(11);
  ASSERT_OK_AND_ASSIGN(Tensor a, AncestralStep(model, Point({0.8f, 0.1f}), kQ, s, r1));
  ASSERT_OK_AND_ASSIGN(Tensor b, AncestralStep(model, Point({0.8f, 0.1f}), kQ, s, r2));
  EXPECT_EQ(a, b);
  ASSERT_OK_AND_ASSIGN(Tensor mean,
                       PosteriorMean(Point({0.8f, 0.1f}), kQ, Point({0.3f, -0.1f}), s));
  EXPECT_NE(a, mean);
}

TEST(DdimTest, ConstantPredictorRoundTrip) {
  ASSERT_OK_AND_ASSIGN(NoiseSchedule s, MakeLinearSchedule(100, 1e-4, 0.05));
  ConstantPredictor model({0.4f, -1.2f});
  const Tensor x = Point({0.7f, -0.3f});
  for (int t = 1; t < 100; ++t) {
    ASSERT_OK_AND_ASSIGN(Tensor up, DdimReverseStep(model, x, t, s));
    ASSERT_OK_AND_ASSIGN(Tensor down, DdimDenoiseStep(model, up, t + 1, s));
    EXPECT_EQ(up.shape(), x.shape());
    EXPECT_NEAR(down[0], x[0], 1e-6);
    EXPECT_NEAR(down[1], x[1], 1e-6);
  }
}

TEST(DdimTest, ReverseFromZeroInput) {
  ASSERT_OK_AND_ASSIGN(NoiseSchedule s, MakeLinearSchedule(100, 1e-4, 0.05));
  ConstantPredictor model({0.9f});
  const int t = 30;
  ASSERT_OK_AND_ASSIGN(Tensor out, DdimReverseStep(model, Point({0.0f}), t, s));
  const double e = 0.9f;
  const double expected =
      std::sqrt(s.alpha_bar(t + 1)) *
          (-std::sqrt(1.0 - s.alpha_bar(t)) / std::sqrt(s.alpha_bar(t))) * e +
      std::sqrt(1.0 - s.alpha_bar(t + 1)) * e;
  EXPECT_NEAR(out[0], expected, 1e-6);
}

TEST(DdimTest, ZeroPredictorDenoiseRescales) {
  ASSERT_OK_AND_ASSIGN(NoiseSchedule s, MakeLinearSchedule(100, 1e-4, 0.05));
  ConstantPredictor model({0.0f});
  ASSERT_OK_AND_ASSIGN(Tensor out, DdimDenoiseStep(model, Point({1.5f}), 40, s));
  EXPECT_NEAR(out[0],
              1.5 * std::sqrt(s.alpha_bar(39)) / std::sqrt(s.alpha_bar(40)), 1e-6);
}

TEST(DdimTest, EndpointsRejected) {
  ASSERT_OK_AND_ASSIGN(NoiseSchedule s, MakeLinearSchedule(10, 1e-4, 0.05));
  ConstantPredictor model({0.0f});
  EXPECT_FALSE(DdimReverseStep(model, Point({1.0f}), 10, s).ok());
  EXPECT_FALSE(DdimDenoiseStep(model, Point({1.0f}), 1, s).ok());
}

// Independent scalar evaluation of a hidden-[3] SiLU MLP with sinusoidal
// timestep embedding, then the deterministic denoise step.
TEST(DdimTest, DenoiseStepMatchesScalarOracle) {
  DenoiserArch arch;
  arch.data_dim = 2;
  arch.hidden = {3};
  arch.embed_dim = 4;
  arch.num_timesteps = 10;
  ASSERT_OK_AND_ASSIGN(Denoiser model, InitDenoiser(arch, 42));
  ASSERT_OK_AND_ASSIGN(NoiseSchedule s, MakeLinearSchedule(10, 1e-3, 0.2));
  const int t = 5;
  const std::vector<double> x{0.4, -1.1};

  const auto& p = model.params();
  const Tensor& w0 = p[0].value;
  const Tensor& b0 = p[1].value;
  const Tensor& w1 = p[2].value;
  const Tensor& b1 = p[3].value;
  std::vector<double> in{x[0], x[1], std::sin(t * 1.0), std::cos(t * 1.0),
                         std::sin(t / 10.0), std::cos(t / 10.0)};
  std::vector<double> h(3);
  for (int i = 0; i < 3; ++i) {
    double z = b0[i];
    for (int j = 0; j < 6; ++j) z += static_cast<double>(w0[i * 6 + j]) * in[j];
    h[i] = z / (1.0 + std::exp(-z));
  }
  std::vector<double> eps(2);
  for (int i = 0; i < 2; ++i) {
    eps[i] = b1[i];
    for (int j = 0; j < 3; ++j) eps[i] += static_cast<double>(w1[i * 3 + j]) * h[j];
  }
  const double ab = s.alpha_bar(t);
  const double ab_prev = s.alpha_bar(t - 1);
  ASSERT_OK_AND_ASSIGN(
      Tensor out, DdimDenoiseStep(model, Point({0.4f, -1.1f}), t, s));
  for (int i = 0; i < 2; ++i) {
    const double xi = static_cast<float>(x[i]);
    const double f = (xi - std::sqrt(1.0 - ab) * eps[i]) / std::sqrt(ab);
    const double expected = std::sqrt(ab_prev) * f + std::sqrt(1.0 - ab_prev) * eps[i];
    EXPECT_NEAR(out[i], expected, 1e-6);
  }
}

TEST(ComposeTest, ModelEvaluationCount) {
  ASSERT_OK_AND_ASSIGN(NoiseSchedule s, MakeLinearSchedule(100, 1e-4, 0.05));
  for (int stride : {1, 3, 5, 7}) {
    for (int target : {1, 10, 50, 99}) {
      ConstantPredictor model({0.1f});
      ASSERT_OK(ComposeReverse(model, Point({0.5f}), target, s, stride).status());
      EXPECT_EQ(model.calls(), (target + stride - 1) / stride);
    }
  }
}

TEST(ComposeTest, ConstantPredictorRoundTrip) {
  ASSERT_OK_AND_ASSIGN(NoiseSchedule s, MakeLinearSchedule(100, 1e-4, 0.05));
  ConstantPredictor model({0.25f, -0.5f});
  const Tensor x0 = Point({1.0f, 2.0f});
  for (int stride : {1, 5}) {
    ASSERT_OK_AND_ASSIGN(Tensor up, ComposeReverse(model, x0, 50, s, stride));
    ASSERT_OK_AND_ASSIGN(Tensor down, ComposeDenoise(model, up, 50, s, stride));
    EXPECT_NEAR(down[0], 1.0, 1e-5);
    EXPECT_NEAR(down[1], 2.0, 1e-5);
  }
}

TEST(ComposeTest, StrideMattersForNonConstantModels) {
  DenoiserArch arch;
  arch.hidden = {16};
  ASSERT_OK_AND_ASSIGN(Denoiser model, InitDenoiser(arch, 3));
  ASSERT_OK_AND_ASSIGN(NoiseSchedule s, MakeLinearSchedule(100, 1e-4, 0.05));
  const Tensor x0 = Point({1.0f, -0.5f});
  ASSERT_OK_AND_ASSIGN(Tensor a1, ComposeReverse(model, x0, 50, s, 1));
  ASSERT_OK_AND_ASSIGN(Tensor a2, ComposeReverse(model, x0, 50, s, 1));
  ASSERT_OK_AND_ASSIGN(Tensor b, ComposeReverse(model, x0, 50, s, 5));
  EXPECT_EQ(a1, a2);
  EXPECT_NE(a1, b);
}

TEST(ComposeTest, ReversePlan) {
  EXPECT_EQ(ReversePlan(7, 3), (std::vector<int>{0, 3, 6, 7}));
  EXPECT_EQ(ReversePlan(4, 1), (std::vector<int>{0, 1, 2, 3, 4}));
}

}  // namespace
}  // namespace mdlab

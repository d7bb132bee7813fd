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

#include "mdlab/diffusion.h"

#include <cmath>
#include <vector>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "mdlab/status_macros.h"

namespace mdlab {
namespace {

absl::Status CheckSameShape(const Tensor& a, const Tensor& b,
                            const char* what) {
  if (!a.SameShape(b)) {
    return absl::InvalidArgumentError(
        absl::StrCat(what, ": shape ", ShapeToString(a.shape()), " vs ",
                     ShapeToString(b.shape())));
  }
  return absl::OkStatus();
}

// out = ca * a + cb * b, computed in double and stored as float.
Tensor Combine(double ca, const Tensor& a, double cb, const Tensor& b) {
  Tensor out(a.shape());
  auto o = out.data();
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = static_cast<float>(ca * av[i] + cb * bv[i]);
  }
  return out;
}

}  // namespace

absl::StatusOr<Tensor> PredictNoiseAt(const NoisePredictor& model,
                                      const Tensor& x, int t,
                                      std::optional<int> condition) {
  Tensor batch = x;
  if (x.rank() == 1) {
    MDLAB_ASSIGN_OR_RETURN(batch, x.Reshaped(Shape{1, x.size()}));
  } else if (x.rank() != 2) {
    return absl::InvalidArgumentError(
        absl::StrCat("expected a point or a batch, got shape ",
                     ShapeToString(x.shape())));
  }
  const std::vector<int> ts(batch.rows(), t);
  std::vector<int> conds;
  if (condition.has_value()) conds.assign(batch.rows(), *condition);
  MDLAB_ASSIGN_OR_RETURN(Tensor eps, model.PredictNoise(batch, ts, conds));
  if (x.rank() == 1) return eps.Reshaped(x.shape());
  return eps;
}

absl::StatusOr<Tensor> Diffuse(const Tensor& x0, int t, const Tensor& eps,
                               const NoiseSchedule& sched) {
  MDLAB_RETURN_IF_ERROR(CheckSameShape(x0, eps, "Diffuse"));
  MDLAB_RETURN_IF_ERROR(sched.CheckTimestep(t));
  const double abar = sched.alpha_bar(t);
  return Combine(std::sqrt(abar), x0, std::sqrt(1.0 - abar), eps);
}

absl::StatusOr<Tensor> PosteriorMean(const Tensor& x_t, int t,
                                     const Tensor& eps_pred,
                                     const NoiseSchedule& sched) {
  MDLAB_RETURN_IF_ERROR(CheckSameShape(x_t, eps_pred, "PosteriorMean"));
  MDLAB_RETURN_IF_ERROR(sched.CheckTimestep(t));
  const double alpha = sched.alpha(t);
  const double abar = sched.alpha_bar(t);
  if (!(abar < 1.0)) {
    return absl::FailedPreconditionError(
        "posterior mean undefined when alpha_bar_t == 1");
  }
  const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
  const double eps_coef = (1.0 - alpha) / std::sqrt(1.0 - abar);
  return Combine(inv_sqrt_alpha, x_t, -inv_sqrt_alpha * eps_coef, eps_pred);
}

absl::StatusOr<Tensor> PredictX0(const Tensor& x_t, int t,
                                 const Tensor& eps_pred,
                                 const NoiseSchedule& sched) {
  MDLAB_RETURN_IF_ERROR(CheckSameShape(x_t, eps_pred, "PredictX0"));
  MDLAB_RETURN_IF_ERROR(sched.CheckTimestep(t));
  const double abar = sched.alpha_bar(t);
  const double inv = 1.0 / std::sqrt(abar);
  return Combine(inv, x_t, -std::sqrt(1.0 - abar) * inv, eps_pred);
}

absl::StatusOr<Tensor> AncestralStep(const NoisePredictor& model,
                                     const Tensor& x_t, int t,
                                     const NoiseSchedule& sched, Rng& rng,
                                     std::optional<int> condition) {
  MDLAB_RETURN_IF_ERROR(sched.CheckTimestep(t));
  MDLAB_ASSIGN_OR_RETURN(Tensor eps, PredictNoiseAt(model, x_t, t, condition));
  MDLAB_ASSIGN_OR_RETURN(Tensor mean, PosteriorMean(x_t, t, eps, sched));
  if (t == 1) return mean;
  const double sigma = std::sqrt(sched.beta(t));
  for (float& v : mean.data()) {
    v = static_cast<float>(v + sigma * StandardNormal(rng));
  }
  return mean;
}

absl::StatusOr<Tensor> DdimMove(const NoisePredictor& model, const Tensor& x,
                                int t_from, int t_to,
                                const NoiseSchedule& sched,
                                std::optional<int> condition) {
  const int T = sched.num_steps();
  if (t_from < 0 || t_from > T || t_to < 0 || t_to > T || t_from == t_to) {
    return absl::OutOfRangeError(absl::StrCat(
        "invalid DDIM move ", t_from, " -> ", t_to, " with T = ", T));
  }
  MDLAB_ASSIGN_OR_RETURN(
      Tensor eps,
      PredictNoiseAt(model, x, t_from == 0 ? 1 : t_from, condition));
  if (!x.SameShape(eps)) {
    return absl::InternalError("noise predictor changed the input shape");
  }
  const double abar_from = sched.alpha_bar(t_from);
  const double abar_to = sched.alpha_bar(t_to);
  const double sqrt_from = std::sqrt(abar_from);
  const double noise_from = std::sqrt(1.0 - abar_from);
  const double sqrt_to = std::sqrt(abar_to);
  const double noise_to = std::sqrt(1.0 - abar_to);
  Tensor out(x.shape());
  auto o = out.data();
  auto xv = x.data();
  auto ev = eps.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double f = (xv[i] - noise_from * ev[i]) / sqrt_from;
    o[i] = static_cast<float>(sqrt_to * f + noise_to * ev[i]);
  }
  return out;
}

absl::StatusOr<Tensor> DdimReverseStep(const NoisePredictor& model,
                                       const Tensor& x_t, int t,
                                       const NoiseSchedule& sched,
                                       std::optional<int> condition) {
  if (t < 1 || t > sched.num_steps() - 1) {
    return absl::OutOfRangeError(absl::StrCat(
        "reverse step needs 1 <= t <= T - 1, got t = ", t));
  }
  return DdimMove(model, x_t, t, t + 1, sched, condition);
}

absl::StatusOr<Tensor> DdimDenoiseStep(const NoisePredictor& model,
                                       const Tensor& x_t, int t,
                                       const NoiseSchedule& sched,
                                       std::optional<int> condition) {
  if (t < 2 || t > sched.num_steps()) {
    return absl::OutOfRangeError(absl::StrCat(
        "denoise step needs 2 <= t <= T, got t = ", t));
  }
  return DdimMove(model, x_t, t, t - 1, sched, condition);
}

std::vector<int> ReversePlan(int t_target, int stride) {
  std::vector<int> plan{0};
  int t = 0;
  while (t < t_target) {
    t = std::min(t + stride, t_target);
    plan.push_back(t);
  }
  return plan;
}

absl::StatusOr<Tensor> ComposeReverse(const NoisePredictor& model,
                                      const Tensor& x0, int t_target,
                                      const NoiseSchedule& sched, int stride,
                                      std::optional<int> condition) {
  MDLAB_RETURN_IF_ERROR(sched.CheckTimestep(t_target));
  if (stride < 1) return absl::InvalidArgumentError("stride must be >= 1");
  const std::vector<int> plan = ReversePlan(t_target, stride);
  Tensor x = x0;
  for (std::size_t i = 0; i + 1 < plan.size(); ++i) {
    MDLAB_ASSIGN_OR_RETURN(
        x, DdimMove(model, x, plan[i], plan[i + 1], sched, condition));
  }
  return x;
}

absl::StatusOr<Tensor> ComposeDenoise(const NoisePredictor& model,
                                      const Tensor& x_t, int t_from,
                                      const NoiseSchedule& sched, int stride,
                                      std::optional<int> condition) {
  MDLAB_RETURN_IF_ERROR(sched.CheckTimestep(t_from));
  if (stride < 1) return absl::InvalidArgumentError("stride must be >= 1");
  const std::vector<int> plan = ReversePlan(t_from, stride);
  Tensor x = x_t;
  for (std::size_t i = plan.size() - 1; i > 0; --i) {
    MDLAB_ASSIGN_OR_RETURN(
        x, DdimMove(model, x, plan[i], plan[i - 1], sched, condition));
  }
  return x;
}

}  // namespace mdlab

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

#ifndef MDLAB_DIFFUSION_H_
#define MDLAB_DIFFUSION_H_

#include <optional>

#include "absl/status/statusor.h"
#include "mdlab/noise_predictor.h"
#include "mdlab/random.h"
#include "mdlab/schedule.h"
#include "mdlab/tensor.h"

namespace mdlab {

// Forward diffusion in closed form: sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
absl::StatusOr<Tensor> Diffuse(const Tensor& x0, int t, const Tensor& eps,
                               const NoiseSchedule& sched);

// Mean of x_{t-1} given x_t and a noise prediction:
// (x_t - (1 - alpha_t) / sqrt(1 - abar_t) * eps_pred) / sqrt(alpha_t).
absl::StatusOr<Tensor> PosteriorMean(const Tensor& x_t, int t,
                                     const Tensor& eps_pred,
                                     const NoiseSchedule& sched);

// Clean-sample estimate f(x_t, t) = (x_t - sqrt(1 - abar_t) eps) / sqrt(abar_t).
absl::StatusOr<Tensor> PredictX0(const Tensor& x_t, int t,
                                 const Tensor& eps_pred,
                                 const NoiseSchedule& sched);

// One DDPM reverse step with sigma_t^2 = beta_t. No noise is added at t = 1.
// Noise is drawn element-wise in row-major order from `rng`.
absl::StatusOr<Tensor> AncestralStep(const NoisePredictor& model,
                                     const Tensor& x_t, int t,
                                     const NoiseSchedule& sched, Rng& rng,
                                     std::optional<int> condition = {});

// General deterministic DDIM move from t_from to t_to (either direction,
// 0 <= t_from, t_to <= T, t_from != t_to):
//   sqrt(abar_to) f(x, t_from) + sqrt(1 - abar_to) eps(x, t_from).
// At t_from == 0 the model is queried at t = 1 (the least noisy timestep it
// was trained on) and f(x, 0) == x exactly.
absl::StatusOr<Tensor> DdimMove(const NoisePredictor& model, const Tensor& x,
                                int t_from, int t_to,
                                const NoiseSchedule& sched,
                                std::optional<int> condition = {});

// Deterministic reverse step t -> t + 1. Requires 1 <= t <= T - 1.
absl::StatusOr<Tensor> DdimReverseStep(const NoisePredictor& model,
                                       const Tensor& x_t, int t,
                                       const NoiseSchedule& sched,
                                       std::optional<int> condition = {});

// Deterministic denoise step t -> t - 1. Requires 2 <= t <= T.
absl::StatusOr<Tensor> DdimDenoiseStep(const NoisePredictor& model,
                                       const Tensor& x_t, int t,
                                       const NoiseSchedule& sched,
                                       std::optional<int> condition = {});

// Timesteps visited when composing reverse steps from 0 up to t_target in
// increments of `stride`; the final increment is truncated at t_target.
// The returned plan starts at 0 and ends at t_target.
std::vector<int> ReversePlan(int t_target, int stride);

// Deterministic reverse trajectory from x0 (t = 0) to t_target. Uses exactly
// ceil(t_target / stride) model evaluations.
absl::StatusOr<Tensor> ComposeReverse(const NoisePredictor& model,
                                      const Tensor& x0, int t_target,
                                      const NoiseSchedule& sched, int stride,
                                      std::optional<int> condition = {});

// Deterministic denoise trajectory from x_{t_from} down to 0, walking the
// same plan as ComposeReverse(t_from, stride) in reverse.
absl::StatusOr<Tensor> ComposeDenoise(const NoisePredictor& model,
                                      const Tensor& x_t, int t_from,
                                      const NoiseSchedule& sched, int stride,
                                      std::optional<int> condition = {});

}  // namespace mdlab

#endif  // MDLAB_DIFFUSION_H_

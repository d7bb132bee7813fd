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

#ifndef MDLAB_NOISE_PREDICTOR_H_
#define MDLAB_NOISE_PREDICTOR_H_

#include <optional>
#include <span>
#include <vector>

#include "absl/status/statusor.h"
#include "mdlab/tensor.h"

namespace mdlab {

// Anything that realizes eps_theta(x_t, t, c). Implementations must be
// read-only and deterministic so they can be shared across threads.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;

  // Data dimension d of a single point.
  virtual std::size_t data_dim() const = 0;

  // x is a [n, d] batch. `timesteps` holds one timestep per row.
  // `conditions` is empty for unconditional calls, else one token per row.
  // Returns a [n, d] noise prediction.
  virtual absl::StatusOr<Tensor> PredictNoise(
      const Tensor& x, std::span<const int> timesteps,
      std::span<const int> conditions) const = 0;
};

// Broadcasts a single timestep and optional condition over every row of x.
// Rank-1 inputs are treated as a one-row batch and the result keeps x's shape.
absl::StatusOr<Tensor> PredictNoiseAt(const NoisePredictor& model,
                                      const Tensor& x, int t,
                                      std::optional<int> condition);

}  // namespace mdlab

#endif  // MDLAB_NOISE_PREDICTOR_H_

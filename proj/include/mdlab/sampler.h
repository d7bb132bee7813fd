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

#ifndef MDLAB_SAMPLER_H_
#define MDLAB_SAMPLER_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "absl/status/statusor.h"
#include "mdlab/noise_predictor.h"
#include "mdlab/schedule.h"
#include "mdlab/tensor.h"
#include "nlohmann/json.hpp"

namespace mdlab {

enum class SamplerMode { kSingle, kDual };
enum class StepKind { kAncestral, kDeterministic };
enum class StartParity { kAFirst, kBFirst };

struct SamplerPlan {
  SamplerMode mode = SamplerMode::kSingle;
  StepKind step_kind = StepKind::kAncestral;
  // Which model acts at t = T in dual mode.
  StartParity start = StartParity::kAFirst;
  int n_samples = 1000;
  std::uint64_t seed = 0;
  // Consecutive timesteps one model handles before handing over (dual mode).
  int block_size = 1;
  // Condition token passed to every model call.
  std::optional<int> condition;

  absl::Status Validate() const;
  nlohmann::json ToJson() const;
  static absl::StatusOr<SamplerPlan> FromJson(const nlohmann::json& j);
};

struct SamplerStats {
  int steps_a = 0;
  int steps_b = 0;
};

// Draws x_T ~ N(0, I) and walks t = T..1 with one model. Row i uses the
// substream SubstreamSeed(plan.seed, i): its x_T first, then one noise vector
// per ancestral step with t > 1.
absl::StatusOr<Tensor> SingleSample(const NoisePredictor& model,
                                    const NoiseSchedule& sched,
                                    const SamplerPlan& plan,
                                    SamplerStats* stats = nullptr);

// Same trajectory and noise stream as SingleSample, but the model acting at
// timestep t alternates between `a` and `b` every plan.block_size steps.
absl::StatusOr<Tensor> DualSample(const NoisePredictor& a,
                                  const NoisePredictor& b,
                                  const NoiseSchedule& sched,
                                  const SamplerPlan& plan,
                                  SamplerStats* stats = nullptr);

// Model that acts at timestep t in dual mode: true for `a`.
bool DualUsesA(int t, int num_steps, const SamplerPlan& plan);

// Writes the sample block to `path` and `sidecar` JSON to "<path>.json".
absl::Status WriteSamples(const std::filesystem::path& path,
                          const Tensor& samples, const nlohmann::json& sidecar);

std::string ToString(SamplerMode mode);
std::string ToString(StepKind kind);
std::string ToString(StartParity parity);

}  // namespace mdlab

#endif  // MDLAB_SAMPLER_H_

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

#ifndef MDLAB_TRAINING_H_
#define MDLAB_TRAINING_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "absl/status/statusor.h"
#include "mdlab/dataset.h"
#include "mdlab/denoiser.h"
#include "mdlab/optimizer.h"
#include "mdlab/random.h"
#include "mdlab/schedule.h"
#include "nlohmann/json.hpp"

namespace mdlab {

enum class LrSchedule { kConstant, kCosine };

struct TrainConfig {
  int iterations = 20000;
  int batch_size = 64;
  double learning_rate = 2e-4;
  // kCosine decays the step size from learning_rate to 0 over the run.
  LrSchedule lr_schedule = LrSchedule::kConstant;
  std::uint64_t seed = 0;
  // Feed condition tokens to the model (requires a conditional arch).
  bool conditional = false;
  // Resample each sample's token among its synonyms once per epoch.
  bool diversify = false;

  absl::Status Validate() const;
  nlohmann::json ToJson() const;
  static absl::StatusOr<TrainConfig> FromJson(const nlohmann::json& j);

  // Step size used at 0-based iteration `it`.
  double LearningRateAt(int it) const;
};

struct TrainResult {
  Denoiser model;
  // Per-iteration batch loss.
  std::vector<double> loss_trace;
  // Set when some subset had a single distinct sample.
  std::vector<std::string> warnings;
};

// Plain DDPM training: with-replacement batches, t ~ U{1..T}, eps ~ N(0, I),
// x_t from the closed-form forward process, ||eps - eps_theta||^2 minimized
// with Adam. Zero iterations return the model unchanged.
absl::StatusOr<TrainResult> TrainDdpm(Denoiser model,
                                      std::span<const LabeledSample> data,
                                      const NoiseSchedule& sched,
                                      const TrainConfig& cfg, Rng& rng);

// Which subset and teacher each distillation iteration used.
struct DistillAudit {
  int d1_batches = 0;  // teacher 2
  int d2_batches = 0;  // teacher 1
};

// Alternating distillation. Iteration i (0-based) draws its batch from D1 and
// takes teacher 2's prediction as the target when i is even, and from D2
// with teacher 1 otherwise. Teachers are read-only; only the student moves.
absl::StatusOr<TrainResult> TrainDistillMd(const Denoiser& teacher1,
                                           const Denoiser& teacher2,
                                           const DatasetSplit& split,
                                           Denoiser student,
                                           const NoiseSchedule& sched,
                                           const TrainConfig& cfg, Rng& rng,
                                           DistillAudit* audit = nullptr);

struct GapEstimate {
  // E||eps_theta - eps|| on members minus the same on non-members.
  double gap = 0.0;
  // Standard error of the gap from per-sample means of both sets.
  double standard_error = 0.0;
  double member_mean = 0.0;
  double nonmember_mean = 0.0;

  nlohmann::json ToJson() const;
};

// Monte-Carlo estimate of the train/test gap in denoising error, with
// t ~ U{1..T} and n_mc noise draws per sample.
absl::StatusOr<GapEstimate> GeneralizationGap(
    const Denoiser& model, std::span<const LabeledSample> members,
    std::span<const LabeledSample> nonmembers, const NoiseSchedule& sched,
    int n_mc, Rng& rng);

absl::Status WriteLossTrace(const std::filesystem::path& path,
                            std::span<const double> trace);

}  // namespace mdlab

#endif  // MDLAB_TRAINING_H_

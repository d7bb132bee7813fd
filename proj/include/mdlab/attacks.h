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

#ifndef MDLAB_ATTACKS_H_
#define MDLAB_ATTACKS_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "mdlab/dataset.h"
#include "mdlab/metrics.h"
#include "mdlab/noise_predictor.h"
#include "mdlab/random.h"
#include "mdlab/schedule.h"
#include "mdlab/tensor.h"
#include "nlohmann/json.hpp"

namespace mdlab {

// Mean over t in t_list and n_mc draws of ||eps_theta(x_t, t, c) - eps||^2.
// Lower means member.
absl::StatusOr<double> DenoisingLossScore(const NoisePredictor& model,
                                          const Tensor& x0,
                                          std::optional<int> condition,
                                          const NoiseSchedule& sched,
                                          std::span<const int> t_list,
                                          int n_mc, Rng& rng);

// Batched form: row i draws its noise from MakeRng(SubstreamSeed(seed, i)).
// `conditions` is empty or holds one token per row.
absl::StatusOr<std::vector<double>> DenoisingLossScores(
    const NoisePredictor& model, const Tensor& x0, std::span<const int> conditions,
    const NoiseSchedule& sched, std::span<const int> t_list, int n_mc,
    std::uint64_t seed);

// t-error at t_sec: x~ = ComposeReverse(x0, t_sec), then one reverse step and
// one denoise step, scored as the squared distance back to x~. Lower means
// member. Requires 1 <= t_sec < T.
absl::StatusOr<double> SecMiScore(const NoisePredictor& model, const Tensor& x0,
                                  std::optional<int> condition,
                                  const NoiseSchedule& sched, int t_sec,
                                  int stride = 1);

absl::StatusOr<std::vector<double>> SecMiScores(
    const NoisePredictor& model, const Tensor& x0, std::span<const int> conditions,
    const NoiseSchedule& sched, int t_sec, int stride = 1);

// Mean distance from the target to its k nearest generated samples; k = 1 is
// the minimum distance. Lower means member.
absl::StatusOr<double> BlackboxDistanceScore(const Tensor& generated,
                                             const Tensor& target, int k = 1);

// Scores a list of samples. Sample i of a call uses only `seed` and i, so
// scores do not depend on batching or thread count.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::string name() const = 0;
  virtual Orientation orientation() const = 0;
  virtual nlohmann::json params() const = 0;
  virtual absl::StatusOr<std::vector<double>> Score(
      std::span<const LabeledSample> samples, std::uint64_t seed) const = 0;
};

struct LossAttackParams {
  std::vector<int> t_list;  // empty: ceil(T/10) * j for j = 1..10
  int n_mc = 5;
};

struct SecMiAttackParams {
  int t_sec = 0;  // 0: T / 2
  int stride = 1;
};

struct BlackboxAttackParams {
  int k = 1;
};

// `conditional` feeds each sample's primary token to the model.
std::unique_ptr<Scorer> MakeLossScorer(const NoisePredictor& model,
                                       const NoiseSchedule& sched,
                                       LossAttackParams params,
                                       bool conditional = false);
std::unique_ptr<Scorer> MakeSecMiScorer(const NoisePredictor& model,
                                        const NoiseSchedule& sched,
                                        SecMiAttackParams params,
                                        bool conditional = false);
std::unique_ptr<Scorer> MakeBlackboxScorer(Tensor generated,
                                           BlackboxAttackParams params);

std::vector<int> DefaultLossTimesteps(int num_steps);

struct AttackConfig {
  std::uint64_t seed = 0;
};

// Scores members and non-members. Sample i of either set uses the same
// derived seed, so swapping the two sets swaps the score lists exactly.
absl::StatusOr<AttackScores> RunAttack(const Scorer& scorer,
                                       std::span<const LabeledSample> members,
                                       std::span<const LabeledSample> nonmembers,
                                       const AttackConfig& config);

}  // namespace mdlab

#endif  // MDLAB_ATTACKS_H_

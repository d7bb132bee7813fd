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

#ifndef MDLAB_EXPERIMENT_H_
#define MDLAB_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "mdlab/dataset.h"
#include "mdlab/denoiser.h"
#include "mdlab/sampler.h"
#include "mdlab/schedule.h"
#include "mdlab/training.h"
#include "nlohmann/json.hpp"

namespace mdlab {

inline constexpr int kManifestFormatVersion = 1;

enum class Defense { kNone, kDualMd, kDistillMd };
std::string ToString(Defense d);
absl::StatusOr<Defense> DefenseFromString(std::string_view s);

struct ScheduleConfig {
  int num_timesteps = 100;
  double beta_start = 1e-4;
  double beta_end = 0.05;
};

// Free architecture knobs; data_dim, num_tokens and num_timesteps follow
// from the dataset and schedule.
struct ArchConfig {
  std::vector<int> hidden = {128, 128, 128};
  int embed_dim = 16;
  int fourier_features = 6;
};

struct AttackSpec {
  // "loss", "secmi" or "blackbox".
  std::string name;
  // secmi: every t_sec is tried and the highest-AUC one is reported.
  std::vector<int> t_sec;
  int stride = 1;
  // loss: every timestep list is tried and the highest-AUC one is reported.
  // An empty list stands for the default ceil(T/10) * {1..10}.
  std::vector<std::vector<int>> t_lists;
  int n_mc = 5;
  // blackbox: neighbours averaged per target.
  int k = 1;

  bool white_box() const { return name != "blackbox"; }
};

struct SamplingConfig {
  int n_samples = 1000;
  StepKind step_kind = StepKind::kAncestral;
  // a-first: the model trained on D1 acts at t = T.
  StartParity start = StartParity::kAFirst;
  int block_size = 1;
};

struct EvalConfig {
  // Monte-Carlo draws per sample for generalization gaps.
  int gap_n_mc = 10;
  // Quality is the energy distance to the held-out non-members, and also
  // to this many fresh draws from the data generator.
  int quality_reference = 1000;
  // Memorization radius as a fraction of the median nearest-neighbour
  // distance between distinct members.
  double memorization_eps_fraction = 0.1;
  // Sizes of the near-copy and clean sets for memorization detection.
  int memorized_set_size = 32;
  int clean_set_size = 32;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t master_seed = 1;
  DatasetSpec dataset;
  ScheduleConfig schedule;
  ArchConfig arch;
  TrainConfig train;
  Defense defense = Defense::kNone;
  bool stratified_split = false;
  std::vector<AttackSpec> attacks;
  SamplingConfig sampling;
  EvalConfig eval;
  std::string output_dir = "mdlab_out";

  // Settings used by the acceptance suite: ring data, T = 100, 15k cosine
  // decayed Adam steps, and the secmi/loss/blackbox attacks.
  static ExperimentConfig Default();

  absl::Status Validate() const;
  nlohmann::json ToJson() const;
  // Unknown keys are rejected at every level.
  static absl::StatusOr<ExperimentConfig> FromJson(const nlohmann::json& j);

  DenoiserArch ModelArch() const;
  absl::StatusOr<NoiseSchedule> MakeSchedule() const;
};

absl::StatusOr<ExperimentConfig> LoadExperimentConfig(
    const std::filesystem::path& path);

// Applies "a.b.c=value" overrides (value parsed as JSON, falling back to a
// plain string) to a config JSON object.
absl::Status ApplyOverride(nlohmann::json& config, std::string_view assignment);

struct TrainedModel {
  Denoiser model;
  std::vector<double> loss_trace;
  std::vector<std::string> warnings;
  DistillAudit audit;
  int iterations = 0;
  double seconds = 0.0;
};

// Trained models keyed by everything that determines them, so arms that
// share a stage (the teachers of dualmd and distillmd, the baseline across
// runs) train it once per process.
class ModelCache {
 public:
  using Trainer = std::function<absl::StatusOr<TrainedModel>()>;

  absl::StatusOr<std::shared_ptr<const TrainedModel>> GetOrTrain(
      const std::string& key, const Trainer& train);
  std::size_t size() const { return models_.size(); }
  int hits() const { return hits_; }

 private:
  std::map<std::string, std::shared_ptr<const TrainedModel>> models_;
  int hits_ = 0;
};

// Runs one arm end to end and writes its manifest to
// <output_dir>/manifest.json. On failure a manifest with status "failed"
// records the stage and error, and the error is returned.
absl::StatusOr<nlohmann::json> RunExperiment(const ExperimentConfig& config,
                                             ModelCache* cache = nullptr);

// The metric-bearing part of a manifest: everything except timings and the
// output location.
nlohmann::json MetricBlocks(const nlohmann::json& manifest);

// Re-hashes every artifact listed in a manifest.
absl::Status VerifyManifestArtifacts(const std::filesystem::path& manifest_path);

// Baseline and distillmd arms on the configured (duplicated) dataset, plus
// secmi detection of near-copies of the duplicated member on the baseline.
// Writes <output_dir>/memorization.json.
absl::StatusOr<nlohmann::json> RunMemorizationExperiment(
    const ExperimentConfig& config, ModelCache* cache = nullptr);

// Builds the memorized (near copies of the duplicated member) and clean
// (non-member) point sets.
struct MemorizationSets {
  Tensor memorized;
  Tensor clean;
};
absl::StatusOr<MemorizationSets> BuildMemorizationSets(
    const Dataset& data, const EvalConfig& eval, std::uint64_t seed);

}  // namespace mdlab

#endif  // MDLAB_EXPERIMENT_H_

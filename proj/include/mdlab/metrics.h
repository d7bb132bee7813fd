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

#ifndef MDLAB_METRICS_H_
#define MDLAB_METRICS_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "mdlab/noise_predictor.h"
#include "mdlab/schedule.h"
#include "mdlab/tensor.h"
#include "nlohmann/json.hpp"

namespace mdlab {

enum class Orientation { kLowerMeansMember, kHigherMeansMember };

std::string ToString(Orientation o);
absl::StatusOr<Orientation> OrientationFromString(std::string_view s);

struct AttackScores {
  std::string attack;
  Orientation orientation = Orientation::kLowerMeansMember;
  nlohmann::json params = nlohmann::json::object();
  std::vector<double> member_scores;
  std::vector<double> nonmember_scores;

  absl::Status Validate() const;
  nlohmann::json ToJson() const;
  static absl::StatusOr<AttackScores> FromJson(const nlohmann::json& j);
};

// Pair counts behind the AUC: twice the number of member-beats-nonmember
// pairs (ties contribute one) and the number of pairs, so AUC is their ratio
// over two and comparisons against brute force can be exact.
struct AucCounts {
  std::uint64_t twice_wins = 0;
  std::uint64_t pairs = 0;
  double auc() const { return 0.5 * twice_wins / static_cast<double>(pairs); }
};

// Rank formulation: sorts the pooled scores once and credits ties one half.
absl::StatusOr<AucCounts> ComputeAucCounts(const AttackScores& scores);
absl::StatusOr<double> Auc(const AttackScores& scores);

// Largest TPR over thresholds whose empirical FPR is at most fpr_cap, on the
// step ROC (no interpolation).
absl::StatusOr<double> TprAtFpr(const AttackScores& scores,
                                double fpr_cap = 0.01);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// One point per distinct threshold, from (0, 0) to (1, 1).
absl::StatusOr<std::vector<RocPoint>> RocCurve(const AttackScores& scores);
double TrapezoidArea(std::span<const RocPoint> points);

struct RocReport {
  double auc = 0.5;
  double tpr_at_1pct_fpr = 0.0;
  std::vector<RocPoint> points;
  int n_member = 0;
  int n_nonmember = 0;

  nlohmann::json ToJson() const;
};

absl::StatusOr<RocReport> MakeRocReport(const AttackScores& scores);
absl::Status WriteRocCsv(const std::filesystem::path& path,
                         const RocReport& report);

// V-statistic energy distance 2 E|a - b| - E|a - a'| - E|b - b'| over all
// pairs, including i == j. Symmetric in its arguments bit for bit.
absl::StatusOr<double> EnergyDistance(const Tensor& a, const Tensor& b);

// Fraction of generated rows whose nearest training row is within eps.
absl::StatusOr<double> MemorizationFraction(const Tensor& generated,
                                            const Tensor& train_set,
                                            double eps);

// SecMI scores of the memorized set (treated as members) against the clean
// set, summarized as a RocReport.
absl::StatusOr<RocReport> MemorizationDetection(
    const NoisePredictor& model, const Tensor& memorized_set,
    const Tensor& clean_set, const NoiseSchedule& sched, int t_sec,
    int stride = 1);

}  // namespace mdlab

#endif  // MDLAB_METRICS_H_

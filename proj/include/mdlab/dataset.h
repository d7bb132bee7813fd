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

#ifndef MDLAB_DATASET_H_
#define MDLAB_DATASET_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "mdlab/tensor.h"
#include "nlohmann/json.hpp"

namespace mdlab {

struct LabeledSample {
  Tensor x0;
  // Generator class (mixture mode, roll segment, board cell); -1 if none.
  int label = -1;
  // Condition tokens for conditional datasets: the k synonyms of `label`,
  // token c * k + j for synonym j. Empty for unconditional datasets.
  std::vector<int> tokens;
  bool member = false;
  // Identity of the distinct point this row holds. Duplicated rows share it.
  int source = -1;

  std::optional<int> primary_token() const {
    if (tokens.empty()) return std::nullopt;
    return tokens.front();
  }
};

struct DuplicationSpec {
  // Index of the member to duplicate and the total number of copies it has
  // in the member multiset.
  int index = 0;
  int copies = 100;
};

struct DatasetSpec {
  std::string generator = "gaussian-mixture-ring";
  int n_member = 64;
  int n_test = 64;
  int dim = 2;
  int num_classes = 8;
  // Ring radius / roll radius / board half-width.
  double scale = 2.0;
  // Per-mode standard deviation for the ring, additive noise otherwise.
  double noise = 0.25;
  bool conditional = false;
  // Synonym tokens per class (k), used only by conditional datasets.
  int tokens_per_class = 6;
  std::optional<DuplicationSpec> duplicate;

  absl::Status Validate() const;
  nlohmann::json ToJson() const;
  static absl::StatusOr<DatasetSpec> FromJson(const nlohmann::json& j);
  int num_tokens() const { return conditional ? num_classes * tokens_per_class : 0; }
};

struct Dataset {
  DatasetSpec spec;
  // Member multiset (duplicates included) and held-out non-members.
  std::vector<LabeledSample> members;
  std::vector<LabeledSample> nonmembers;
};

// Members and non-members are drawn i.i.d. from the same generator. Members
// come first in the stream so n_test does not change the member set.
absl::StatusOr<Dataset> GenerateDataset(const DatasetSpec& spec,
                                        std::uint64_t seed);

// Center of mode `c` for the ring generator.
std::vector<double> RingModeCenter(const DatasetSpec& spec, int c);

// Distinct member points (one row per source).
Tensor UniqueMemberPoints(const Dataset& data);
Tensor PointsOf(std::span<const LabeledSample> samples);

// Median over rows of the distance to the nearest other row.
double MedianNearestNeighborDistance(const Tensor& points);

struct DatasetSplit {
  std::vector<LabeledSample> all_samples;
  std::vector<int> d1_indices;
  std::vector<int> d2_indices;
  std::vector<int> test_indices;

  std::vector<LabeledSample> Subset(std::span<const int> indices) const;
  std::vector<LabeledSample> D1() const { return Subset(d1_indices); }
  std::vector<LabeledSample> D2() const { return Subset(d2_indices); }
  std::vector<LabeledSample> Test() const { return Subset(test_indices); }
  std::vector<LabeledSample> Members() const;
};

struct SplitOptions {
  // Balance every class across the two halves.
  bool stratified = false;
};

// Uniformly random balanced partition of the member rows into D1 and D2.
// Rows sharing a `source` (duplicates) always land in the same half, and the
// balance guarantee (sizes differ by at most one) applies to distinct
// sources. Non-member rows pass through into the test indices.
absl::StatusOr<DatasetSplit> SplitDisjoint(std::vector<LabeledSample> samples,
                                           std::uint64_t seed,
                                           SplitOptions options = {});

nlohmann::json SampleToJson(const LabeledSample& s);
absl::StatusOr<LabeledSample> SampleFromJson(const nlohmann::json& j);
nlohmann::json DatasetToJson(const Dataset& data);
absl::StatusOr<Dataset> DatasetFromJson(const nlohmann::json& j);

}  // namespace mdlab

#endif  // MDLAB_DATASET_H_

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

#ifndef MDLAB_REPORT_H_
#define MDLAB_REPORT_H_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"

namespace mdlab {

struct ReportRow {
  std::string arm;
  std::string defense;
  std::string attack;
  std::string target;
  double auc = 0.5;
  double tpr_at_1pct_fpr = 0.0;
  std::optional<double> energy_distance;
  std::optional<double> memorization_fraction;
  // ROC CSV, resolved against the working directory.
  std::string roc_csv;
};

struct ComparisonTable {
  std::vector<ReportRow> rows;

  std::string ToCsv() const;
  // Per attack, the AUC closest to 0.5 is set in bold.
  std::string ToMarkdown() const;
};

// Reads manifests in order. Fails on a format-version mismatch, a failed run,
// artifacts whose hashes no longer match, a missing ROC CSV, or arms trained
// with different budgets.
absl::StatusOr<ComparisonTable> BuildReport(
    const std::vector<std::filesystem::path>& manifests);

}  // namespace mdlab

#endif  // MDLAB_REPORT_H_

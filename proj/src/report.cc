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

#include "mdlab/report.h"

#include <cmath>
#include <map>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "mdlab/experiment.h"
#include "mdlab/io.h"
#include "mdlab/status_macros.h"
#include "nlohmann/json.hpp"

namespace mdlab {
namespace {

std::string Optional(const std::optional<double>& v) {
  return v.has_value() ? absl::StrFormat("%.6g", *v) : "";
}

}  // namespace

std::string ComparisonTable::ToCsv() const {
  std::string out =
      "arm,defense,attack,target,auc,tpr_at_1pct_fpr,energy_distance,"
      "memorization_fraction,roc_csv\n";
  for (const auto& r : rows) {
    absl::StrAppend(&out, r.arm, ",", r.defense, ",", r.attack, ",", r.target,
                    ",", absl::StrFormat("%.6f", r.auc), ",",
                    absl::StrFormat("%.6f", r.tpr_at_1pct_fpr), ",",
                    Optional(r.energy_distance), ",",
                    Optional(r.memorization_fraction), ",", r.roc_csv, "\n");
  }
  return out;
}

std::string ComparisonTable::ToMarkdown() const {
  std::map<std::string, std::size_t> closest;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto it = closest.find(rows[i].attack);
    if (it == closest.end() || std::abs(rows[i].auc - 0.5) <
                                   std::abs(rows[it->second].auc - 0.5)) {
      closest[rows[i].attack] = i;
    }
  }
  std::string out =
      "| arm | defense | attack | target | AUC | TPR@1%FPR | energy distance "
      "| memorization | ROC |\n"
      "|---|---|---|---|---|---|---|---|---|\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    std::string auc = absl::StrFormat("%.3f", r.auc);
    if (closest[r.attack] == i) auc = "**" + auc + "**";
    absl::StrAppend(&out, "| ", r.arm, " | ", r.defense, " | ", r.attack, " | ",
                    r.target, " | ", auc, " | ",
                    absl::StrFormat("%.3f", r.tpr_at_1pct_fpr), " | ",
                    Optional(r.energy_distance), " | ",
                    Optional(r.memorization_fraction), " | ", r.roc_csv,
                    " |\n");
  }
  return out;
}

absl::StatusOr<ComparisonTable> BuildReport(
    const std::vector<std::filesystem::path>& manifests) {
  if (manifests.empty()) {
    return absl::InvalidArgumentError("report needs at least one manifest");
  }
  ComparisonTable table;
  std::optional<nlohmann::json> budget;
  for (const auto& path : manifests) {
    MDLAB_ASSIGN_OR_RETURN(nlohmann::json m, ReadJsonFile(path));
    try {
      const int version = m.at("format_version").get<int>();
      if (version != kManifestFormatVersion) {
        return absl::FailedPreconditionError(absl::StrCat(
            path.string(), ": manifest version ", version, ", expected ",
            kManifestFormatVersion));
      }
      if (m.at("status").get<std::string>() != "ok") {
        return absl::FailedPreconditionError(
            absl::StrCat(path.string(), ": run did not complete"));
      }
      const nlohmann::json& train = m.at("config").at("train");
      const nlohmann::json this_budget = {train.at("iterations"),
                                          train.at("batch_size")};
      if (!budget.has_value()) {
        budget = this_budget;
      } else if (*budget != this_budget) {
        return absl::FailedPreconditionError(absl::StrCat(
            path.string(), ": training budget ", this_budget.dump(),
            " differs from ", budget->dump(), "; compared arms need equal "
            "budgets"));
      }
      MDLAB_RETURN_IF_ERROR(VerifyManifestArtifacts(path));
      const auto& metrics = m.at("metrics");
      const auto root = path.parent_path();
      for (const auto& [key, rep] : metrics.at("reports").items()) {
        ReportRow row;
        row.arm = m.at("name").get<std::string>();
        row.defense = m.at("defense").get<std::string>();
        row.attack = rep.at("attack").get<std::string>();
        row.target = key.substr(key.find('@') + 1);
        row.auc = rep.at("auc").get<double>();
        row.tpr_at_1pct_fpr = rep.at("tpr_at_1pct_fpr").get<double>();
        const auto& quality = metrics.at("quality");
        if (quality.contains(row.target)) {
          row.energy_distance =
              quality.at(row.target).at("energy_distance").get<double>();
        }
        const auto& mem = metrics.at("memorization");
        if (mem.contains("fraction") && mem.at("fraction").contains(row.target)) {
          row.memorization_fraction =
              mem.at("fraction").at(row.target).get<double>();
        }
        const auto roc = root / rep.at("roc_csv").get<std::string>();
        if (!std::filesystem::exists(roc)) {
          return absl::NotFoundError(
              absl::StrCat("ROC CSV ", roc.string(), " is missing"));
        }
        row.roc_csv = roc.generic_string();
        table.rows.push_back(std::move(row));
      }
    } catch (const nlohmann::json::exception& e) {
      return absl::DataLossError(
          absl::StrCat(path.string(), ": malformed manifest: ", e.what()));
    }
  }
  return table;
}

}  // namespace mdlab

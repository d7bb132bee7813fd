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

#include "mdlab/metrics.h"

#include <algorithm>
#include <cmath>
#include <utility>

#include "absl/strings/str_cat.h"
#include "mdlab/attacks.h"
#include "mdlab/io.h"
#include "mdlab/kernels.h"
#include "mdlab/status_macros.h"

namespace mdlab {
namespace {

struct Counted {
  double key;
  bool member;
};

// Pooled scores keyed so that smaller keys look more like members.
std::vector<Counted> SortedKeys(const AttackScores& scores) {
  const double sign =
      scores.orientation == Orientation::kLowerMeansMember ? 1.0 : -1.0;
  std::vector<Counted> all;
  all.reserve(scores.member_scores.size() + scores.nonmember_scores.size());
  for (double s : scores.member_scores) all.push_back({sign * s, true});
  for (double s : scores.nonmember_scores) all.push_back({sign * s, false});
  std::sort(all.begin(), all.end(),
            [](const Counted& a, const Counted& b) { return a.key < b.key; });
  return all;
}

// Visits groups of equal keys in ascending order as (members, nonmembers).
template <typename F>
void ForEachTieGroup(const std::vector<Counted>& sorted, F&& f) {
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    std::uint64_t mm = 0;
    std::uint64_t nn = 0;
    while (j < sorted.size() && sorted[j].key == sorted[i].key) {
      (sorted[j].member ? mm : nn)++;
      ++j;
    }
    f(mm, nn);
    i = j;
  }
}

absl::Status CheckFiniteTensor(const Tensor& t, const char* what) {
  if (t.rank() != 2 || t.rows() == 0) {
    return absl::InvalidArgumentError(
        absl::StrCat(what, " must be a non-empty [n, d] batch, got ",
                     ShapeToString(t.shape())));
  }
  if (!AllFinite(t)) {
    return absl::InvalidArgumentError(absl::StrCat(what, " is not finite"));
  }
  return absl::OkStatus();
}

bool CanonicallyBefore(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return a.shape() < b.shape();
  return std::lexicographical_compare(a.values().begin(), a.values().end(),
                                      b.values().begin(), b.values().end());
}

}  // namespace

std::string ToString(Orientation o) {
  return o == Orientation::kLowerMeansMember ? "lower-means-member"
                                             : "higher-means-member";
}

absl::StatusOr<Orientation> OrientationFromString(std::string_view s) {
  if (s == "lower-means-member") return Orientation::kLowerMeansMember;
  if (s == "higher-means-member") return Orientation::kHigherMeansMember;
  return absl::InvalidArgumentError(absl::StrCat("unknown orientation '", std::string(s), "'"));
}

absl::Status AttackScores::Validate() const {
  if (member_scores.empty() || nonmember_scores.empty()) {
    return absl::InvalidArgumentError("both score lists must be non-empty");
  }
  for (const auto* list : {&member_scores, &nonmember_scores}) {
    for (double s : *list) {
      if (!std::isfinite(s)) {
        return absl::InvalidArgumentError(
            absl::StrCat("non-finite score in attack '", attack, "'"));
      }
    }
  }
  return absl::OkStatus();
}

nlohmann::json AttackScores::ToJson() const {
  return nlohmann::json{{"attack", attack},
                        {"orientation", ToString(orientation)},
                        {"params", params},
                        {"member_scores", member_scores},
                        {"nonmember_scores", nonmember_scores}};
}

absl::StatusOr<AttackScores> AttackScores::FromJson(const nlohmann::json& j) {
  AttackScores s;
  try {
    s.attack = j.at("attack").get<std::string>();
    MDLAB_ASSIGN_OR_RETURN(
        s.orientation,
        OrientationFromString(j.at("orientation").get<std::string>()));
    s.params = j.at("params");
    s.member_scores = j.at("member_scores").get<std::vector<double>>();
    s.nonmember_scores = j.at("nonmember_scores").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("malformed attack scores: ", e.what()));
  }
  MDLAB_RETURN_IF_ERROR(s.Validate());
  return s;
}

absl::StatusOr<AucCounts> ComputeAucCounts(const AttackScores& scores) {
  MDLAB_RETURN_IF_ERROR(scores.Validate());
  const std::uint64_t m = scores.nonmember_scores.size();
  AucCounts c;
  c.pairs = scores.member_scores.size() * m;
  std::uint64_t below = 0;  // nonmembers with a strictly smaller key
  ForEachTieGroup(SortedKeys(scores), [&](std::uint64_t mm, std::uint64_t nn) {
    c.twice_wins += mm * (2 * (m - below - nn) + nn);
    below += nn;
  });
  return c;
}

absl::StatusOr<double> Auc(const AttackScores& scores) {
  MDLAB_ASSIGN_OR_RETURN(AucCounts c, ComputeAucCounts(scores));
  return c.auc();
}

absl::StatusOr<std::vector<RocPoint>> RocCurve(const AttackScores& scores) {
  MDLAB_RETURN_IF_ERROR(scores.Validate());
  const double n = static_cast<double>(scores.member_scores.size());
  const double m = static_cast<double>(scores.nonmember_scores.size());
  std::vector<RocPoint> points{{0.0, 0.0}};
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  ForEachTieGroup(SortedKeys(scores), [&](std::uint64_t mm, std::uint64_t nn) {
    tp += mm;
    fp += nn;
    points.push_back({static_cast<double>(fp) / m, static_cast<double>(tp) / n});
  });
  return points;
}

double TrapezoidArea(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += 0.5 * (points[i].fpr - points[i - 1].fpr) *
            (points[i].tpr + points[i - 1].tpr);
  }
  return area;
}

absl::StatusOr<double> TprAtFpr(const AttackScores& scores, double fpr_cap) {
  if (!(fpr_cap >= 0.0 && fpr_cap <= 1.0)) {
    return absl::InvalidArgumentError("fpr_cap must lie in [0, 1]");
  }
  MDLAB_RETURN_IF_ERROR(scores.Validate());
  const double m = static_cast<double>(scores.nonmember_scores.size());
  const double n = static_cast<double>(scores.member_scores.size());
  double best = 0.0;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  ForEachTieGroup(SortedKeys(scores), [&](std::uint64_t mm, std::uint64_t nn) {
    tp += mm;
    fp += nn;
    if (static_cast<double>(fp) <= fpr_cap * m) {
      best = std::max(best, static_cast<double>(tp) / n);
    }
  });
  return best;
}

nlohmann::json RocReport::ToJson() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : points) pts.push_back({p.fpr, p.tpr});
  return nlohmann::json{{"auc", auc},
                        {"tpr_at_1pct_fpr", tpr_at_1pct_fpr},
                        {"n_member", n_member},
                        {"n_nonmember", n_nonmember},
                        {"roc", pts}};
}

absl::StatusOr<RocReport> MakeRocReport(const AttackScores& scores) {
  RocReport r;
  MDLAB_ASSIGN_OR_RETURN(r.auc, Auc(scores));
  MDLAB_ASSIGN_OR_RETURN(r.tpr_at_1pct_fpr, TprAtFpr(scores, 0.01));
  MDLAB_ASSIGN_OR_RETURN(r.points, RocCurve(scores));
  r.n_member = static_cast<int>(scores.member_scores.size());
  r.n_nonmember = static_cast<int>(scores.nonmember_scores.size());
  return r;
}

absl::Status WriteRocCsv(const std::filesystem::path& path,
                         const RocReport& report) {
  std::vector<std::vector<double>> rows;
  rows.reserve(report.points.size());
  for (const auto& p : report.points) rows.push_back({p.fpr, p.tpr});
  return WriteCsv(path, {"fpr", "tpr"}, rows);
}

absl::StatusOr<double> EnergyDistance(const Tensor& a, const Tensor& b) {
  MDLAB_RETURN_IF_ERROR(CheckFiniteTensor(a, "first sample batch"));
  MDLAB_RETURN_IF_ERROR(CheckFiniteTensor(b, "second sample batch"));
  if (a.cols() != b.cols()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "energy distance dimension mismatch: ", a.cols(), " vs ", b.cols()));
  }
  const Tensor* x = &a;
  const Tensor* y = &b;
  if (CanonicallyBefore(b, a)) std::swap(x, y);
  const std::size_t n = x->rows();
  const std::size_t m = y->rows();
  const std::size_t d = x->cols();
  const double cross =
      kernels::PairwiseDistanceSum(x->data(), n, y->data(), m, d) /
      (static_cast<double>(n) * m);
  const double within_x =
      kernels::PairwiseDistanceSum(x->data(), n, x->data(), n, d) /
      (static_cast<double>(n) * n);
  const double within_y =
      kernels::PairwiseDistanceSum(y->data(), m, y->data(), m, d) /
      (static_cast<double>(m) * m);
  return std::max(0.0, 2.0 * cross - (within_x + within_y));
}

absl::StatusOr<double> MemorizationFraction(const Tensor& generated,
                                            const Tensor& train_set,
                                            double eps) {
  if (!(eps > 0.0)) return absl::InvalidArgumentError("eps must be > 0");
  MDLAB_RETURN_IF_ERROR(CheckFiniteTensor(generated, "generated batch"));
  MDLAB_RETURN_IF_ERROR(CheckFiniteTensor(train_set, "training set"));
  if (generated.cols() != train_set.cols()) {
    return absl::InvalidArgumentError("generated/training dimension mismatch");
  }
  const std::vector<double> nn = kernels::NearestDistances(
      generated.data(), generated.rows(), train_set.data(), train_set.rows(),
      generated.cols(), 1);
  std::size_t hits = 0;
  for (double v : nn) hits += v <= eps ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(nn.size());
}

absl::StatusOr<RocReport> MemorizationDetection(
    const NoisePredictor& model, const Tensor& memorized_set,
    const Tensor& clean_set, const NoiseSchedule& sched, int t_sec,
    int stride) {
  MDLAB_RETURN_IF_ERROR(CheckFiniteTensor(memorized_set, "memorized set"));
  MDLAB_RETURN_IF_ERROR(CheckFiniteTensor(clean_set, "clean set"));
  AttackScores scores;
  scores.attack = "secmi";
  scores.orientation = Orientation::kLowerMeansMember;
  scores.params = {{"t_sec", t_sec}, {"stride", stride}};
  MDLAB_ASSIGN_OR_RETURN(
      scores.member_scores,
      SecMiScores(model, memorized_set, {}, sched, t_sec, stride));
  MDLAB_ASSIGN_OR_RETURN(
      scores.nonmember_scores,
      SecMiScores(model, clean_set, {}, sched, t_sec, stride));
  return MakeRocReport(scores);
}

}  // namespace mdlab

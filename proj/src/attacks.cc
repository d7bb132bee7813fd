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

#include "mdlab/attacks.h"

#include <cmath>
#include <map>
#include <utility>

#include "absl/strings/str_cat.h"
#include "mdlab/diffusion.h"
#include "mdlab/kernels.h"
#include "mdlab/status_macros.h"

namespace mdlab {
namespace {

absl::StatusOr<Tensor> AsBatch(const Tensor& x, std::size_t d) {
  if (x.rank() == 1) {
    if (x.size() != d) {
      return absl::InvalidArgumentError(
          absl::StrCat("point dimension ", x.size(), " != ", d));
    }
    return x.Reshaped(Shape{1, d});
  }
  if (x.rank() != 2 || x.cols() != d) {
    return absl::InvalidArgumentError(absl::StrCat(
        "expected [n, ", d, "] input, got ", ShapeToString(x.shape())));
  }
  return x;
}

absl::Status CheckConditions(std::span<const int> conditions, std::size_t n) {
  if (!conditions.empty() && conditions.size() != n) {
    return absl::InvalidArgumentError(absl::StrCat(
        "expected ", n, " condition tokens, got ", conditions.size()));
  }
  return absl::OkStatus();
}

std::vector<int> Tokens(std::span<const LabeledSample> samples,
                        bool conditional) {
  std::vector<int> out;
  if (!conditional) return out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.primary_token().value_or(-1));
  return out;
}

absl::StatusOr<Tensor> Points(std::span<const LabeledSample> samples) {
  if (samples.empty()) return absl::InvalidArgumentError("no samples to score");
  const std::size_t d = samples.front().x0.size();
  for (const auto& s : samples) {
    if (s.x0.size() != d) {
      return absl::InvalidArgumentError("samples differ in dimension");
    }
  }
  return PointsOf(samples);
}

// SecMI on rows sharing one condition.
absl::StatusOr<std::vector<double>> SecMiGroup(const NoisePredictor& model,
                                               const Tensor& x0,
                                               std::optional<int> cond,
                                               const NoiseSchedule& sched,
                                               int t_sec, int stride) {
  MDLAB_ASSIGN_OR_RETURN(Tensor x_tilde,
                         ComposeReverse(model, x0, t_sec, sched, stride, cond));
  MDLAB_ASSIGN_OR_RETURN(Tensor up,
                         DdimReverseStep(model, x_tilde, t_sec, sched, cond));
  MDLAB_ASSIGN_OR_RETURN(Tensor back,
                         DdimDenoiseStep(model, up, t_sec + 1, sched, cond));
  std::vector<double> out(x0.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = SquaredDistance(back.row(i), x_tilde.row(i));
  }
  return out;
}

class LossScorer : public Scorer {
 public:
  LossScorer(const NoisePredictor& model, const NoiseSchedule& sched,
             LossAttackParams params, bool conditional)
      : model_(model),
        sched_(sched),
        params_(std::move(params)),
        conditional_(conditional) {
    if (params_.t_list.empty()) {
      params_.t_list = DefaultLossTimesteps(sched.num_steps());
    }
  }
  std::string name() const override { return "loss"; }
  Orientation orientation() const override {
    return Orientation::kLowerMeansMember;
  }
  nlohmann::json params() const override {
    return {{"t_list", params_.t_list},
            {"n_mc", params_.n_mc},
            {"conditional", conditional_}};
  }
  absl::StatusOr<std::vector<double>> Score(
      std::span<const LabeledSample> samples,
      std::uint64_t seed) const override {
    MDLAB_ASSIGN_OR_RETURN(Tensor x0, Points(samples));
    return DenoisingLossScores(model_, x0, Tokens(samples, conditional_),
                               sched_, params_.t_list, params_.n_mc, seed);
  }

 private:
  const NoisePredictor& model_;
  const NoiseSchedule& sched_;
  LossAttackParams params_;
  bool conditional_;
};

class SecMiScorer : public Scorer {
 public:
  SecMiScorer(const NoisePredictor& model, const NoiseSchedule& sched,
              SecMiAttackParams params, bool conditional)
      : model_(model), sched_(sched), params_(params), conditional_(conditional) {
    if (params_.t_sec == 0) params_.t_sec = sched.num_steps() / 2;
  }
  std::string name() const override { return "secmi"; }
  Orientation orientation() const override {
    return Orientation::kLowerMeansMember;
  }
  nlohmann::json params() const override {
    return {{"t_sec", params_.t_sec},
            {"stride", params_.stride},
            {"conditional", conditional_}};
  }
  absl::StatusOr<std::vector<double>> Score(
      std::span<const LabeledSample> samples, std::uint64_t) const override {
    MDLAB_ASSIGN_OR_RETURN(Tensor x0, Points(samples));
    return SecMiScores(model_, x0, Tokens(samples, conditional_), sched_,
                       params_.t_sec, params_.stride);
  }

 private:
  const NoisePredictor& model_;
  const NoiseSchedule& sched_;
  SecMiAttackParams params_;
  bool conditional_;
};

class BlackboxScorer : public Scorer {
 public:
  BlackboxScorer(Tensor generated, BlackboxAttackParams params)
      : generated_(std::move(generated)), params_(params) {}
  std::string name() const override { return "blackbox"; }
  Orientation orientation() const override {
    return Orientation::kLowerMeansMember;
  }
  nlohmann::json params() const override {
    return {{"k", params_.k}, {"n_generated", generated_.rows()}};
  }
  absl::StatusOr<std::vector<double>> Score(
      std::span<const LabeledSample> samples, std::uint64_t) const override {
    MDLAB_ASSIGN_OR_RETURN(Tensor x0, Points(samples));
    if (generated_.rank() != 2 || generated_.rows() == 0) {
      return absl::InvalidArgumentError("generated batch is empty");
    }
    if (generated_.cols() != x0.cols()) {
      return absl::InvalidArgumentError(absl::StrCat(
          "generated dimension ", generated_.cols(), " != target dimension ",
          x0.cols()));
    }
    if (params_.k < 1 || static_cast<std::size_t>(params_.k) > generated_.rows()) {
      return absl::InvalidArgumentError("k must lie in [1, n_generated]");
    }
    return kernels::NearestDistances(x0.data(), x0.rows(), generated_.data(),
                                     generated_.rows(), x0.cols(), params_.k);
  }

 private:
  Tensor generated_;
  BlackboxAttackParams params_;
};

}  // namespace

std::vector<int> DefaultLossTimesteps(int num_steps) {
  const int step = (num_steps + 9) / 10;
  std::vector<int> out;
  for (int j = 1; j <= 10 && step * j <= num_steps; ++j) out.push_back(step * j);
  return out;
}

absl::StatusOr<std::vector<double>> DenoisingLossScores(
    const NoisePredictor& model, const Tensor& x0_in,
    std::span<const int> conditions, const NoiseSchedule& sched,
    std::span<const int> t_list, int n_mc, std::uint64_t seed) {
  if (t_list.empty()) return absl::InvalidArgumentError("t_list is empty");
  if (n_mc < 1) return absl::InvalidArgumentError("n_mc must be >= 1");
  for (int t : t_list) MDLAB_RETURN_IF_ERROR(sched.CheckTimestep(t));
  const std::size_t d = model.data_dim();
  MDLAB_ASSIGN_OR_RETURN(Tensor x0, AsBatch(x0_in, d));
  const std::size_t n = x0.rows();
  MDLAB_RETURN_IF_ERROR(CheckConditions(conditions, n));
  const std::size_t per = t_list.size() * n_mc;
  const std::size_t rows = n * per;

  Tensor x_t(Shape{rows, d});
  Tensor eps(Shape{rows, d});
  std::vector<int> ts(rows);
  std::vector<int> conds;
  if (!conditions.empty()) conds.resize(rows);
#pragma omp parallel for schedule(static) if (rows > 4096)
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = MakeRng(SubstreamSeed(seed, i));
    std::size_t r = i * per;
    for (int t : t_list) {
      const double sa = std::sqrt(sched.alpha_bar(t));
      const double sn = std::sqrt(1.0 - sched.alpha_bar(t));
      for (int k = 0; k < n_mc; ++k, ++r) {
        ts[r] = t;
        if (!conds.empty()) conds[r] = conditions[i];
        auto src = x0.row(i);
        auto xr = x_t.row(r);
        auto er = eps.row(r);
        for (std::size_t l = 0; l < d; ++l) {
          er[l] = StandardNormal(rng);
          xr[l] = static_cast<float>(sa * src[l] + sn * er[l]);
        }
      }
    }
  }
  MDLAB_ASSIGN_OR_RETURN(Tensor pred, model.PredictNoise(x_t, ts, conds));
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t r = i * per; r < (i + 1) * per; ++r) {
      s += SquaredDistance(pred.row(r), eps.row(r));
    }
    out[i] = s / static_cast<double>(per);
  }
  return out;
}

absl::StatusOr<double> DenoisingLossScore(const NoisePredictor& model,
                                          const Tensor& x0,
                                          std::optional<int> condition,
                                          const NoiseSchedule& sched,
                                          std::span<const int> t_list,
                                          int n_mc, Rng& rng) {
  std::vector<int> conds;
  if (condition.has_value()) conds.push_back(*condition);
  const std::uint64_t seed = rng();
  MDLAB_ASSIGN_OR_RETURN(auto scores, DenoisingLossScores(model, x0, conds, sched,
                                                          t_list, n_mc, seed));
  if (scores.size() != 1) {
    return absl::InvalidArgumentError("expected a single point");
  }
  return scores.front();
}

absl::StatusOr<std::vector<double>> SecMiScores(
    const NoisePredictor& model, const Tensor& x0_in,
    std::span<const int> conditions, const NoiseSchedule& sched, int t_sec,
    int stride) {
  if (t_sec < 1 || t_sec >= sched.num_steps()) {
    return absl::OutOfRangeError(absl::StrCat(
        "t_sec = ", t_sec, " outside [1, ", sched.num_steps() - 1, "]"));
  }
  const std::size_t d = model.data_dim();
  MDLAB_ASSIGN_OR_RETURN(Tensor x0, AsBatch(x0_in, d));
  MDLAB_RETURN_IF_ERROR(CheckConditions(conditions, x0.rows()));
  if (conditions.empty()) {
    return SecMiGroup(model, x0, std::nullopt, sched, t_sec, stride);
  }
  // Rows are grouped by token so every group is one batched trajectory.
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    groups[conditions[i]].push_back(i);
  }
  std::vector<double> out(x0.rows());
  for (const auto& [token, rows] : groups) {
    Tensor sub(Shape{rows.size(), d});
    for (std::size_t r = 0; r < rows.size(); ++r) {
      auto src = x0.row(rows[r]);
      std::copy(src.begin(), src.end(), sub.row(r).begin());
    }
    MDLAB_ASSIGN_OR_RETURN(auto s,
                           SecMiGroup(model, sub, token, sched, t_sec, stride));
    for (std::size_t r = 0; r < rows.size(); ++r) out[rows[r]] = s[r];
  }
  return out;
}

absl::StatusOr<double> SecMiScore(const NoisePredictor& model, const Tensor& x0,
                                  std::optional<int> condition,
                                  const NoiseSchedule& sched, int t_sec,
                                  int stride) {
  std::vector<int> conds;
  if (condition.has_value()) conds.push_back(*condition);
  MDLAB_ASSIGN_OR_RETURN(auto s,
                         SecMiScores(model, x0, conds, sched, t_sec, stride));
  if (s.size() != 1) return absl::InvalidArgumentError("expected a single point");
  return s.front();
}

absl::StatusOr<double> BlackboxDistanceScore(const Tensor& generated,
                                             const Tensor& target, int k) {
  if (generated.rank() != 2 || generated.rows() == 0) {
    return absl::InvalidArgumentError("generated batch must be [n, d], n >= 1");
  }
  const std::size_t d = generated.cols();
  if (target.size() != d) {
    return absl::InvalidArgumentError(absl::StrCat(
        "target dimension ", target.size(), " != generated dimension ", d));
  }
  if (k < 1 || static_cast<std::size_t>(k) > generated.rows()) {
    return absl::InvalidArgumentError("k must lie in [1, n_generated]");
  }
  return kernels::NearestDistances(target.data(), 1, generated.data(),
                                   generated.rows(), d, k)
      .front();
}

std::unique_ptr<Scorer> MakeLossScorer(const NoisePredictor& model,
                                       const NoiseSchedule& sched,
                                       LossAttackParams params,
                                       bool conditional) {
  return std::make_unique<LossScorer>(model, sched, std::move(params),
                                      conditional);
}

std::unique_ptr<Scorer> MakeSecMiScorer(const NoisePredictor& model,
                                        const NoiseSchedule& sched,
                                        SecMiAttackParams params,
                                        bool conditional) {
  return std::make_unique<SecMiScorer>(model, sched, params, conditional);
}

std::unique_ptr<Scorer> MakeBlackboxScorer(Tensor generated,
                                           BlackboxAttackParams params) {
  return std::make_unique<BlackboxScorer>(std::move(generated), params);
}

absl::StatusOr<AttackScores> RunAttack(const Scorer& scorer,
                                       std::span<const LabeledSample> members,
                                       std::span<const LabeledSample> nonmembers,
                                       const AttackConfig& config) {
  if (members.empty() || nonmembers.empty()) {
    return absl::InvalidArgumentError("member and non-member sets must be non-empty");
  }
  AttackScores out;
  out.attack = scorer.name();
  out.orientation = scorer.orientation();
  out.params = scorer.params();
  out.params["seed"] = config.seed;
  MDLAB_ASSIGN_OR_RETURN(out.member_scores, scorer.Score(members, config.seed));
  MDLAB_ASSIGN_OR_RETURN(out.nonmember_scores,
                         scorer.Score(nonmembers, config.seed));
  MDLAB_RETURN_IF_ERROR(out.Validate());
  return out;
}

}  // namespace mdlab

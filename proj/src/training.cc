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

#include "mdlab/training.h"

#include <cmath>
#include <numbers>
#include <set>
#include <utility>

#include "absl/strings/str_cat.h"
#include "mdlab/io.h"
#include "mdlab/status_macros.h"

namespace mdlab {
namespace {

// Per-epoch token assignment for one data subset.
class TokenPlan {
 public:
  TokenPlan(std::span<const LabeledSample> data, int batch_size,
            bool conditional, bool diversify)
      : data_(data),
        conditional_(conditional),
        diversify_(diversify),
        epoch_length_(std::max<std::size_t>(
            1, (data.size() + batch_size - 1) / batch_size)),
        tokens_(data.size(), 0) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!data[i].tokens.empty()) tokens_[i] = data[i].tokens.front();
    }
  }

  // Called with the subset's own iteration counter before each batch.
  void MaybeResample(std::int64_t iteration, Rng& rng) {
    if (!conditional_ || !diversify_) return;
    if (iteration % static_cast<std::int64_t>(epoch_length_) != 0) return;
    for (std::size_t i = 0; i < data_.size(); ++i) {
      const auto& toks = data_[i].tokens;
      tokens_[i] = toks[UniformInt(rng, 0, static_cast<int>(toks.size()) - 1)];
    }
  }

  int token(std::size_t i) const { return tokens_[i]; }

 private:
  std::span<const LabeledSample> data_;
  bool conditional_;
  bool diversify_;
  std::size_t epoch_length_;
  std::vector<int> tokens_;
};

struct NoisyBatch {
  Tensor x_t;
  Tensor eps;
  std::vector<int> timesteps;
  std::vector<int> conditions;
};

// Draws a with-replacement batch, timesteps, noise, and forms x_t.
NoisyBatch DrawNoisyBatch(std::span<const LabeledSample> data,
                          const TokenPlan& tokens, bool conditional,
                          int batch_size, const NoiseSchedule& sched,
                          Rng& rng) {
  const std::size_t d = data.front().x0.size();
  NoisyBatch b;
  b.x_t = Tensor(Shape{static_cast<std::size_t>(batch_size), d});
  b.eps = Tensor(Shape{static_cast<std::size_t>(batch_size), d});
  b.timesteps.resize(batch_size);
  if (conditional) b.conditions.resize(batch_size);
  const int n = static_cast<int>(data.size());
  for (int r = 0; r < batch_size; ++r) {
    const int idx = UniformInt(rng, 0, n - 1);
    const int t = UniformInt(rng, 1, sched.num_steps());
    b.timesteps[r] = t;
    if (conditional) b.conditions[r] = tokens.token(idx);
    const double sa = std::sqrt(sched.alpha_bar(t));
    const double sn = std::sqrt(1.0 - sched.alpha_bar(t));
    auto x0 = data[idx].x0.data();
    auto xr = b.x_t.row(r);
    auto er = b.eps.row(r);
    for (std::size_t l = 0; l < d; ++l) {
      er[l] = StandardNormal(rng);
      xr[l] = static_cast<float>(sa * x0[l] + sn * er[l]);
    }
  }
  return b;
}

absl::Status CheckTrainable(const Denoiser& model,
                            std::span<const LabeledSample> data,
                            const TrainConfig& cfg,
                            const NoiseSchedule& sched) {
  MDLAB_RETURN_IF_ERROR(cfg.Validate());
  if (data.empty()) return absl::InvalidArgumentError("training data is empty");
  if (model.arch().num_timesteps != sched.num_steps()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "model embeds T = ", model.arch().num_timesteps,
        " but the schedule has T = ", sched.num_steps()));
  }
  if (cfg.conditional != model.arch().conditional()) {
    return absl::InvalidArgumentError(
        "TrainConfig.conditional must match the model architecture");
  }
  for (const auto& s : data) {
    if (s.x0.size() != model.data_dim()) {
      return absl::InvalidArgumentError(absl::StrCat(
          "sample dimension ", s.x0.size(), " != model dimension ",
          model.data_dim()));
    }
    if (cfg.conditional && s.tokens.empty()) {
      return absl::InvalidArgumentError(
          "conditional training needs every sample to carry a token");
    }
  }
  return absl::OkStatus();
}

std::size_t DistinctSources(std::span<const LabeledSample> data) {
  std::set<int> s;
  for (const auto& x : data) s.insert(x.source);
  return s.size();
}

}  // namespace

absl::Status TrainConfig::Validate() const {
  if (iterations < 0) return absl::InvalidArgumentError("iterations must be >= 0");
  if (batch_size < 1) return absl::InvalidArgumentError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) {
    return absl::InvalidArgumentError("learning_rate must be > 0");
  }
  return absl::OkStatus();
}

double TrainConfig::LearningRateAt(int it) const {
  if (lr_schedule == LrSchedule::kConstant || iterations <= 0) {
    return learning_rate;
  }
  const double progress = static_cast<double>(it) / iterations;
  return learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

nlohmann::json TrainConfig::ToJson() const {
  return nlohmann::json{{"iterations", iterations},
                        {"batch_size", batch_size},
                        {"learning_rate", learning_rate},
                        {"lr_schedule", lr_schedule == LrSchedule::kConstant
                                            ? "constant"
                                            : "cosine"},
                        {"seed", seed},
                        {"conditional", conditional},
                        {"diversify", diversify}};
}

absl::StatusOr<TrainConfig> TrainConfig::FromJson(const nlohmann::json& j) {
  TrainConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "iterations") {
        cfg.iterations = value.get<int>();
      } else if (key == "batch_size") {
        cfg.batch_size = value.get<int>();
      } else if (key == "learning_rate") {
        cfg.learning_rate = value.get<double>();
      } else if (key == "lr_schedule") {
        const auto name = value.get<std::string>();
        if (name == "constant") {
          cfg.lr_schedule = LrSchedule::kConstant;
        } else if (name == "cosine") {
          cfg.lr_schedule = LrSchedule::kCosine;
        } else {
          return absl::InvalidArgumentError(
              absl::StrCat("unknown lr_schedule '", name, "'"));
        }
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else if (key == "conditional") {
        cfg.conditional = value.get<bool>();
      } else if (key == "diversify") {
        cfg.diversify = value.get<bool>();
      } else {
        return absl::InvalidArgumentError(
            absl::StrCat("unknown key '", key, "' in train"));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("malformed train config: ", e.what()));
  }
  MDLAB_RETURN_IF_ERROR(cfg.Validate());
  return cfg;
}

absl::StatusOr<TrainResult> TrainDdpm(Denoiser model,
                                      std::span<const LabeledSample> data,
                                      const NoiseSchedule& sched,
                                      const TrainConfig& cfg, Rng& rng) {
  MDLAB_RETURN_IF_ERROR(CheckTrainable(model, data, cfg, sched));
  TrainResult result{std::move(model), {}, {}};
  if (DistinctSources(data) == 1) {
    result.warnings.push_back("training subset holds a single distinct sample");
  }
  OptimizerState opt = OptimizerState::ForParameters(
      result.model.params(), AdamOptions{.learning_rate = cfg.learning_rate});
  TokenPlan tokens(data, cfg.batch_size, cfg.conditional, cfg.diversify);
  result.loss_trace.reserve(cfg.iterations);
  for (int it = 0; it < cfg.iterations; ++it) {
    tokens.MaybeResample(it, rng);
    NoisyBatch b = DrawNoisyBatch(data, tokens, cfg.conditional,
                                  cfg.batch_size, sched, rng);
    MDLAB_ASSIGN_OR_RETURN(
        LossAndGrads lg, result.model.ComputeLossAndGrads(
                             b.x_t, b.timesteps, b.conditions, b.eps));
    if (!std::isfinite(lg.loss)) {
      return absl::InternalError(absl::StrCat(
          "non-finite training loss at iteration ", it, " (loss = ", lg.loss,
          "); lower the learning rate or check the data scale"));
    }
    result.loss_trace.push_back(lg.loss);
    opt.options.learning_rate = cfg.LearningRateAt(it);
    MDLAB_RETURN_IF_ERROR(
        AdamUpdate(result.model.mutable_params(), lg.grads, opt));
  }
  return result;
}

absl::StatusOr<TrainResult> TrainDistillMd(const Denoiser& teacher1,
                                           const Denoiser& teacher2,
                                           const DatasetSplit& split,
                                           Denoiser student,
                                           const NoiseSchedule& sched,
                                           const TrainConfig& cfg, Rng& rng,
                                           DistillAudit* audit) {
  if (teacher1.data_dim() != student.data_dim() ||
      teacher2.data_dim() != student.data_dim()) {
    return absl::InvalidArgumentError(
        "teacher and student input dimensions differ");
  }
  if (cfg.conditional && (!teacher1.arch().conditional() ||
                          !teacher2.arch().conditional())) {
    return absl::InvalidArgumentError(
        "conditional distillation needs conditional teachers");
  }
  const std::vector<LabeledSample> d1 = split.D1();
  const std::vector<LabeledSample> d2 = split.D2();
  if (d1.empty() || d2.empty()) {
    return absl::InvalidArgumentError("both subsets must be non-empty");
  }
  MDLAB_RETURN_IF_ERROR(CheckTrainable(student, d1, cfg, sched));
  MDLAB_RETURN_IF_ERROR(CheckTrainable(student, d2, cfg, sched));

  TrainResult result{std::move(student), {}, {}};
  if (DistinctSources(d1) == 1 || DistinctSources(d2) == 1) {
    result.warnings.push_back("a distillation subset holds a single sample");
  }
  OptimizerState opt = OptimizerState::ForParameters(
      result.model.params(), AdamOptions{.learning_rate = cfg.learning_rate});
  TokenPlan tokens1(d1, cfg.batch_size, cfg.conditional, cfg.diversify);
  TokenPlan tokens2(d2, cfg.batch_size, cfg.conditional, cfg.diversify);
  std::int64_t it1 = 0;
  std::int64_t it2 = 0;
  result.loss_trace.reserve(cfg.iterations);
  for (int it = 0; it < cfg.iterations; ++it) {
    const bool even = it % 2 == 0;
    const std::vector<LabeledSample>& subset = even ? d1 : d2;
    TokenPlan& tokens = even ? tokens1 : tokens2;
    const Denoiser& teacher = even ? teacher2 : teacher1;
    tokens.MaybeResample(even ? it1++ : it2++, rng);
    if (audit != nullptr) (even ? audit->d1_batches : audit->d2_batches)++;

    NoisyBatch b = DrawNoisyBatch(subset, tokens, cfg.conditional,
                                  cfg.batch_size, sched, rng);
    // Stop-gradient: the teacher output enters only as a constant target.
    MDLAB_ASSIGN_OR_RETURN(
        std::vector<double> target,
        teacher.PredictNoiseUnrounded(b.x_t, b.timesteps, b.conditions));
    MDLAB_ASSIGN_OR_RETURN(
        LossAndGrads lg,
        result.model.ComputeLossAndGrads(b.x_t, b.timesteps, b.conditions,
                                         std::span<const double>(target)));
    if (!std::isfinite(lg.loss)) {
      return absl::InternalError(absl::StrCat(
          "non-finite distillation loss at iteration ", it));
    }
    result.loss_trace.push_back(lg.loss);
    opt.options.learning_rate = cfg.LearningRateAt(it);
    MDLAB_RETURN_IF_ERROR(
        AdamUpdate(result.model.mutable_params(), lg.grads, opt));
  }
  return result;
}

nlohmann::json GapEstimate::ToJson() const {
  return nlohmann::json{{"gap", gap},
                        {"standard_error", standard_error},
                        {"member_mean", member_mean},
                        {"nonmember_mean", nonmember_mean}};
}

namespace {

// Mean over n_mc draws of ||eps_theta(x_t, t, c) - eps|| for every sample.
absl::StatusOr<std::vector<double>> PerSampleDenoisingError(
    const Denoiser& model, std::span<const LabeledSample> samples,
    const NoiseSchedule& sched, int n_mc, Rng& rng) {
  const std::size_t d = model.data_dim();
  const std::size_t rows = samples.size() * n_mc;
  Tensor x_t(Shape{rows, d});
  Tensor eps(Shape{rows, d});
  std::vector<int> ts(rows);
  std::vector<int> conds;
  if (model.arch().conditional()) conds.resize(rows);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].x0.size() != d) {
      return absl::InvalidArgumentError("sample dimension mismatch");
    }
    for (int k = 0; k < n_mc; ++k) {
      const std::size_t r = i * n_mc + k;
      const int t = UniformInt(rng, 1, sched.num_steps());
      ts[r] = t;
      if (!conds.empty()) {
        if (samples[i].tokens.empty()) {
          return absl::InvalidArgumentError("conditional model needs tokens");
        }
        conds[r] = samples[i].tokens.front();
      }
      const double sa = std::sqrt(sched.alpha_bar(t));
      const double sn = std::sqrt(1.0 - sched.alpha_bar(t));
      auto x0 = samples[i].x0.data();
      auto xr = x_t.row(r);
      auto er = eps.row(r);
      for (std::size_t l = 0; l < d; ++l) {
        er[l] = StandardNormal(rng);
        xr[l] = static_cast<float>(sa * x0[l] + sn * er[l]);
      }
    }
  }
  MDLAB_ASSIGN_OR_RETURN(Tensor pred, model.PredictNoise(x_t, ts, conds));
  std::vector<double> out(samples.size(), 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double s = 0.0;
    for (int k = 0; k < n_mc; ++k) {
      const std::size_t r = i * n_mc + k;
      s += std::sqrt(SquaredDistance(pred.row(r), eps.row(r)));
    }
    out[i] = s / n_mc;
  }
  return out;
}

std::pair<double, double> MeanAndVarianceOfMean(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double var =
      v.size() > 1 ? ss / static_cast<double>(v.size() - 1) : 0.0;
  return {mean, var / static_cast<double>(v.size())};
}

}  // namespace

absl::StatusOr<GapEstimate> GeneralizationGap(
    const Denoiser& model, std::span<const LabeledSample> members,
    std::span<const LabeledSample> nonmembers, const NoiseSchedule& sched,
    int n_mc, Rng& rng) {
  if (n_mc < 1) return absl::InvalidArgumentError("n_mc must be >= 1");
  if (members.empty() || nonmembers.empty()) {
    return absl::InvalidArgumentError("both sample sets must be non-empty");
  }
  MDLAB_ASSIGN_OR_RETURN(auto m,
                         PerSampleDenoisingError(model, members, sched, n_mc, rng));
  MDLAB_ASSIGN_OR_RETURN(
      auto n, PerSampleDenoisingError(model, nonmembers, sched, n_mc, rng));
  const auto [mm, mv] = MeanAndVarianceOfMean(m);
  const auto [nm, nv] = MeanAndVarianceOfMean(n);
  GapEstimate g;
  g.member_mean = mm;
  g.nonmember_mean = nm;
  g.gap = mm - nm;
  g.standard_error = std::sqrt(mv + nv);
  return g;
}

absl::Status WriteLossTrace(const std::filesystem::path& path,
                            std::span<const double> trace) {
  std::vector<std::vector<double>> rows;
  rows.reserve(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    rows.push_back({static_cast<double>(i), trace[i]});
  }
  return WriteCsv(path, {"iteration", "loss"}, rows);
}

}  // namespace mdlab

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

#include "mdlab/sampler.h"

#include <cmath>
#include <vector>

#include "absl/strings/str_cat.h"
#include "mdlab/diffusion.h"
#include "mdlab/io.h"
#include "mdlab/random.h"
#include "mdlab/status_macros.h"

namespace mdlab {
namespace {

absl::StatusOr<Tensor> RunSampler(const NoisePredictor& a,
                                  const NoisePredictor* b,
                                  const NoiseSchedule& sched,
                                  const SamplerPlan& plan,
                                  SamplerStats* stats) {
  MDLAB_RETURN_IF_ERROR(plan.Validate());
  const std::size_t n = plan.n_samples;
  const std::size_t d = a.data_dim();
  const int T = sched.num_steps();

  std::vector<Rng> rngs;
  rngs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    rngs.push_back(MakeRng(SubstreamSeed(plan.seed, i)));
  }
  Tensor x(Shape{n, d});
  for (std::size_t i = 0; i < n; ++i) {
    for (float& v : x.row(i)) v = StandardNormal(rngs[i]);
  }

  SamplerStats local;
  for (int t = T; t >= 1; --t) {
    const bool use_a = b == nullptr || DualUsesA(t, T, plan);
    const NoisePredictor& model = use_a ? a : *b;
    (use_a ? local.steps_a : local.steps_b)++;
    if (plan.step_kind == StepKind::kDeterministic) {
      MDLAB_ASSIGN_OR_RETURN(x, DdimMove(model, x, t, t - 1, sched,
                                         plan.condition));
      continue;
    }
    MDLAB_ASSIGN_OR_RETURN(Tensor eps,
                           PredictNoiseAt(model, x, t, plan.condition));
    MDLAB_ASSIGN_OR_RETURN(x, PosteriorMean(x, t, eps, sched));
    if (t == 1) break;
    const double sigma = std::sqrt(sched.beta(t));
#pragma omp parallel for schedule(static) if (n * d > 4096)
    for (std::size_t i = 0; i < n; ++i) {
      for (float& v : x.row(i)) {
        v = static_cast<float>(v + sigma * StandardNormal(rngs[i]));
      }
    }
  }
  if (!AllFinite(x)) {
    return absl::InternalError("sampler produced non-finite values");
  }
  if (stats != nullptr) *stats = local;
  return x;
}

}  // namespace

absl::Status SamplerPlan::Validate() const {
  if (n_samples < 1) return absl::InvalidArgumentError("n_samples must be >= 1");
  if (block_size < 1) return absl::InvalidArgumentError("block_size must be >= 1");
  return absl::OkStatus();
}

std::string ToString(SamplerMode mode) {
  return mode == SamplerMode::kSingle ? "single" : "dual";
}
std::string ToString(StepKind kind) {
  return kind == StepKind::kAncestral ? "ancestral" : "deterministic";
}
std::string ToString(StartParity parity) {
  return parity == StartParity::kAFirst ? "a-first" : "b-first";
}

nlohmann::json SamplerPlan::ToJson() const {
  nlohmann::json j{{"mode", ToString(mode)},
                   {"step_kind", ToString(step_kind)},
                   {"start", ToString(start)},
                   {"n_samples", n_samples},
                   {"seed", seed},
                   {"block_size", block_size}};
  j["condition"] = condition.has_value() ? nlohmann::json(*condition)
                                         : nlohmann::json(nullptr);
  return j;
}

absl::StatusOr<SamplerPlan> SamplerPlan::FromJson(const nlohmann::json& j) {
  SamplerPlan plan;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "mode") {
        const auto s = value.get<std::string>();
        if (s == "single") {
          plan.mode = SamplerMode::kSingle;
        } else if (s == "dual") {
          plan.mode = SamplerMode::kDual;
        } else {
          return absl::InvalidArgumentError(absl::StrCat("unknown mode '", s, "'"));
        }
      } else if (key == "step_kind") {
        const auto s = value.get<std::string>();
        if (s == "ancestral") {
          plan.step_kind = StepKind::kAncestral;
        } else if (s == "deterministic") {
          plan.step_kind = StepKind::kDeterministic;
        } else {
          return absl::InvalidArgumentError(
              absl::StrCat("unknown step_kind '", s, "'"));
        }
      } else if (key == "start") {
        const auto s = value.get<std::string>();
        if (s == "a-first") {
          plan.start = StartParity::kAFirst;
        } else if (s == "b-first") {
          plan.start = StartParity::kBFirst;
        } else {
          return absl::InvalidArgumentError(absl::StrCat("unknown start '", s, "'"));
        }
      } else if (key == "n_samples") {
        plan.n_samples = value.get<int>();
      } else if (key == "seed") {
        plan.seed = value.get<std::uint64_t>();
      } else if (key == "block_size") {
        plan.block_size = value.get<int>();
      } else if (key == "condition") {
        if (!value.is_null()) plan.condition = value.get<int>();
      } else {
        return absl::InvalidArgumentError(
            absl::StrCat("unknown key '", key, "' in sampler plan"));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("malformed sampler plan: ", e.what()));
  }
  MDLAB_RETURN_IF_ERROR(plan.Validate());
  return plan;
}

bool DualUsesA(int t, int num_steps, const SamplerPlan& plan) {
  const bool first_block = ((num_steps - t) / plan.block_size) % 2 == 0;
  return first_block == (plan.start == StartParity::kAFirst);
}

absl::StatusOr<Tensor> SingleSample(const NoisePredictor& model,
                                    const NoiseSchedule& sched,
                                    const SamplerPlan& plan,
                                    SamplerStats* stats) {
  if (plan.mode != SamplerMode::kSingle) {
    return absl::InvalidArgumentError("SingleSample needs a single-mode plan");
  }
  return RunSampler(model, nullptr, sched, plan, stats);
}

absl::StatusOr<Tensor> DualSample(const NoisePredictor& a,
                                  const NoisePredictor& b,
                                  const NoiseSchedule& sched,
                                  const SamplerPlan& plan,
                                  SamplerStats* stats) {
  if (plan.mode != SamplerMode::kDual) {
    return absl::InvalidArgumentError("DualSample needs a dual-mode plan");
  }
  if (a.data_dim() != b.data_dim()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "dual models disagree on data dimension: ", a.data_dim(), " vs ",
        b.data_dim()));
  }
  return RunSampler(a, &b, sched, plan, stats);
}

absl::Status WriteSamples(const std::filesystem::path& path,
                          const Tensor& samples,
                          const nlohmann::json& sidecar) {
  MDLAB_RETURN_IF_ERROR(WriteSampleBlock(path, samples));
  std::filesystem::path side = path;
  side += ".json";
  return WriteJsonFile(side, sidecar);
}

}  // namespace mdlab

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

#include "mdlab/denoiser.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <utility>

#include "absl/strings/str_cat.h"
#include "mdlab/kernels.h"
#include "mdlab/random.h"
#include "mdlab/status_macros.h"

namespace mdlab {
namespace {

inline double Sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<double> EmbeddingFrequencies(int dim, int num_timesteps) {
  const int half = dim / 2;
  std::vector<double> freqs(half);
  for (int k = 0; k < half; ++k) {
    freqs[k] = half == 1 ? 1.0
                         : std::pow(static_cast<double>(num_timesteps),
                                    -static_cast<double>(k) / (half - 1));
  }
  return freqs;
}

void FillEmbedding(int t, const std::vector<double>& freqs, double* out) {
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    out[2 * k] = std::sin(t * freqs[k]);
    out[2 * k + 1] = std::cos(t * freqs[k]);
  }
}

std::string WeightName(std::size_t layer) {
  return absl::StrCat("layers.", layer, ".weight");
}
std::string BiasName(std::size_t layer) {
  return absl::StrCat("layers.", layer, ".bias");
}
constexpr char kCondEmbeddingName[] = "cond_embedding";

}  // namespace

absl::Status DenoiserArch::Validate() const {
  if (data_dim < 1) return absl::InvalidArgumentError("data_dim must be >= 1");
  if (hidden.empty()) {
    return absl::InvalidArgumentError("at least one hidden layer is required");
  }
  for (int h : hidden) {
    if (h < 1) return absl::InvalidArgumentError("hidden widths must be >= 1");
  }
  if (embed_dim < 2 || embed_dim % 2 != 0) {
    return absl::InvalidArgumentError("embed_dim must be even and positive");
  }
  if (fourier_features < 0 || fourier_features > 24) {
    return absl::InvalidArgumentError("fourier_features must lie in [0, 24]");
  }
  if (num_tokens < 0) {
    return absl::InvalidArgumentError("num_tokens must be >= 0");
  }
  if (num_timesteps < 1) {
    return absl::InvalidArgumentError("num_timesteps must be >= 1");
  }
  return absl::OkStatus();
}

std::vector<std::pair<std::string, Shape>> ParameterLayout(
    const DenoiserArch& arch) {
  std::vector<std::pair<std::string, Shape>> layout;
  std::size_t in = arch.input_width();
  for (std::size_t l = 0; l <= arch.hidden.size(); ++l) {
    const std::size_t out = l < arch.hidden.size()
                                ? static_cast<std::size_t>(arch.hidden[l])
                                : static_cast<std::size_t>(arch.data_dim);
    layout.emplace_back(WeightName(l), Shape{out, in});
    layout.emplace_back(BiasName(l), Shape{out});
    in = out;
  }
  if (arch.num_tokens > 0) {
    layout.emplace_back(
        kCondEmbeddingName,
        Shape{static_cast<std::size_t>(arch.num_tokens),
              static_cast<std::size_t>(arch.embed_dim)});
  }
  return layout;
}

std::size_t DenoiserArch::ParameterCount() const {
  std::size_t n = 0;
  for (const auto& [name, shape] : ParameterLayout(*this)) n += ShapeSize(shape);
  return n;
}

nlohmann::json DenoiserArch::ToJson() const {
  return nlohmann::json{{"data_dim", data_dim},
                        {"hidden", hidden},
                        {"embed_dim", embed_dim},
                        {"fourier_features", fourier_features},
                        {"num_tokens", num_tokens},
                        {"num_timesteps", num_timesteps}};
}

absl::StatusOr<DenoiserArch> DenoiserArch::FromJson(const nlohmann::json& j) {
  DenoiserArch arch;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "data_dim") {
        arch.data_dim = value.get<int>();
      } else if (key == "hidden") {
        arch.hidden = value.get<std::vector<int>>();
      } else if (key == "embed_dim") {
        arch.embed_dim = value.get<int>();
      } else if (key == "fourier_features") {
        arch.fourier_features = value.get<int>();
      } else if (key == "num_tokens") {
        arch.num_tokens = value.get<int>();
      } else if (key == "num_timesteps") {
        arch.num_timesteps = value.get<int>();
      } else {
        return absl::InvalidArgumentError(
            absl::StrCat("unknown architecture key '", key, "'"));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("malformed architecture: ", e.what()));
  }
  MDLAB_RETURN_IF_ERROR(arch.Validate());
  return arch;
}

absl::StatusOr<Tensor> TimestepEmbedding(int t, int dim, int num_timesteps) {
  if (dim < 2 || dim % 2 != 0) {
    return absl::InvalidArgumentError(
        absl::StrCat("embedding dim must be even and positive, got ", dim));
  }
  if (t < 1 || t > num_timesteps) {
    return absl::OutOfRangeError(absl::StrCat(
        "timestep ", t, " outside [1, ", num_timesteps, "]"));
  }
  std::vector<double> values(dim);
  FillEmbedding(t, EmbeddingFrequencies(dim, num_timesteps), values.data());
  Tensor out(Shape{static_cast<std::size_t>(dim)});
  for (int i = 0; i < dim; ++i) out[i] = static_cast<float>(values[i]);
  return out;
}

// Cached forward state for one batch. `inputs[l]` is the input to layer l;
// `pre[l]` the pre-activation of hidden layer l.
struct Denoiser::Activations {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> pre;
  std::vector<double> output;
};

Denoiser::Denoiser(DenoiserArch arch, ParameterList params)
    : arch_(std::move(arch)), params_(std::move(params)) {
  const auto freqs = EmbeddingFrequencies(arch_.embed_dim, arch_.num_timesteps);
  embedding_table_.assign(
      static_cast<std::size_t>(arch_.num_timesteps + 1) * arch_.embed_dim, 0.0);
  for (int t = 0; t <= arch_.num_timesteps; ++t) {
    FillEmbedding(t, freqs, embedding_table_.data() + t * arch_.embed_dim);
  }
}

absl::StatusOr<Denoiser> Denoiser::FromParameters(DenoiserArch arch,
                                                  ParameterList params) {
  MDLAB_RETURN_IF_ERROR(arch.Validate());
  const auto layout = ParameterLayout(arch);
  if (layout.size() != params.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("architecture needs ", layout.size(),
                     " parameter tensors, got ", params.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (params[i].name != layout[i].first ||
        params[i].value.shape() != layout[i].second) {
      return absl::InvalidArgumentError(absl::StrCat(
          "parameter ", i, " is ", params[i].name, " ",
          ShapeToString(params[i].value.shape()), ", expected ",
          layout[i].first, " ", ShapeToString(layout[i].second)));
    }
  }
  return Denoiser(std::move(arch), std::move(params));
}

std::size_t Denoiser::ParameterCount() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

ParameterList Denoiser::ZeroGrads() const {
  ParameterList grads;
  grads.reserve(params_.size());
  for (const auto& p : params_) grads.push_back({p.name, Tensor(p.value.shape())});
  return grads;
}

bool operator==(const Denoiser& a, const Denoiser& b) {
  if (!(a.arch_ == b.arch_) || a.params_.size() != b.params_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    if (a.params_[i].name != b.params_[i].name ||
        !(a.params_[i].value == b.params_[i].value)) {
      return false;
    }
  }
  return true;
}

absl::Status Denoiser::CheckInputs(const Tensor& x,
                                   std::span<const int> timesteps,
                                   std::span<const int> conditions) const {
  if (x.rank() != 2 || x.dim(1) != static_cast<std::size_t>(arch_.data_dim)) {
    return absl::InvalidArgumentError(
        absl::StrCat("expected input [n, ", arch_.data_dim, "], got ",
                     ShapeToString(x.shape())));
  }
  const std::size_t n = x.dim(0);
  if (timesteps.size() != n) {
    return absl::InvalidArgumentError(
        absl::StrCat("got ", timesteps.size(), " timesteps for ", n, " rows"));
  }
  for (int t : timesteps) {
    if (t < 1 || t > arch_.num_timesteps) {
      return absl::OutOfRangeError(absl::StrCat(
          "timestep ", t, " outside [1, ", arch_.num_timesteps, "]"));
    }
  }
  if (!arch_.conditional()) {
    if (!conditions.empty()) {
      return absl::InvalidArgumentError(
          "unconditional denoiser was given condition tokens");
    }
  } else {
    if (conditions.size() != n) {
      return absl::InvalidArgumentError(absl::StrCat(
          "conditional denoiser needs one token per row, got ",
          conditions.size(), " for ", n, " rows"));
    }
    for (int c : conditions) {
      if (c < 0 || c >= arch_.num_tokens) {
        return absl::InvalidArgumentError(absl::StrCat(
            "unknown condition token ", c, " (vocabulary size ",
            arch_.num_tokens, ")"));
      }
    }
  }
  return absl::OkStatus();
}

void Denoiser::Forward(const Tensor& x, std::span<const int> timesteps,
                       std::span<const int> conditions,
                       Activations& acts) const {
  const std::size_t n = x.dim(0);
  const std::size_t d = arch_.data_dim;
  const std::size_t e = arch_.embed_dim;
  const std::size_t f = arch_.fourier_features;
  const std::size_t emb_offset = d * (1 + 2 * f);
  const std::size_t in0 = arch_.input_width();
  const std::size_t num_layers = arch_.hidden.size() + 1;

  acts.inputs.assign(num_layers, {});
  acts.pre.assign(arch_.hidden.size(), {});
  auto& input = acts.inputs[0];
  input.resize(n * in0);
  const float* cond_table =
      arch_.conditional() ? params_.back().value.data().data() : nullptr;
  for (std::size_t i = 0; i < n; ++i) {
    double* row = input.data() + i * in0;
    auto xr = x.row(i);
    for (std::size_t l = 0; l < d; ++l) {
      row[l] = xr[l];
      double omega = 1.0;
      for (std::size_t k = 0; k < f; ++k, omega *= 2.0) {
        double* ff = row + d + 2 * (l * f + k);
        ff[0] = std::sin(omega * xr[l]);
        ff[1] = std::cos(omega * xr[l]);
      }
    }
    const double* emb = embedding_table_.data() + timesteps[i] * e;
    for (std::size_t l = 0; l < e; ++l) row[emb_offset + l] = emb[l];
    if (cond_table != nullptr) {
      const float* c = cond_table + conditions[i] * e;
      for (std::size_t l = 0; l < e; ++l) row[emb_offset + l] += c[l];
    }
  }

  std::size_t width_in = in0;
  for (std::size_t layer = 0; layer < num_layers; ++layer) {
    const bool is_output = layer + 1 == num_layers;
    const std::size_t width_out =
        is_output ? d : static_cast<std::size_t>(arch_.hidden[layer]);
    const Tensor& w = params_[2 * layer].value;
    const Tensor& b = params_[2 * layer + 1].value;
    std::vector<double> z(n * width_out);
    kernels::DenseForward(acts.inputs[layer], n, width_in, w.data(), b.data(),
                          width_out, z);
    if (is_output) {
      acts.output = std::move(z);
    } else {
      std::vector<double> a(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) a[i] = z[i] * Sigmoid(z[i]);
      acts.pre[layer] = std::move(z);
      acts.inputs[layer + 1] = std::move(a);
    }
    width_in = width_out;
  }
}

absl::StatusOr<Tensor> Denoiser::PredictNoise(
    const Tensor& x, std::span<const int> timesteps,
    std::span<const int> conditions) const {
  MDLAB_RETURN_IF_ERROR(CheckInputs(x, timesteps, conditions));
  Activations acts;
  Forward(x, timesteps, conditions, acts);
  Tensor out(x.shape());
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = static_cast<float>(acts.output[i]);
  }
  return out;
}

absl::StatusOr<std::vector<double>> Denoiser::PredictNoiseUnrounded(
    const Tensor& x, std::span<const int> timesteps,
    std::span<const int> conditions) const {
  MDLAB_RETURN_IF_ERROR(CheckInputs(x, timesteps, conditions));
  Activations acts;
  Forward(x, timesteps, conditions, acts);
  return std::move(acts.output);
}

absl::StatusOr<LossAndGrads> Denoiser::ComputeLossAndGrads(
    const Tensor& x, std::span<const int> timesteps,
    std::span<const int> conditions, const Tensor& target) const {
  if (!target.SameShape(x)) {
    return absl::InvalidArgumentError(
        absl::StrCat("target shape ", ShapeToString(target.shape()),
                     " does not match input ", ShapeToString(x.shape())));
  }
  const std::vector<double> t(target.data().begin(), target.data().end());
  return ComputeLossAndGrads(x, timesteps, conditions, std::span<const double>(t));
}

absl::StatusOr<LossAndGrads> Denoiser::ComputeLossAndGrads(
    const Tensor& x, std::span<const int> timesteps,
    std::span<const int> conditions, std::span<const double> target) const {
  MDLAB_RETURN_IF_ERROR(CheckInputs(x, timesteps, conditions));
  if (target.size() != x.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "target has ", target.size(), " values, input has ", x.size()));
  }
  const std::size_t n = x.dim(0);
  if (n == 0) return absl::InvalidArgumentError("empty batch");
  const std::size_t d = arch_.data_dim;
  const std::size_t e = arch_.embed_dim;
  const std::size_t num_layers = arch_.hidden.size() + 1;

  Activations acts;
  Forward(x, timesteps, conditions, acts);

  LossAndGrads result;
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> delta(n * d);
  double loss = 0.0;
  for (std::size_t i = 0; i < n * d; ++i) {
    const double r = acts.output[i] - target[i];
    loss += r * r;
    delta[i] = 2.0 * r * inv_n;
  }
  result.loss = loss * inv_n;

  std::vector<std::vector<double>> grad_acc(params_.size());
  for (std::size_t p = 0; p < params_.size(); ++p) {
    grad_acc[p].assign(params_[p].value.size(), 0.0);
  }

  for (std::size_t layer = num_layers; layer-- > 0;) {
    const bool is_output = layer + 1 == num_layers;
    const std::size_t width_out =
        is_output ? d : static_cast<std::size_t>(arch_.hidden[layer]);
    const std::size_t width_in =
        layer == 0 ? arch_.input_width()
                   : static_cast<std::size_t>(arch_.hidden[layer - 1]);
    if (!is_output) {
      const auto& z = acts.pre[layer];
      for (std::size_t i = 0; i < delta.size(); ++i) {
        const double s = Sigmoid(z[i]);
        delta[i] *= s * (1.0 + z[i] * (1.0 - s));
      }
    }
    kernels::DenseBackwardParams(delta, acts.inputs[layer], n, width_out,
                                 width_in, grad_acc[2 * layer],
                                 grad_acc[2 * layer + 1]);
    const bool need_input_grad = layer > 0 || arch_.conditional();
    if (!need_input_grad) break;
    std::vector<double> din(n * width_in);
    kernels::DenseBackwardInput(delta, n, width_out,
                                params_[2 * layer].value.data(), width_in,
                                din);
    delta = std::move(din);
  }

  if (arch_.conditional()) {
    auto& cond_grad = grad_acc.back();
    const std::size_t in0 = arch_.input_width();
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = delta.data() + i * in0 + (in0 - e);
      double* g = cond_grad.data() + conditions[i] * e;
      for (std::size_t l = 0; l < e; ++l) g[l] += row[l];
    }
  }

  result.grads.reserve(params_.size());
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor g(params_[p].value.shape());
    auto gv = g.data();
    for (std::size_t i = 0; i < gv.size(); ++i) {
      gv[i] = static_cast<float>(grad_acc[p][i]);
    }
    result.grads.push_back({params_[p].name, std::move(g)});
  }
  return result;
}

absl::StatusOr<Denoiser> InitDenoiser(const DenoiserArch& arch,
                                      std::uint64_t seed,
                                      InitOptions options) {
  MDLAB_RETURN_IF_ERROR(arch.Validate());
  Rng rng = MakeRng(seed);
  ParameterList params;
  const auto layout = ParameterLayout(arch);
  const std::size_t num_dense = arch.hidden.size() + 1;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& [name, shape] = layout[i];
    Tensor t(shape);
    const bool dense = i < 2 * num_dense;
    const bool output_layer = dense && i / 2 == num_dense - 1;
    if (dense) {
      const std::size_t layer = i / 2;
      const std::size_t fan_in = layout[2 * layer].second[1];
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (float& v : t.data()) v = static_cast<float>(dist(rng));
      if (output_layer && options.zero_output_layer) {
        std::fill(t.data().begin(), t.data().end(), 0.0f);
      }
    } else {
      std::uniform_real_distribution<double> dist(-0.5, 0.5);
      for (float& v : t.data()) v = static_cast<float>(dist(rng));
    }
    params.push_back({name, std::move(t)});
  }
  return Denoiser::FromParameters(arch, std::move(params));
}

}  // namespace mdlab

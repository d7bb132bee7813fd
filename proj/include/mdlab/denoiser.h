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

#ifndef MDLAB_DENOISER_H_
#define MDLAB_DENOISER_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "mdlab/noise_predictor.h"
#include "mdlab/tensor.h"
#include "nlohmann/json.hpp"

namespace mdlab {

struct NamedTensor {
  std::string name;
  Tensor value;
};
using ParameterList = std::vector<NamedTensor>;

// Fully-connected noise predictor layout. Input to the first layer is the
// concatenation [x_t, fourier(x_t), emb] where emb = sinusoid(t) +
// cond_embedding[c] and fourier(x_t) holds sin(2^k x_l), cos(2^k x_l) for
// k < fourier_features and every coordinate l.
struct DenoiserArch {
  int data_dim = 2;
  std::vector<int> hidden = {128, 128, 128};
  int embed_dim = 16;
  int fourier_features = 0;
  // Number of condition tokens; 0 means unconditional.
  int num_tokens = 0;
  // T, used to scale the timestep embedding frequencies.
  int num_timesteps = 100;

  absl::Status Validate() const;
  std::size_t ParameterCount() const;
  bool conditional() const { return num_tokens > 0; }
  // Width of the first layer's input.
  std::size_t input_width() const {
    return static_cast<std::size_t>(data_dim * (1 + 2 * fourier_features) +
                                    embed_dim);
  }

  nlohmann::json ToJson() const;
  static absl::StatusOr<DenoiserArch> FromJson(const nlohmann::json& j);

  friend bool operator==(const DenoiserArch&, const DenoiserArch&) = default;
};

// Sinusoidal features [sin(t w_0), cos(t w_0), sin(t w_1), cos(t w_1), ...]
// with w_k = T^(-k / (dim/2 - 1)), so w_0 = 1 and the slowest frequency is 1/T.
// Requires an even positive dim and 1 <= t <= T.
absl::StatusOr<Tensor> TimestepEmbedding(int t, int dim, int num_timesteps);

struct InitOptions {
  // Zero the output layer so the untrained model predicts eps == 0.
  bool zero_output_layer = false;
};

struct LossAndGrads {
  double loss = 0.0;
  ParameterList grads;
};

class Denoiser : public NoisePredictor {
 public:
  // Builds a model from existing parameters; the names and shapes must match
  // what `arch` requires.
  static absl::StatusOr<Denoiser> FromParameters(DenoiserArch arch,
                                                 ParameterList params);

  const DenoiserArch& arch() const { return arch_; }
  const ParameterList& params() const { return params_; }
  ParameterList& mutable_params() { return params_; }
  std::size_t ParameterCount() const;

  std::size_t data_dim() const override { return arch_.data_dim; }

  absl::StatusOr<Tensor> PredictNoise(
      const Tensor& x, std::span<const int> timesteps,
      std::span<const int> conditions) const override;

  // loss = mean over rows of ||target_i - eps_theta(x_i, t_i, c_i)||^2 and its
  // exact gradient with respect to every parameter. `target` is a constant.
  absl::StatusOr<LossAndGrads> ComputeLossAndGrads(
      const Tensor& x, std::span<const int> timesteps,
      std::span<const int> conditions, const Tensor& target) const;
  // Same, against a double-precision target.
  absl::StatusOr<LossAndGrads> ComputeLossAndGrads(
      const Tensor& x, std::span<const int> timesteps,
      std::span<const int> conditions, std::span<const double> target) const;
  // Forward pass without rounding the output to float, row-major [n, d].
  absl::StatusOr<std::vector<double>> PredictNoiseUnrounded(
      const Tensor& x, std::span<const int> timesteps,
      std::span<const int> conditions) const;

  // Zero-filled gradient list shaped like the parameters.
  ParameterList ZeroGrads() const;

  friend bool operator==(const Denoiser& a, const Denoiser& b);

 private:
  struct Activations;

  Denoiser(DenoiserArch arch, ParameterList params);

  absl::Status CheckInputs(const Tensor& x, std::span<const int> timesteps,
                           std::span<const int> conditions) const;
  void Forward(const Tensor& x, std::span<const int> timesteps,
               std::span<const int> conditions, Activations& acts) const;

  DenoiserArch arch_;
  ParameterList params_;
  // Embedding table rows 0..T (row 0 unused), derived from arch_.
  std::vector<double> embedding_table_;
};

absl::StatusOr<Denoiser> InitDenoiser(const DenoiserArch& arch,
                                      std::uint64_t seed,
                                      InitOptions options = {});

// Expected parameter names and shapes for an architecture, in storage order.
std::vector<std::pair<std::string, Shape>> ParameterLayout(
    const DenoiserArch& arch);

}  // namespace mdlab

#endif  // MDLAB_DENOISER_H_

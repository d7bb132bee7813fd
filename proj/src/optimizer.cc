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

#include "mdlab/optimizer.h"

#include <cmath>

#include "absl/strings/str_cat.h"

namespace mdlab {

OptimizerState OptimizerState::ForParameters(const ParameterList& params,
                                             AdamOptions options) {
  OptimizerState state;
  state.options = options;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.value.shape());
    state.second_moment.emplace_back(p.value.shape());
  }
  return state;
}

absl::Status AdamUpdate(ParameterList& params, const ParameterList& grads,
                        OptimizerState& state) {
  if (grads.size() != params.size() ||
      state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    return absl::InvalidArgumentError(
        "parameters, gradients and optimizer state differ in length");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!grads[p].value.SameShape(params[p].value) ||
        !state.first_moment[p].SameShape(params[p].value) ||
        !state.second_moment[p].SameShape(params[p].value)) {
      return absl::InvalidArgumentError(absl::StrCat(
          "shape mismatch for parameter ", params[p].name, ": ",
          ShapeToString(params[p].value.shape()), " vs gradient ",
          ShapeToString(grads[p].value.shape())));
    }
  }
  const AdamOptions& o = state.options;
  const std::int64_t k = state.step + 1;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(k));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(k));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto theta = params[p].value.data();
    auto g = grads[p].value.data();
    auto m = state.first_moment[p].data();
    auto v = state.second_moment[p].data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g[i];
      const double mi = o.beta1 * m[i] + (1.0 - o.beta1) * gi;
      const double vi = o.beta2 * v[i] + (1.0 - o.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update =
          o.learning_rate * (mi / bc1) / (std::sqrt(vi / bc2) + o.epsilon);
      theta[i] = static_cast<float>(theta[i] - update);
    }
  }
  state.step = k;
  return absl::OkStatus();
}

}  // namespace mdlab

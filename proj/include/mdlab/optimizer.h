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

#ifndef MDLAB_OPTIMIZER_H_
#define MDLAB_OPTIMIZER_H_

#include <cstdint>
#include <vector>

#include "absl/status/status.h"
#include "mdlab/denoiser.h"

namespace mdlab {

struct AdamOptions {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment estimates, one pair per parameter tensor.
struct OptimizerState {
  AdamOptions options;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::int64_t step = 0;

  static OptimizerState ForParameters(const ParameterList& params,
                                      AdamOptions options = {});
};

// One bias-corrected Adam update, in place:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   theta <- theta - lr * (m / (1 - b1^k)) / (sqrt(v / (1 - b2^k)) + eps)
absl::Status AdamUpdate(ParameterList& params, const ParameterList& grads,
                        OptimizerState& state);

}  // namespace mdlab

#endif  // MDLAB_OPTIMIZER_H_

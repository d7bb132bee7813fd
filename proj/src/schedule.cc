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

#include "mdlab/schedule.h"

#include <cmath>
#include <utility>

#include "absl/strings/str_cat.h"

namespace mdlab {

absl::StatusOr<NoiseSchedule> NoiseSchedule::FromBetas(
    std::vector<double> betas) {
  if (betas.empty()) {
    return absl::InvalidArgumentError("schedule needs at least one timestep");
  }
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!(betas[i] > 0.0 && betas[i] <= 1.0)) {
      return absl::InvalidArgumentError(
          absl::StrCat("beta_", i + 1, " = ", betas[i], " is outside (0, 1]"));
    }
    if (i > 0 && !(betas[i] > betas[i - 1])) {
      return absl::InvalidArgumentError(
          absl::StrCat("betas must be strictly increasing (beta_", i + 1,
                       " = ", betas[i], ")"));
    }
  }
  NoiseSchedule s;
  s.betas_ = std::move(betas);
  s.alphas_.reserve(s.betas_.size());
  s.alpha_bars_.reserve(s.betas_.size());
  double running = 1.0;
  for (double b : s.betas_) {
    const double a = 1.0 - b;
    running *= a;
    s.alphas_.push_back(a);
    s.alpha_bars_.push_back(running);
  }
  return s;
}

absl::Status NoiseSchedule::CheckTimestep(int t) const {
  if (t < 1 || t > num_steps()) {
    return absl::OutOfRangeError(
        absl::StrCat("timestep ", t, " outside [1, ", num_steps(), "]"));
  }
  return absl::OkStatus();
}

absl::StatusOr<NoiseSchedule> MakeLinearSchedule(int num_steps,
                                                 double beta_start,
                                                 double beta_end) {
  if (num_steps < 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("T must be positive, got ", num_steps));
  }
  if (!(beta_start > 0.0 && beta_start <= 1.0) ||
      !(beta_end > 0.0 && beta_end <= 1.0)) {
    return absl::InvalidArgumentError("beta endpoints must lie in (0, 1]");
  }
  if (beta_start > beta_end) {
    return absl::InvalidArgumentError("beta_start must not exceed beta_end");
  }
  std::vector<double> betas(num_steps);
  if (num_steps == 1) {
    betas[0] = beta_start;
  } else {
    for (int i = 0; i < num_steps; ++i) {
      const double frac = static_cast<double>(i) / (num_steps - 1);
      betas[i] = beta_start + frac * (beta_end - beta_start);
    }
  }
  return NoiseSchedule::FromBetas(std::move(betas));
}

}  // namespace mdlab

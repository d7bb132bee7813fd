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

#ifndef MDLAB_SCHEDULE_H_
#define MDLAB_SCHEDULE_H_

#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace mdlab {

// Variance schedule over timesteps 1..T (1-based). Index 0 is reserved for
// the clean data, where alpha_bar(0) == 1.
class NoiseSchedule {
 public:
  // Validates and derives alphas and cumulative products from betas.
  // Betas must be strictly increasing and lie in (0, 1].
  static absl::StatusOr<NoiseSchedule> FromBetas(std::vector<double> betas);

  int num_steps() const { return static_cast<int>(betas_.size()); }

  double beta(int t) const { return betas_[t - 1]; }
  double alpha(int t) const { return alphas_[t - 1]; }
  // alpha_bar(0) == 1.
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars_[t - 1]; }

  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alphas() const { return alphas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

  // OK iff 1 <= t <= T.
  absl::Status CheckTimestep(int t) const;

 private:
  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
};

// beta_t linearly interpolated from beta_start (t = 1) to beta_end (t = T).
// T == 1 requires beta_start == beta_end. Equal endpoints with T > 1 give a
// constant schedule, which violates strict monotonicity and is rejected.
absl::StatusOr<NoiseSchedule> MakeLinearSchedule(int num_steps,
                                                 double beta_start,
                                                 double beta_end);

}  // namespace mdlab

#endif  // MDLAB_SCHEDULE_H_

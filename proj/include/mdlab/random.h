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

#ifndef MDLAB_RANDOM_H_
#define MDLAB_RANDOM_H_

#include <cstdint>
#include <random>
#include <string_view>

#include "mdlab/tensor.h"

namespace mdlab {

using Rng = std::mt19937_64;

// Builds a generator from a 64-bit seed. Both halves of the seed feed the
// seed sequence so that seeds differing only in low bits give unrelated
// streams.
Rng MakeRng(std::uint64_t seed);

// Seed derivation rule: every random stage of an experiment draws its seed as
// DeriveSeed(master, stage_name, index). The mix is FNV-1a over the stage name
// followed by a SplitMix64 finalizer, so it is stable across platforms.
std::uint64_t DeriveSeed(std::uint64_t master, std::string_view stage,
                         std::uint64_t index = 0);

// Per-trajectory / per-sample substream: base seed XOR index.
inline std::uint64_t SubstreamSeed(std::uint64_t base, std::uint64_t index) {
  return base ^ index;
}

float StandardNormal(Rng& rng);
double Uniform01(Rng& rng);
// Uniform integer in [lo, hi].
int UniformInt(Rng& rng, int lo, int hi);

// Fills a tensor of the given shape with i.i.d. N(0, 1) in row-major order.
Tensor GaussianTensor(const Shape& shape, Rng& rng);

}  // namespace mdlab

#endif  // MDLAB_RANDOM_H_

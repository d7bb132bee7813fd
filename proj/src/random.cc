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

#include "mdlab/random.h"

namespace mdlab {
namespace {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng MakeRng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffULL),
                    static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

std::uint64_t DeriveSeed(std::uint64_t master, std::string_view stage,
                         std::uint64_t index) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stage) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return SplitMix64(SplitMix64(master ^ h) + index);
}

float StandardNormal(Rng& rng) {
  std::normal_distribution<float> dist(0.0f, 1.0f);
  return dist(rng);
}

double Uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

int UniformInt(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

Tensor GaussianTensor(const Shape& shape, Rng& rng) {
  Tensor t(shape);
  for (float& x : t.data()) x = StandardNormal(rng);
  return t;
}

}  // namespace mdlab

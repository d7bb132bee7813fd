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

#ifndef MDLAB_KERNELS_H_
#define MDLAB_KERNELS_H_

#include <cstddef>
#include <span>
#include <vector>

// Data-parallel inner loops. Every kernel in `mdlab::kernels` is OpenMP
// parallel; `mdlab::kernels::reference` holds the serial versions the tests
// and benchmarks compare against. Work is partitioned so that each output
// element is produced by exactly one thread in a fixed order, so parallel and
// serial results are bitwise identical for any thread count.
namespace mdlab::kernels {

// out[i, j] = b[j] + sum_l w[j, l] * in[i, l]
// in: [n, k], w: [m, k], b: [m], out: [n, m].
void DenseForward(std::span<const double> in, std::size_t n, std::size_t k,
                  std::span<const float> w, std::span<const float> b,
                  std::size_t m, std::span<double> out);

// din[i, l] = sum_j dout[i, j] * w[j, l]
void DenseBackwardInput(std::span<const double> dout, std::size_t n,
                        std::size_t m, std::span<const float> w, std::size_t k,
                        std::span<double> din);

// dw[j, l] += sum_i dout[i, j] * in[i, l];  db[j] += sum_i dout[i, j]
void DenseBackwardParams(std::span<const double> dout,
                         std::span<const double> in, std::size_t n,
                         std::size_t m, std::size_t k, std::span<double> dw,
                         std::span<double> db);

// Sum over all (i, j) of ||a_i - b_j||. a: [n, d], b: [m, d].
double PairwiseDistanceSum(std::span<const float> a, std::size_t n,
                           std::span<const float> b, std::size_t m,
                           std::size_t d);

// For every query row, the mean distance to its k nearest reference rows
// (k = 1 gives the nearest-neighbour distance).
std::vector<double> NearestDistances(std::span<const float> queries,
                                     std::size_t n,
                                     std::span<const float> refs,
                                     std::size_t m, std::size_t d,
                                     std::size_t k = 1);

namespace reference {

void DenseForward(std::span<const double> in, std::size_t n, std::size_t k,
                  std::span<const float> w, std::span<const float> b,
                  std::size_t m, std::span<double> out);
void DenseBackwardInput(std::span<const double> dout, std::size_t n,
                        std::size_t m, std::span<const float> w, std::size_t k,
                        std::span<double> din);
void DenseBackwardParams(std::span<const double> dout,
                         std::span<const double> in, std::size_t n,
                         std::size_t m, std::size_t k, std::span<double> dw,
                         std::span<double> db);
double PairwiseDistanceSum(std::span<const float> a, std::size_t n,
                           std::span<const float> b, std::size_t m,
                           std::size_t d);
std::vector<double> NearestDistances(std::span<const float> queries,
                                     std::size_t n,
                                     std::span<const float> refs,
                                     std::size_t m, std::size_t d,
                                     std::size_t k = 1);

}  // namespace reference

// Thread count used by the parallel kernels (OpenMP max threads).
int MaxThreads();
void SetMaxThreads(int n);

}  // namespace mdlab::kernels

#endif  // MDLAB_KERNELS_H_

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

#include "mdlab/kernels.h"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mdlab::kernels {
namespace {

// Below this many multiply-adds the parallel region costs more than it saves.
constexpr std::size_t kParallelThreshold = 1 << 14;

inline void DenseForwardRow(const double* in, std::size_t k, const float* w,
                            const float* b, std::size_t m, double* out) {
  for (std::size_t j = 0; j < m; ++j) {
    const float* wj = w + j * k;
    // Four interleaved partial sums let the compiler vectorize the dot.
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t l = 0;
    for (; l + 4 <= k; l += 4) {
      acc[0] += wj[l] * in[l];
      acc[1] += wj[l + 1] * in[l + 1];
      acc[2] += wj[l + 2] * in[l + 2];
      acc[3] += wj[l + 3] * in[l + 3];
    }
    for (; l < k; ++l) acc[0] += wj[l] * in[l];
    out[j] = b[j] + ((acc[0] + acc[1]) + (acc[2] + acc[3]));
  }
}

inline void DenseBackwardInputRow(const double* dout, std::size_t m,
                                  const float* w, std::size_t k, double* din) {
  std::fill(din, din + k, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const double g = dout[j];
    const float* wj = w + j * k;
    for (std::size_t l = 0; l < k; ++l) din[l] += g * wj[l];
  }
}

// One output unit j: accumulates over the batch in row order.
inline void DenseBackwardParamsUnit(const double* dout, const double* in,
                                    std::size_t n, std::size_t m,
                                    std::size_t k, std::size_t j, double* dwj,
                                    double* dbj) {
  double bsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = dout[i * m + j];
    const double* xi = in + i * k;
    for (std::size_t l = 0; l < k; ++l) dwj[l] += g * xi[l];
    bsum += g;
  }
  *dbj += bsum;
}

inline double RowDistanceSum(const float* a, const float* b, std::size_t m,
                             std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const float* bj = b + j * d;
    double sq = 0.0;
    for (std::size_t l = 0; l < d; ++l) {
      const double diff = static_cast<double>(a[l]) - bj[l];
      sq += diff * diff;
    }
    s += std::sqrt(sq);
  }
  return s;
}

inline double RowNearest(const float* q, const float* refs, std::size_t m,
                         std::size_t d, std::size_t k,
                         std::vector<double>& scratch) {
  scratch.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const float* r = refs + j * d;
    double sq = 0.0;
    for (std::size_t l = 0; l < d; ++l) {
      const double diff = static_cast<double>(q[l]) - r[l];
      sq += diff * diff;
    }
    scratch[j] = sq;
  }
  const std::size_t kk = std::min(k, m);
  std::partial_sort(scratch.begin(), scratch.begin() + kk, scratch.end());
  double s = 0.0;
  for (std::size_t j = 0; j < kk; ++j) s += std::sqrt(scratch[j]);
  return s / static_cast<double>(kk);
}

}  // namespace

void DenseForward(std::span<const double> in, std::size_t n, std::size_t k,
                  std::span<const float> w, std::span<const float> b,
                  std::size_t m, std::span<double> out) {
  const long long rows = static_cast<long long>(n);
#pragma omp parallel for schedule(static) if (n * m * k > kParallelThreshold)
  for (long long i = 0; i < rows; ++i) {
    DenseForwardRow(in.data() + i * k, k, w.data(), b.data(), m,
                    out.data() + i * m);
  }
}

void DenseBackwardInput(std::span<const double> dout, std::size_t n,
                        std::size_t m, std::span<const float> w, std::size_t k,
                        std::span<double> din) {
  const long long rows = static_cast<long long>(n);
#pragma omp parallel for schedule(static) if (n * m * k > kParallelThreshold)
  for (long long i = 0; i < rows; ++i) {
    DenseBackwardInputRow(dout.data() + i * m, m, w.data(), k,
                          din.data() + i * k);
  }
}

void DenseBackwardParams(std::span<const double> dout,
                         std::span<const double> in, std::size_t n,
                         std::size_t m, std::size_t k, std::span<double> dw,
                         std::span<double> db) {
  const long long units = static_cast<long long>(m);
#pragma omp parallel for schedule(static) if (n * m * k > kParallelThreshold)
  for (long long j = 0; j < units; ++j) {
    DenseBackwardParamsUnit(dout.data(), in.data(), n, m, k, j,
                            dw.data() + j * k, db.data() + j);
  }
}

double PairwiseDistanceSum(std::span<const float> a, std::size_t n,
                           std::span<const float> b, std::size_t m,
                           std::size_t d) {
  std::vector<double> partial(n);
  const long long rows = static_cast<long long>(n);
#pragma omp parallel for schedule(static) if (n * m * d > kParallelThreshold)
  for (long long i = 0; i < rows; ++i) {
    partial[i] = RowDistanceSum(a.data() + i * d, b.data(), m, d);
  }
  double s = 0.0;
  for (double p : partial) s += p;
  return s;
}

std::vector<double> NearestDistances(std::span<const float> queries,
                                     std::size_t n,
                                     std::span<const float> refs,
                                     std::size_t m, std::size_t d,
                                     std::size_t k) {
  std::vector<double> out(n);
  const long long rows = static_cast<long long>(n);
#pragma omp parallel if (n * m * d > kParallelThreshold)
  {
    std::vector<double> scratch;
#pragma omp for schedule(static)
    for (long long i = 0; i < rows; ++i) {
      out[i] = RowNearest(queries.data() + i * d, refs.data(), m, d, k,
                          scratch);
    }
  }
  return out;
}

namespace reference {

void DenseForward(std::span<const double> in, std::size_t n, std::size_t k,
                  std::span<const float> w, std::span<const float> b,
                  std::size_t m, std::span<double> out) {
  for (std::size_t i = 0; i < n; ++i) {
    DenseForwardRow(in.data() + i * k, k, w.data(), b.data(), m,
                    out.data() + i * m);
  }
}

void DenseBackwardInput(std::span<const double> dout, std::size_t n,
                        std::size_t m, std::span<const float> w, std::size_t k,
                        std::span<double> din) {
  for (std::size_t i = 0; i < n; ++i) {
    DenseBackwardInputRow(dout.data() + i * m, m, w.data(), k,
                          din.data() + i * k);
  }
}

void DenseBackwardParams(std::span<const double> dout,
                         std::span<const double> in, std::size_t n,
                         std::size_t m, std::size_t k, std::span<double> dw,
                         std::span<double> db) {
  for (std::size_t j = 0; j < m; ++j) {
    DenseBackwardParamsUnit(dout.data(), in.data(), n, m, k, j,
                            dw.data() + j * k, db.data() + j);
  }
}

double PairwiseDistanceSum(std::span<const float> a, std::size_t n,
                           std::span<const float> b, std::size_t m,
                           std::size_t d) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += RowDistanceSum(a.data() + i * d, b.data(), m, d);
  }
  return s;
}

std::vector<double> NearestDistances(std::span<const float> queries,
                                     std::size_t n,
                                     std::span<const float> refs,
                                     std::size_t m, std::size_t d,
                                     std::size_t k) {
  std::vector<double> out(n);
  std::vector<double> scratch;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = RowNearest(queries.data() + i * d, refs.data(), m, d, k, scratch);
  }
  return out;
}

}  // namespace reference

int MaxThreads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void SetMaxThreads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace mdlab::kernels

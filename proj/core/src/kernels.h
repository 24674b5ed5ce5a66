// Copyright (c) 2026 vqvc authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VQVC_SRC_KERNELS_H_
#define VQVC_SRC_KERNELS_H_

// Raw float kernels shared by the autodiff forward pass and the
// graph-free inference path, so both compute identical values.

#include <algorithm>
#include <cmath>
#include <vector>

#include "vqvc/tensor.h"

namespace vqvc {
namespace kern {

inline double dot(const float* a, const float* b, Index n) {
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

// y[m×n] = a[m×k] · b[k×n]; per-element sums run over l in ascending order
// with float64 accumulators (row buffer keeps the inner loop contiguous).
inline void matmul(const float* a, const float* b, float* y, Index m, Index k, Index n) {
  std::vector<double> row(static_cast<size_t>(n));
  for (Index i = 0; i < m; ++i) {
    std::fill(row.begin(), row.end(), 0.0);
    const float* arow = a + i * k;
    for (Index l = 0; l < k; ++l) {
      const double av = static_cast<double>(arow[l]);
      const float* brow = b + l * n;
      for (Index j = 0; j < n; ++j) row[static_cast<size_t>(j)] += av * static_cast<double>(brow[j]);
    }
    for (Index j = 0; j < n; ++j) y[i * n + j] = static_cast<float>(row[static_cast<size_t>(j)]);
  }
}

inline void softmax_row(const float* x, float* y, Index n) {
  float mx = x[0];
  for (Index i = 1; i < n; ++i) mx = std::max(mx, x[i]);
  double denom = 0.0;
  for (Index i = 0; i < n; ++i) {
    const float e = std::exp(x[i] - mx);
    y[i] = e;
    denom += static_cast<double>(e);
  }
  const float inv = static_cast<float>(1.0 / denom);
  for (Index i = 0; i < n; ++i) y[i] *= inv;
}

// Returns mean and reciprocal stddev so backward can reuse them.
inline void layer_norm_row(const float* x, const float* gamma, const float* beta, float* y, Index n,
                           float eps, double* mean_out, double* rstd_out) {
  double mean = 0.0;
  for (Index i = 0; i < n; ++i) mean += static_cast<double>(x[i]);
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double d = static_cast<double>(x[i]) - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double rstd = 1.0 / std::sqrt(var + static_cast<double>(eps));
  for (Index i = 0; i < n; ++i) {
    const double xhat = (static_cast<double>(x[i]) - mean) * rstd;
    y[i] = static_cast<float>(xhat * static_cast<double>(gamma[i]) + static_cast<double>(beta[i]));
  }
  if (mean_out) *mean_out = mean;
  if (rstd_out) *rstd_out = rstd;
}

inline float sigmoidf(float x) {
  if (x >= 0.0f) {
    const float z = std::exp(-x);
    return 1.0f / (1.0f + z);
  }
  const float z = std::exp(x);
  return z / (1.0f + z);
}

// log(sigmoid(x)) = -softplus(-x), stable at both tails.
inline float log_sigmoidf(float x) {
  if (x >= 0.0f) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

// x [T×Cin] time-major, w [Cout×Cin×K], valid convolution.
inline void conv1d(const float* x, const float* w, const float* bias, float* y, Index t_in,
                   Index c_in, Index c_out, Index kernel, Index stride) {
  const Index t_out = (t_in - kernel) / stride + 1;
  for (Index t = 0; t < t_out; ++t) {
    for (Index o = 0; o < c_out; ++o) {
      double acc = bias ? static_cast<double>(bias[o]) : 0.0;
      const float* wrow = w + o * c_in * kernel;
      for (Index c = 0; c < c_in; ++c) {
        for (Index k = 0; k < kernel; ++k) {
          acc += static_cast<double>(x[(t * stride + k) * c_in + c]) *
                 static_cast<double>(wrow[c * kernel + k]);
        }
      }
      y[t * c_out + o] = static_cast<float>(acc);
    }
  }
}

}  // namespace kern
}  // namespace vqvc

#endif  // VQVC_SRC_KERNELS_H_

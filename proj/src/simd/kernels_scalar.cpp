/*
 * Copyright 2026 The solgp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "solgp/simd/kernels.hpp"

namespace solgp::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void sqdist_accumulate_scalar(const double* col, double center, double weight,
                              double* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double d = col[i] - center;
    acc[i] += weight * (d * d);
  }
}

void min_sqdist2_update_scalar(const double* xs, const double* ys, double px,
                               double py, double* best, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - px;
    const double dy = ys[i] - py;
    const double d = dx * dx + dy * dy;
    // same selection as _mm256_min_pd(d, best): keeps best when either is NaN
    best[i] = d < best[i] ? d : best[i];
  }
}

double sum_sq_diff_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t{Backend::Scalar,          "scalar",
                             &dot_scalar,              &axpy_scalar,
                             &sqdist_accumulate_scalar, &min_sqdist2_update_scalar,
                             &sum_sq_diff_scalar};
  return t;
}

}  // namespace solgp::simd

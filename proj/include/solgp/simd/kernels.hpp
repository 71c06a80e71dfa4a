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

#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <string_view>

namespace solgp::simd {

// Inner loops shared by the linear algebra, kernel evaluation and
// distance searches. Each backend provides the same table; the active
// backend is chosen once from CPU features (override with the
// SOLGP_SIMD=scalar|avx2 environment variable or set_backend()).
//
// Element-wise kernels are bitwise identical across backends. Reductions
// (dot, sum_sq_diff) differ only in summation order.

enum class Backend { Scalar, Avx2 };

struct KernelTable {
  Backend backend;
  std::string_view name;

  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // acc[i] += weight * (col[i] - center)^2
  void (*sqdist_accumulate)(const double* col, double center, double weight,
                            double* acc, std::size_t n);
  // best[i] = min(best[i], (xs[i] - px)^2 + (ys[i] - py)^2)
  void (*min_sqdist2_update)(const double* xs, const double* ys, double px,
                             double py, double* best, std::size_t n);
  // sum_i (a[i] - b[i])^2
  double (*sum_sq_diff)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table();
#endif

bool backend_supported(Backend b);
const KernelTable& table(Backend b);

// The table used by all library code.
const KernelTable& active();
// Throws std::invalid_argument if the backend is not supported here.
void set_backend(Backend b);
Backend active_backend();

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline void sqdist_accumulate(std::span<const double> col, double center,
                              double weight, std::span<double> acc) {
  assert(col.size() == acc.size());
  active().sqdist_accumulate(col.data(), center, weight, acc.data(), col.size());
}

inline void min_sqdist2_update(std::span<const double> xs,
                               std::span<const double> ys, double px, double py,
                               std::span<double> best) {
  assert(xs.size() == ys.size() && xs.size() == best.size());
  active().min_sqdist2_update(xs.data(), ys.data(), px, py, best.data(),
                              xs.size());
}

inline double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active().sum_sq_diff(a.data(), b.data(), a.size());
}

}  // namespace solgp::simd

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

#include "solgp/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "solgp/error.hpp"
#include "solgp/simd/kernels.hpp"

namespace solgp {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::vector<double> Matrix::column(std::size_t j) const {
  std::vector<double> c(rows_);
  for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
  return c;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix Matrix::select_rows(std::span<const std::size_t> idx) const {
  Matrix out(idx.size(), cols_);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto src = row(idx[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("multiply: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) simd::axpy(a(i, k), b.row(k), out.row(i));
  return out;
}

std::vector<double> multiply(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw ShapeError("multiply: inner dimensions differ");
  std::vector<double> out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = simd::dot(a.row(i), x);
  return out;
}

bool cholesky_in_place(Matrix& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw ShapeError("cholesky: matrix not square");
  for (std::size_t i = 0; i < n; ++i) {
    auto ri = a.row(i);
    for (std::size_t j = 0; j < i; ++j) {
      const auto rj = a.row(j);
      const double s = ri[j] - simd::dot(ri.first(j), rj.first(j));
      ri[j] = s / rj[j];
    }
    const double d = ri[i] - simd::dot(ri.first(i), ri.first(i));
    if (!(d > 0.0)) return false;
    ri[i] = std::sqrt(d);
    std::fill(ri.begin() + static_cast<std::ptrdiff_t>(i) + 1, ri.end(), 0.0);
  }
  return true;
}

void solve_lower_in_place(const Matrix& lower, std::span<double> b) {
  const std::size_t n = lower.rows();
  if (b.size() != n) throw ShapeError("solve_lower: size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    const auto ri = lower.row(i);
    b[i] = (b[i] - simd::dot(ri.first(i), b.first(i))) / ri[i];
  }
}

void solve_lower_transposed_in_place(const Matrix& lower, std::span<double> b) {
  const std::size_t n = lower.rows();
  if (b.size() != n) throw ShapeError("solve_lower_transposed: size mismatch");
  for (std::size_t i = n; i-- > 0;) {
    const auto ri = lower.row(i);
    b[i] /= ri[i];
    simd::axpy(-b[i], ri.first(i), b.first(i));
  }
}

std::vector<double> cholesky_solve(const Matrix& lower, std::span<const double> b) {
  std::vector<double> x(b.begin(), b.end());
  solve_lower_in_place(lower, x);
  solve_lower_transposed_in_place(lower, x);
  return x;
}

double cholesky_log_det(const Matrix& lower) {
  double s = 0.0;
  for (std::size_t i = 0; i < lower.rows(); ++i) s += std::log(lower(i, i));
  return 2.0 * s;
}

Matrix cholesky_inverse(const Matrix& lower) {
  const std::size_t n = lower.rows();
  // Row j of `u` holds column j of L^{-1} (so u is upper triangular).
  Matrix u(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    auto x = u.row(j);
    for (std::size_t i = j; i < n; ++i) {
      const auto ri = lower.row(i);
      const double rhs = (i == j ? 1.0 : 0.0) -
                         simd::dot(ri.subspan(j, i - j), x.subspan(j, i - j));
      x[i] = rhs / ri[i];
    }
  }
  Matrix inv(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = simd::dot(u.row(i).subspan(j), u.row(j).subspan(j));
      inv(i, j) = v;
      inv(j, i) = v;
    }
  }
  return inv;
}

LeastSquaresResult least_squares(const Matrix& design, std::span<const double> y,
                                 double rank_tol) {
  const std::size_t n = design.rows();
  const std::size_t p = design.cols();
  if (y.size() != n) throw ShapeError("least_squares: response length differs from design rows");
  if (n < p) throw SingularDesignError("least_squares: fewer rows than columns");

  Matrix r = design;
  std::vector<double> qty(y.begin(), y.end());
  std::vector<double> v(n);
  std::vector<double> diag(p);

  for (std::size_t k = 0; k < p; ++k) {
    double norm = 0.0;
    for (std::size_t i = k; i < n; ++i) norm += r(i, k) * r(i, k);
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      diag[k] = 0.0;
      continue;
    }
    const double alpha = r(k, k) > 0 ? -norm : norm;
    for (std::size_t i = k; i < n; ++i) v[i] = r(i, k);
    v[k] -= alpha;
    double vnorm2 = 0.0;
    for (std::size_t i = k; i < n; ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 > 0.0) {
      for (std::size_t j = k; j < p; ++j) {
        double s = 0.0;
        for (std::size_t i = k; i < n; ++i) s += v[i] * r(i, j);
        const double f = 2.0 * s / vnorm2;
        for (std::size_t i = k; i < n; ++i) r(i, j) -= f * v[i];
      }
      double s = 0.0;
      for (std::size_t i = k; i < n; ++i) s += v[i] * qty[i];
      const double f = 2.0 * s / vnorm2;
      for (std::size_t i = k; i < n; ++i) qty[i] -= f * v[i];
    }
    diag[k] = r(k, k);
  }

  double max_diag = 0.0;
  for (double d : diag) max_diag = std::max(max_diag, std::abs(d));
  for (std::size_t k = 0; k < p; ++k) {
    if (!(std::abs(diag[k]) > rank_tol * max_diag)) {
      throw SingularDesignError("least_squares: design matrix is rank deficient (column " +
                                std::to_string(k) + ")");
    }
  }

  LeastSquaresResult out;
  out.coef.assign(p, 0.0);
  for (std::size_t k = p; k-- > 0;) {
    double s = qty[k];
    for (std::size_t j = k + 1; j < p; ++j) s -= r(k, j) * out.coef[j];
    out.coef[k] = s / r(k, k);
  }
  out.fitted = multiply(design, out.coef);
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - out.fitted[i];
    out.rss += e * e;
  }
  return out;
}

}  // namespace solgp

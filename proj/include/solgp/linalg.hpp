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

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace solgp {

// Dense row-major matrix. Small and deliberately plain: the GP code
// only needs Cholesky, triangular solves and a least-squares solver.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  // Column j copied out (used to build structure-of-arrays views).
  std::vector<double> column(std::size_t j) const;
  Matrix transposed() const;
  // Rows selected by index, in the given order.
  Matrix select_rows(std::span<const std::size_t> idx) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix multiply(const Matrix& a, const Matrix& b);
std::vector<double> multiply(const Matrix& a, std::span<const double> x);

// In-place lower Cholesky factor of a symmetric matrix (upper triangle is
// zeroed). Returns false when a pivot is not strictly positive; the
// contents are then unspecified.
bool cholesky_in_place(Matrix& a);

// Solves L x = b in place, L lower triangular.
void solve_lower_in_place(const Matrix& lower, std::span<double> b);
// Solves L^T x = b in place, L lower triangular.
void solve_lower_transposed_in_place(const Matrix& lower, std::span<double> b);
// A^{-1} b for A = L L^T.
std::vector<double> cholesky_solve(const Matrix& lower, std::span<const double> b);
// log|A| for A = L L^T.
double cholesky_log_det(const Matrix& lower);
// A^{-1} for A = L L^T, full symmetric matrix.
Matrix cholesky_inverse(const Matrix& lower);

struct LeastSquaresResult {
  std::vector<double> coef;
  std::vector<double> fitted;
  double rss = 0.0;
};

// Householder-QR least squares. Throws SingularDesignError when the design
// is numerically rank deficient (|R_kk| <= rank_tol * max|R_jj|).
LeastSquaresResult least_squares(const Matrix& design, std::span<const double> y,
                                 double rank_tol = 1e-10);

}  // namespace solgp

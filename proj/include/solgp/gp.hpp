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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "solgp/linalg.hpp"

namespace solgp {

// Smallest nugget and first rung of the jitter ladder (relative to the
// signal variance). The ladder escalates x10 up to kJitterMax.
inline constexpr double kJitterFloor = 1e-8;
inline constexpr double kJitterMax = 1e-4;

// Separable squared-exponential kernel with nugget:
//   k(x, x') = signal_variance * exp(-sum_k (x_k - x'_k)^2 / lengthscales[k])
// Training covariance is signal_variance * (R + nugget * I). Lengthscales
// are in squared input units.
struct KernelParams {
  std::vector<double> lengthscales;
  double signal_variance = 1.0;
  double nugget = kJitterFloor;

  // log lengthscales..., log signal_variance, log nugget
  std::vector<double> to_log() const;
  static KernelParams from_log(std::span<const double> v);
  friend bool operator==(const KernelParams&, const KernelParams&) = default;
};

// Throws ShapeError on dimension mismatch.
double kernel(std::span<const double> x, std::span<const double> x2, const KernelParams& params);

struct Prediction {
  std::vector<double> mean;
  std::vector<double> variance;

  std::size_t size() const noexcept { return mean.size(); }
};

struct PredictionWithCov {
  std::vector<double> mean;
  Matrix cov;
};

struct NllResult {
  double value = 0.0;
  std::vector<double> gradient;  // w.r.t. KernelParams::to_log() coordinates
  double jitter = 0.0;           // extra nugget the factorization needed
};

// Negative log marginal likelihood of y (centered on its own mean)
// under a zero-mean GP, plus its gradient in log-parameter space.
//
// Throws ConditioningError when the covariance cannot be factorized after
// jitter escalation, or when the nugget is below the jitter floor and
// the design repeats an input (an exactly singular covariance that no
// jitter is allowed to hide).
NllResult neg_log_likelihood(const Matrix& x, std::span<const double> y,
                             const KernelParams& params, bool with_gradient = true);

struct GpFitConfig {
  int starts = 5;
  std::uint64_t seed = 0;
  int max_iter = 200;
  // When set, skip optimization and factorize at these parameters.
  std::optional<KernelParams> fixed;
  // When set, a single optimizer run from these parameters (clamped to
  // the bounds) replaces the Latin-hypercube starts.
  std::optional<KernelParams> warm_start;
};

class GPModel {
 public:
  // Factorizes the training covariance at `params` (no optimization).
  static GPModel build(Matrix x, std::vector<double> y, KernelParams params);

  const Matrix& inputs() const noexcept { return x_; }
  const std::vector<double>& outputs() const noexcept { return y_; }
  const KernelParams& params() const noexcept { return params_; }
  const Matrix& chol() const noexcept { return chol_; }
  const std::vector<double>& alpha() const noexcept { return alpha_; }
  double mean_offset() const noexcept { return mean_offset_; }
  double jitter() const noexcept { return jitter_; }
  double nll() const noexcept { return nll_; }
  std::size_t size() const noexcept { return y_.size(); }
  std::size_t dim() const noexcept { return x_.cols(); }

  // Training covariance as factorized (including any jitter).
  Matrix covariance() const;

  Prediction predict(const Matrix& xnew, bool include_noise = false) const;
  PredictionWithCov predict_cov(const Matrix& xnew, bool include_noise = false) const;

  // Fit diagnostics, one line per optimizer start (empty for build()).
  const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

  std::string to_json() const;
  static GPModel from_json(const std::string& text);

 private:
  friend GPModel fit_gp(const Matrix&, std::span<const double>, const GpFitConfig&);

  // Covariance column k(X_N, x) into `out` (length N).
  void cross_cov(std::span<const double> x, std::span<double> out) const;

  Matrix x_;
  std::vector<std::vector<double>> x_cols_;
  std::vector<double> y_;
  KernelParams params_;
  Matrix chol_;
  std::vector<double> alpha_;
  double mean_offset_ = 0.0;
  double jitter_ = 0.0;
  double nll_ = 0.0;
  std::vector<std::string> diagnostics_;
};

// Multi-start maximum-likelihood fit. Throws InsufficientDataError for
// fewer than 5 points and FitError (with per-start diagnostics) when every
// start fails.
GPModel fit_gp(const Matrix& x, std::span<const double> y, const GpFitConfig& config = {});

// Free function form of GPModel::predict.
inline Prediction predict_gp(const GPModel& model, const Matrix& xnew, bool include_noise = false) {
  return model.predict(xnew, include_noise);
}

// Log-parameter box used by fit_gp for a given training set.
struct ParamBounds {
  std::vector<double> lower;
  std::vector<double> upper;
};
ParamBounds param_bounds(const Matrix& x, std::span<const double> y);

}  // namespace solgp

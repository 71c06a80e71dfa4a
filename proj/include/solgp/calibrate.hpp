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

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "solgp/gp.hpp"
#include "solgp/linalg.hpp"
#include "solgp/localgp.hpp"

namespace solgp {

// A trained predictor: a global GP, a local GP over stored data, or a
// constant with zero variance (the identity element for bias correction).
class Emulator {
 public:
  struct Local {
    Matrix x;
    std::vector<double> y;
    LocalConfig config;
  };
  struct Constant {
    double value = 0.0;
  };

  explicit Emulator(GPModel model) : impl_(std::move(model)) {}
  explicit Emulator(Local local) : impl_(std::move(local)) {}
  explicit Emulator(Constant c) : impl_(c) {}

  // Trains a global (no local config) or local emulator on (x, y).
  static Emulator train(const Matrix& x, std::span<const double> y, const GpFitConfig& fit,
                        const std::optional<LocalConfig>& local = std::nullopt);

  Prediction predict(const Matrix& xnew, bool include_noise = false) const;

  bool is_local() const { return std::holds_alternative<Local>(impl_); }
  // nullptr unless global
  const GPModel* global_model() const { return std::get_if<GPModel>(&impl_); }
  // Nugget variance of a global model; zero for a constant; nullopt for
  // local emulators, whose nugget varies per query.
  std::optional<double> noise_variance() const;

 private:
  std::variant<GPModel, Local, Constant> impl_;
};

struct BiasModel {
  std::shared_ptr<const Emulator> surrogate;  // never refit here
  Emulator discrepancy;
  std::optional<double> noise_var;  // field noise, read off the discrepancy nugget
};

// Trains the discrepancy on field residuals y - surrogate mean. Throws
// InsufficientDataError with fewer than 5 residuals and ShapeError when
// the surrogate predictions do not align with the field data.
BiasModel fit_bias(const Matrix& x_field, std::span<const double> y_field,
                   std::shared_ptr<const Emulator> surrogate, const Prediction& surrogate_at_field,
                   const GpFitConfig& fit, const std::optional<LocalConfig>& local = std::nullopt);

// Surrogate mean + discrepancy mean, variances summed. The surrogate
// variance is latent; include_noise adds the field noise via the
// discrepancy.
Prediction bias_corrected_predict(const BiasModel& bm, const Matrix& xnew, bool include_noise = true);

// Conditions on true simulator output instead of the surrogate: mean is
// true_sim + discrepancy, variance is the discrepancy's alone. Throws
// CoverageError when a row has no simulator value.
Prediction bias_corrected_predict(const BiasModel& bm, const Matrix& xnew,
                                  std::span<const std::optional<double>> true_sim,
                                  bool include_noise = true);

inline constexpr double kVarianceFloor = 1e-10;

// Inverse-variance weighting of independent sources, pointwise. Throws
// EmptyInputError without sources and ShapeError on length mismatch.
Prediction ivw_fuse(std::span<const Prediction> sources, double floor = kVarianceFloor);

}  // namespace solgp

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
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "solgp/calibrate.hpp"
#include "solgp/data.hpp"
#include "solgp/gp.hpp"
#include "solgp/linalg.hpp"

namespace solgp {

inline constexpr double kYearDays = 365.0;
inline constexpr std::size_t kMinObs = 10;

// Harmonic predictors at day t, with t measured from day_origin.
struct Harmonics {
  double s = 0.0;
  double c = 1.0;
};
Harmonics harmonics(int day, int day_origin = 0);

struct HarmonicCoeffs {
  double beta0 = 0.0;
  double beta1 = 0.0;  // sine
  double beta2 = 0.0;  // cosine
  double resid_var = 0.0;
  std::size_t n_obs = 0;
};

struct OlsOptions {
  std::size_t min_obs = kMinObs;
  bool harmonics = true;  // false: intercept only (beta1 = beta2 = 0)
  int day_origin = 0;
};

// OLS of value on [1, sin(2 pi t/365), cos(2 pi t/365)], residual variance
// over n - 3 (n - 1 intercept-only). Throws InsufficientDataError below
// min_obs and SingularDesignError on a rank-deficient design.
HarmonicCoeffs fit_site_ols(std::span<const DayValue> series, const OlsOptions& opts = {});

struct SeasonalConfig {
  OlsOptions ols;
  // Phase origin; defaults to the dataset's first day.
  std::optional<int> day_origin;
  GpFitConfig fit;
  unsigned jobs = 1;
};

// Per-site OLS for one source. Sites below min_obs or with a singular
// design get nullopt and are listed in `excluded`.
struct SiteCoefficients {
  std::vector<std::optional<HarmonicCoeffs>> coeffs;  // by dataset site index
  std::vector<std::size_t> excluded;
};
SiteCoefficients fit_site_coefficients(const Dataset& ds, SourceId source, const OlsOptions& opts,
                                       unsigned jobs = 1);

// Three GP-smoothed coefficient surfaces over (lat, lon).
struct CoeffField {
  std::vector<Emulator> beta;                  // k = 0, 1, 2
  Matrix locations;                            // training sites, (lat, lon)
  std::vector<std::size_t> sites;              // dataset indices of training sites
  std::array<std::vector<double>, 3> beta_hat;  // OLS values at training sites
  std::vector<std::size_t> excluded;
  double resid_var = 0.0;  // mean OLS residual variance over training sites
  int day_origin = 0;
};

// Needs at least 5 sites with coefficients. Without harmonics the sine
// and cosine surfaces are identically zero. Fit errors name the
// coefficient index.
CoeffField smooth_coefficients(const Matrix& locations, std::span<const std::optional<HarmonicCoeffs>> coeffs,
                               const GpFitConfig& fit, bool harmonics = true, unsigned jobs = 1,
                               int day_origin = 0);

// Same, with a caller-supplied fit for coefficient k.
using CoeffFitter = std::function<Emulator(std::size_t k, const Matrix& x, std::span<const double> y)>;
CoeffField smooth_coefficients(const Matrix& locations, std::span<const std::optional<HarmonicCoeffs>> coeffs,
                               const CoeffFitter& fitter, bool harmonics = true, unsigned jobs = 1,
                               int day_origin = 0);

// fit_site_coefficients followed by smooth_coefficients.
CoeffField fit_coeff_field(const Dataset& ds, SourceId source, const SeasonalConfig& cfg);

Matrix site_locations(const Dataset& ds);

// Smoothed coefficients at new locations (latent posteriors).
struct CoeffPrediction {
  std::array<Prediction, 3> beta;
};
CoeffPrediction predict_coefficients(const CoeffField& cf, const Matrix& locations);

// Mean and variance at one location row and day, treating the three
// coefficient posteriors as independent. include_noise adds the pooled
// daily residual variance.
void seasonal_combine(const CoeffPrediction& cp, std::size_t row, int day, int day_origin,
                      double resid_var, bool include_noise, double& mean, double& var);

Prediction seasonal_predict(const CoeffField& cf, const Matrix& locations, int day,
                            bool include_noise = false);

// Daily bias correction in space-time: a coefficient field for the
// simulator and one for field-minus-surrogate residuals.
struct SeasonalBiasModel {
  std::shared_ptr<const CoeffField> surrogate;
  CoeffField discrepancy;

  // surrogate + discrepancy, variances summed
  Prediction predict(const Matrix& locations, int day, bool include_noise = true) const;
  // true simulator + discrepancy, discrepancy variance only; nullopt
  // entries throw CoverageError
  Prediction predict(const Matrix& locations, int day, std::span<const std::optional<double>> true_sim,
                     bool include_noise = true) const;
};

// Residual dataset: field observations minus the surrogate's in-sample
// daily means at the field sites.
Dataset seasonal_residuals(const Dataset& field_ds, const CoeffField& surrogate);

SeasonalBiasModel seasonal_bias_pipeline(const Dataset& field_ds, const Dataset& sim_ds, SourceId sim_source,
                                         const SeasonalConfig& cfg);

// Same, reusing an already fitted surrogate.
SeasonalBiasModel seasonal_bias_pipeline(const Dataset& field_ds, std::shared_ptr<const CoeffField> surrogate,
                                         const SeasonalConfig& cfg);

struct ARCoeffs {
  // intercept, sin, cos, lag-1 field, simA, simB
  std::array<double, 6> beta{};
  double sigma2 = 0.0;
};

struct ARFit {
  ARCoeffs coeffs;
  std::vector<DayValue> fitted;  // in-sample, on the complete rows
  std::size_t n_rows = 0;
};

// OLS on days where field at t and t-1 and both simulators at t are
// observed. An all-zero simulator column is dropped (its coefficient is
// 0). Throws InsufficientDataError with fewer than 20 complete rows.
ARFit fit_ar_seasonal(std::span<const DayValue> field, std::span<const DayValue> sim_a,
                      std::span<const DayValue> sim_b, int day_origin = 0);

}  // namespace solgp

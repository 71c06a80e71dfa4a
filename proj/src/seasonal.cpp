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

#include "solgp/seasonal.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "solgp/error.hpp"
#include "solgp/parallel.hpp"

namespace solgp {

Harmonics harmonics(int day, int day_origin) {
  const double w = 2.0 * std::numbers::pi * static_cast<double>(day - day_origin) / kYearDays;
  return {std::sin(w), std::cos(w)};
}

HarmonicCoeffs fit_site_ols(std::span<const DayValue> series, const OlsOptions& opts) {
  const std::size_t n = series.size();
  if (n < opts.min_obs || n < (opts.harmonics ? 4u : 2u))
    throw InsufficientDataError("site has " + std::to_string(n) + " observations, need " +
                                std::to_string(opts.min_obs));
  HarmonicCoeffs out;
  out.n_obs = n;
  if (!opts.harmonics) {
    double sum = 0.0;
    for (const auto& dv : series) sum += dv.value;
    out.beta0 = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& dv : series) ss += (dv.value - out.beta0) * (dv.value - out.beta0);
    out.resid_var = ss / static_cast<double>(n - 1);
    return out;
  }
  Matrix design(n, 3);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto h = harmonics(series[i].day, opts.day_origin);
    design(i, 0) = 1.0;
    design(i, 1) = h.s;
    design(i, 2) = h.c;
    y[i] = series[i].value;
  }
  const auto ls = least_squares(design, y);
  out.beta0 = ls.coef[0];
  out.beta1 = ls.coef[1];
  out.beta2 = ls.coef[2];
  out.resid_var = ls.rss / static_cast<double>(n - 3);
  return out;
}

SiteCoefficients fit_site_coefficients(const Dataset& ds, SourceId source, const OlsOptions& opts,
                                       unsigned jobs) {
  SiteCoefficients out;
  out.coeffs.resize(ds.size());
  parallel_for(ds.size(), jobs, [&](std::size_t s) {
    try {
      out.coeffs[s] = fit_site_ols(ds.series(s, source), opts);
    } catch (const InsufficientDataError&) {
    } catch (const SingularDesignError&) {
    }
  });
  for (std::size_t s = 0; s < ds.size(); ++s)
    if (!out.coeffs[s]) out.excluded.push_back(s);
  return out;
}

Matrix site_locations(const Dataset& ds) {
  Matrix x(ds.size(), 2);
  for (std::size_t s = 0; s < ds.size(); ++s) {
    x(s, 0) = ds.sites()[s].lat;
    x(s, 1) = ds.sites()[s].lon;
  }
  return x;
}

CoeffField smooth_coefficients(const Matrix& locations, std::span<const std::optional<HarmonicCoeffs>> coeffs,
                               const GpFitConfig& fit, bool with_harmonics, unsigned jobs, int day_origin) {
  const CoeffFitter fitter = [&fit](std::size_t, const Matrix& x, std::span<const double> y) {
    return Emulator(fit_gp(x, y, fit));
  };
  return smooth_coefficients(locations, coeffs, fitter, with_harmonics, jobs, day_origin);
}

CoeffField smooth_coefficients(const Matrix& locations, std::span<const std::optional<HarmonicCoeffs>> coeffs,
                               const CoeffFitter& fitter, bool with_harmonics, unsigned jobs, int day_origin) {
  if (coeffs.size() != locations.rows()) throw ShapeError("smooth_coefficients: one coefficient set per site");
  CoeffField cf;
  cf.day_origin = day_origin;
  double rv = 0.0;
  for (std::size_t s = 0; s < coeffs.size(); ++s) {
    if (!coeffs[s]) {
      cf.excluded.push_back(s);
      continue;
    }
    cf.sites.push_back(s);
    cf.beta_hat[0].push_back(coeffs[s]->beta0);
    cf.beta_hat[1].push_back(coeffs[s]->beta1);
    cf.beta_hat[2].push_back(coeffs[s]->beta2);
    rv += coeffs[s]->resid_var;
  }
  if (cf.sites.size() < 5)
    throw InsufficientDataError("coefficient smoothing needs at least 5 sites, have " +
                                std::to_string(cf.sites.size()));
  cf.resid_var = rv / static_cast<double>(cf.sites.size());
  cf.locations = locations.select_rows(cf.sites);

  const std::size_t nk = with_harmonics ? 3 : 1;
  std::vector<std::optional<Emulator>> fitted(3);
  parallel_for(nk, jobs, [&](std::size_t k) {
    try {
      fitted[k].emplace(fitter(k, cf.locations, cf.beta_hat[k]));
    } catch (const FitError& e) {
      throw FitError("coefficient " + std::to_string(k) + ": " + e.what(), e.diagnostics());
    } catch (const Error& e) {
      throw FitError("coefficient " + std::to_string(k) + ": " + e.what(), {});
    }
  });
  for (std::size_t k = 0; k < 3; ++k)
    cf.beta.push_back(k < nk ? std::move(*fitted[k]) : Emulator(Emulator::Constant{0.0}));
  return cf;
}

CoeffField fit_coeff_field(const Dataset& ds, SourceId source, const SeasonalConfig& cfg) {
  OlsOptions ols = cfg.ols;
  ols.day_origin = cfg.day_origin.value_or(ds.day_range().first);
  const auto sc = fit_site_coefficients(ds, source, ols, cfg.jobs);
  return smooth_coefficients(site_locations(ds), sc.coeffs, cfg.fit, ols.harmonics, cfg.jobs, ols.day_origin);
}

CoeffPrediction predict_coefficients(const CoeffField& cf, const Matrix& locations) {
  if (cf.beta.size() != 3) throw ShapeError("coefficient field needs three surfaces");
  CoeffPrediction cp;
  for (std::size_t k = 0; k < 3; ++k) cp.beta[k] = cf.beta[k].predict(locations, false);
  return cp;
}

void seasonal_combine(const CoeffPrediction& cp, std::size_t row, int day, int day_origin, double resid_var,
                      bool include_noise, double& mean, double& var) {
  const auto h = harmonics(day, day_origin);
  mean = cp.beta[0].mean[row] + cp.beta[1].mean[row] * h.s + cp.beta[2].mean[row] * h.c;
  var = cp.beta[0].variance[row] + h.s * h.s * cp.beta[1].variance[row] + h.c * h.c * cp.beta[2].variance[row];
  if (include_noise) var += resid_var;
}

Prediction seasonal_predict(const CoeffField& cf, const Matrix& locations, int day, bool include_noise) {
  const auto cp = predict_coefficients(cf, locations);
  Prediction out;
  out.mean.resize(locations.rows());
  out.variance.resize(locations.rows());
  for (std::size_t i = 0; i < locations.rows(); ++i)
    seasonal_combine(cp, i, day, cf.day_origin, cf.resid_var, include_noise, out.mean[i], out.variance[i]);
  return out;
}

Prediction SeasonalBiasModel::predict(const Matrix& locations, int day, bool include_noise) const {
  Prediction s = seasonal_predict(*surrogate, locations, day, false);
  const Prediction b = seasonal_predict(discrepancy, locations, day, include_noise);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s.mean[i] += b.mean[i];
    s.variance[i] += b.variance[i];
  }
  return s;
}

Prediction SeasonalBiasModel::predict(const Matrix& locations, int day,
                                      std::span<const std::optional<double>> true_sim, bool include_noise) const {
  if (true_sim.size() != locations.rows())
    throw CoverageError("true simulator values cover " + std::to_string(true_sim.size()) + " of " +
                        std::to_string(locations.rows()) + " query rows");
  Prediction b = seasonal_predict(discrepancy, locations, day, include_noise);
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!true_sim[i])
      throw CoverageError("no simulator value for query row " + std::to_string(i) + " on day " +
                          std::to_string(day));
    b.mean[i] += *true_sim[i];
  }
  return b;
}

Dataset seasonal_residuals(const Dataset& field_ds, const CoeffField& surrogate) {
  const auto cp = predict_coefficients(surrogate, site_locations(field_ds));
  FittedValues fitted;
  for (std::size_t s = 0; s < field_ds.size(); ++s)
    for (const auto& dv : field_ds.series(s, SourceId::Field)) {
      double m = 0.0, v = 0.0;
      seasonal_combine(cp, s, dv.day, surrogate.day_origin, 0.0, false, m, v);
      fitted.emplace(SiteDay{s, dv.day}, m);
    }
  return residual_series(field_ds, SourceId::Field, fitted);
}

SeasonalBiasModel seasonal_bias_pipeline(const Dataset& field_ds, std::shared_ptr<const CoeffField> surrogate,
                                         const SeasonalConfig& cfg) {
  SeasonalConfig c = cfg;
  c.day_origin = surrogate->day_origin;
  const Dataset resid = seasonal_residuals(field_ds, *surrogate);
  return SeasonalBiasModel{std::move(surrogate), fit_coeff_field(resid, SourceId::Field, c)};
}

SeasonalBiasModel seasonal_bias_pipeline(const Dataset& field_ds, const Dataset& sim_ds, SourceId sim_source,
                                         const SeasonalConfig& cfg) {
  SeasonalConfig c = cfg;
  if (!c.day_origin) c.day_origin = sim_ds.day_range().first;
  auto sur = std::make_shared<const CoeffField>(fit_coeff_field(sim_ds, sim_source, c));
  return seasonal_bias_pipeline(field_ds, std::move(sur), c);
}

namespace {

const DayValue* find_day(std::span<const DayValue> s, int day) {
  auto it = std::lower_bound(s.begin(), s.end(), day, [](const DayValue& dv, int d) { return dv.day < d; });
  return it != s.end() && it->day == day ? &*it : nullptr;
}

bool all_zero(const Matrix& m, std::size_t col) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    if (m(i, col) != 0.0) return false;
  return true;
}

}  // namespace

ARFit fit_ar_seasonal(std::span<const DayValue> field, std::span<const DayValue> sim_a,
                      std::span<const DayValue> sim_b, int day_origin) {
  std::vector<std::array<double, 7>> rows;  // six predictors and the response
  std::vector<int> days;
  for (const auto& f : field) {
    const auto* lag = find_day(field, f.day - 1);
    const auto* a = find_day(sim_a, f.day);
    const auto* b = find_day(sim_b, f.day);
    if (!lag || !a || !b) continue;
    const auto h = harmonics(f.day, day_origin);
    rows.push_back({1.0, h.s, h.c, lag->value, a->value, b->value, f.value});
    days.push_back(f.day);
  }
  if (rows.size() < 20)
    throw InsufficientDataError("autoregressive fit needs 20 complete rows, have " + std::to_string(rows.size()));

  Matrix full(rows.size(), 6);
  std::vector<double> y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < 6; ++k) full(i, k) = rows[i][k];
    y[i] = rows[i][6];
  }
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < 6; ++k)
    if (k < 4 || !all_zero(full, k)) keep.push_back(k);
  Matrix design(rows.size(), keep.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < keep.size(); ++j) design(i, j) = full(i, keep[j]);
  const auto ls = least_squares(design, y);

  ARFit out;
  out.n_rows = rows.size();
  for (std::size_t j = 0; j < keep.size(); ++j) out.coeffs.beta[keep[j]] = ls.coef[j];
  out.coeffs.sigma2 = ls.rss / static_cast<double>(rows.size() - keep.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out.fitted.push_back({days[i], ls.fitted[i]});
  return out;
}

}  // namespace solgp

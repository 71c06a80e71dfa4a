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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "solgp/error.hpp"
#include "solgp/seasonal.hpp"
#include "test_support.hpp"

using namespace solgp;
using solgp::testing::correlation;
using solgp::testing::seasonal_dataset;
using solgp::testing::SeasonalTruth;

namespace {

std::vector<DayValue> harmonic_series(int first, int last, double b0, double b1, double b2, double sd,
                                      std::mt19937_64* rng = nullptr) {
  std::normal_distribution<double> z(0.0, sd);
  std::vector<DayValue> out;
  for (int d = first; d <= last; ++d) {
    const auto h = harmonics(d);
    out.push_back({d, b0 + b1 * h.s + b2 * h.c + (rng ? z(*rng) : 0.0)});
  }
  return out;
}

double sample_var(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

Matrix hull_grid(std::size_t k) {
  Matrix g(k * k, 2);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      g(i * k + j, 0) = 32.0 + 11.0 * static_cast<double>(i) / static_cast<double>(k - 1);
      g(i * k + j, 1) = -98.0 + 11.0 * static_cast<double>(j) / static_cast<double>(k - 1);
    }
  return g;
}

CoeffField constant_field(double b0, double b1, double b2) {
  CoeffField cf;
  for (double b : {b0, b1, b2}) cf.beta.emplace_back(Emulator::Constant{b});
  return cf;
}

}  // namespace

TEST_CASE("harmonic OLS recovers exact coefficients") {
  const auto s = harmonic_series(0, 364, 100.0, 20.0, 0.0, 0.0);
  const auto c = fit_site_ols(s);
  CHECK(c.beta0 == doctest::Approx(100.0).epsilon(1e-10));
  CHECK(c.beta1 == doctest::Approx(20.0).epsilon(1e-10));
  CHECK(std::abs(c.beta2) < 1e-8);
  CHECK(c.n_obs == 365);
  CHECK(c.resid_var < 1e-16);

  const auto k = fit_site_ols(harmonic_series(3, 80, 42.5, 0.0, 0.0, 0.0));
  CHECK(k.beta0 == doctest::Approx(42.5).epsilon(1e-12));
  CHECK(std::abs(k.beta1) < 1e-8);
  CHECK(std::abs(k.beta2) < 1e-8);
  CHECK(k.resid_var < 1e-16);
}

TEST_CASE("harmonic OLS matches the normal equations") {
  std::mt19937_64 rng(31);
  const auto s = harmonic_series(0, 558, 300.0, -40.0, 75.0, 50.0, &rng);
  const auto c = fit_site_ols(s);
  Eigen::MatrixXd x(559, 3);
  Eigen::VectorXd y(559);
  for (int i = 0; i < 559; ++i) {
    const double w = 2.0 * std::numbers::pi * s[i].day / 365.0;
    x(i, 0) = 1.0;
    x(i, 1) = std::sin(w);
    x(i, 2) = std::cos(w);
    y(i) = s[i].value;
  }
  const Eigen::VectorXd b = (x.transpose() * x).inverse() * (x.transpose() * y);
  const double rss = (y - x * b).squaredNorm();
  CHECK(c.beta0 == doctest::Approx(b(0)).epsilon(1e-8));
  CHECK(c.beta1 == doctest::Approx(b(1)).epsilon(1e-8));
  CHECK(c.beta2 == doctest::Approx(b(2)).epsilon(1e-8));
  CHECK(c.resid_var == doctest::Approx(rss / 556.0).epsilon(1e-8));
}

TEST_CASE("harmonic OLS errors") {
  CHECK_THROWS_AS(fit_site_ols(harmonic_series(0, 8, 1, 1, 1, 0)), InsufficientDataError);
  std::vector<DayValue> same(12, DayValue{5, 3.0});
  for (std::size_t i = 0; i < same.size(); ++i) same[i].value = static_cast<double>(i);
  CHECK_THROWS_AS(fit_site_ols(same), SingularDesignError);
  OlsOptions few;
  few.min_obs = 4;
  CHECK_NOTHROW(fit_site_ols(harmonic_series(0, 3, 1, 1, 1, 0), few));
}

TEST_CASE("fitted values do not depend on the day origin") {
  std::mt19937_64 rng(32);
  auto s = harmonic_series(0, 200, 250.0, 30.0, -10.0, 20.0, &rng);
  auto fitted = [](const std::vector<DayValue>& series, int origin) {
    OlsOptions o;
    o.day_origin = origin;
    const auto c = fit_site_ols(series, o);
    std::vector<double> f;
    for (const auto& dv : series) {
      const auto h = harmonics(dv.day, origin);
      f.push_back(c.beta0 + c.beta1 * h.s + c.beta2 * h.c);
    }
    return f;
  };
  const auto base = fitted(s, 0);
  for (int c : {17, 100, 365, 1000}) {
    auto shifted = s;
    for (auto& dv : shifted) dv.day += c;
    const auto f = fitted(shifted, 0);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(f[i] == doctest::Approx(base[i]).epsilon(1e-9));
    const auto g = fitted(shifted, c);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(base[i]).epsilon(1e-12));
  }
}

TEST_CASE("constant coefficients smooth to the constant") {
  std::mt19937_64 rng(33);
  SeasonalTruth t;
  t.beta = [](SourceId, double, double) { return std::array<double, 3>{250.0, 40.0, -60.0}; };
  t.noise_sd = 15.0;
  const auto ds = seasonal_dataset(rng, 60, 365, t);
  SeasonalConfig cfg;
  cfg.fit.starts = 3;
  const auto cf = fit_coeff_field(ds, SourceId::Field, cfg);
  const std::array<double, 3> truth{250.0, 40.0, -60.0};
  for (std::size_t k = 0; k < 3; ++k) {
    // predictive sd of the OLS estimate, as the latent sd omits the mean
    const auto p = cf.beta[k].predict(hull_grid(10), true);
    for (std::size_t i = 0; i < p.size(); ++i)
      CHECK(std::abs(p.mean[i] - truth[k]) <= 2.0 * std::sqrt(p.variance[i]));
  }
}

TEST_CASE("smoothing shrinks the spread and recovers a planted field") {
  std::mt19937_64 rng(34);
  SeasonalTruth t;
  t.beta = [](SourceId, double lat, double lon) {
    return std::array<double, 3>{100.0 + 10.0 * lat / 45.0, 20.0 + 5.0 * std::sin(lon / 3.0),
                                 -30.0 + 0.2 * (lat - 37.0) * (lat - 37.0)};
  };
  t.noise_sd = 30.0;
  t.missing = 0.1;
  const auto ds = seasonal_dataset(rng, 150, 559, t);
  SeasonalConfig cfg;
  cfg.fit.starts = 3;
  const auto cf = fit_coeff_field(ds, SourceId::Field, cfg);
  CHECK(cf.excluded.empty());
  CHECK(cf.day_origin == 0);
  const auto at_sites = predict_coefficients(cf, cf.locations);
  for (std::size_t k = 0; k < 3; ++k) CHECK(sample_var(at_sites.beta[k].mean) <= sample_var(cf.beta_hat[k]));

  const Matrix g = hull_grid(15);
  const auto cp = predict_coefficients(cf, g);
  std::vector<double> tr;
  for (std::size_t i = 0; i < g.rows(); ++i) tr.push_back(t.beta(SourceId::Field, g(i, 0), g(i, 1))[0]);
  CHECK(correlation(cp.beta[0].mean, tr) >= 0.95);
}

TEST_CASE("sites below the observation threshold are excluded") {
  std::mt19937_64 rng(35);
  SeasonalTruth t;
  t.beta = [](SourceId, double, double) { return std::array<double, 3>{200.0, 10.0, 10.0}; };
  auto ds = seasonal_dataset(rng, 12, 60, t);
  Dataset::Table obs = ds.observations();
  for (auto& [key, v] : obs)
    if (key.site == 4 && key.day >= 5) v.reset();
  const Dataset thin(ds.sites(), obs);
  const auto sc = fit_site_coefficients(thin, SourceId::Field, OlsOptions{});
  CHECK(sc.excluded == std::vector<std::size_t>{4});
  SeasonalConfig cfg;
  cfg.fit.starts = 1;
  const auto cf = fit_coeff_field(thin, SourceId::Field, cfg);
  CHECK(cf.excluded == std::vector<std::size_t>{4});
  CHECK(cf.sites.size() == 11);

  std::vector<std::optional<HarmonicCoeffs>> four(4, HarmonicCoeffs{1, 2, 3, 1, 20});
  CHECK_THROWS_AS(smooth_coefficients(Matrix(4, 2), four, GpFitConfig{}), InsufficientDataError);
}

TEST_CASE("coefficient smoothing ignores site order") {
  std::mt19937_64 rng(36);
  SeasonalTruth t;
  t.beta = [](SourceId, double lat, double) { return std::array<double, 3>{100.0 + lat, 20.0, 5.0}; };
  const auto ds = seasonal_dataset(rng, 30, 120, t);
  const auto sc = fit_site_coefficients(ds, SourceId::Field, OlsOptions{});
  const Matrix x = site_locations(ds);
  std::vector<std::size_t> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::optional<HarmonicCoeffs>> permuted;
  for (auto i : perm) permuted.push_back(sc.coeffs[i]);
  GpFitConfig fit;
  fit.starts = 2;
  const auto a = smooth_coefficients(x, sc.coeffs, fit);
  const auto b = smooth_coefficients(x.select_rows(perm), permuted, fit);
  const Matrix g = hull_grid(5);
  const auto pa = predict_coefficients(a, g), pb = predict_coefficients(b, g);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < g.rows(); ++i)
      CHECK(pa.beta[k].mean[i] == doctest::Approx(pb.beta[k].mean[i]).epsilon(1e-5));
}

TEST_CASE("seasonal_predict formulas") {
  const auto cf = constant_field(100.0, 20.0, 0.0);
  const Matrix one{{35.0, -90.0}};
  const auto p = seasonal_predict(cf, one, 91);
  CHECK(p.mean[0] == doctest::Approx(100.0 + 20.0 * std::sin(2.0 * std::numbers::pi * 91.0 / 365.0)).epsilon(1e-14));
  CHECK(p.variance[0] == 0.0);

  std::mt19937_64 rng(37);
  SeasonalTruth t;
  t.beta = [](SourceId, double lat, double lon) { return std::array<double, 3>{100.0 + lat, lon / 10.0, 5.0}; };
  t.noise_sd = 20.0;
  const auto ds = seasonal_dataset(rng, 40, 365, t);
  SeasonalConfig cfg;
  cfg.fit.starts = 2;
  auto fitted = fit_coeff_field(ds, SourceId::Field, cfg);
  const Matrix g = hull_grid(4);
  const auto cp = predict_coefficients(fitted, g);
  const auto at0 = seasonal_predict(fitted, g, fitted.day_origin);
  for (std::size_t i = 0; i < g.rows(); ++i)
    CHECK(at0.variance[i] == doctest::Approx(cp.beta[0].variance[i] + cp.beta[2].variance[i]).epsilon(1e-12));

  std::vector<double> avg(g.rows(), 0.0);
  for (int d = 0; d < 365; ++d) {
    const auto p1 = seasonal_predict(fitted, g, d);
    const auto p2 = seasonal_predict(fitted, g, d + 365);
    const auto pn = seasonal_predict(fitted, g, d, true);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      avg[i] += p1.mean[i] / 365.0;
      CHECK(p1.variance[i] >= 0.0);
      CHECK(p2.variance[i] == doctest::Approx(p1.variance[i]).epsilon(1e-12));
      CHECK(pn.variance[i] == doctest::Approx(p1.variance[i] + fitted.resid_var).epsilon(1e-14));
    }
  }
  for (std::size_t i = 0; i < g.rows(); ++i)
    CHECK(std::abs(avg[i] - cp.beta[0].mean[i]) <= 1e-6 * std::abs(cp.beta[0].mean[i]));
}

TEST_CASE("variance propagation matches Monte Carlo") {
  std::mt19937_64 rng(38);
  SeasonalTruth t;
  t.beta = [](SourceId, double lat, double lon) { return std::array<double, 3>{100.0 + lat, lon / 10.0, 5.0}; };
  t.noise_sd = 30.0;
  const auto ds = seasonal_dataset(rng, 30, 200, t);
  SeasonalConfig cfg;
  cfg.fit.starts = 2;
  const auto cf = fit_coeff_field(ds, SourceId::Field, cfg);
  const Matrix g{{36.0, -93.0}};
  const auto cp = predict_coefficients(cf, g);
  for (int day : {13, 77, 200}) {
    const auto p = seasonal_predict(cf, g, day);
    const auto h = harmonics(day, cf.day_origin);
    std::normal_distribution<double> z(0.0, 1.0);
    double s = 0.0, ss = 0.0;
    const int n = 100000;
    for (int r = 0; r < n; ++r) {
      const double v = cp.beta[0].mean[0] + std::sqrt(cp.beta[0].variance[0]) * z(rng) +
                       (cp.beta[1].mean[0] + std::sqrt(cp.beta[1].variance[0]) * z(rng)) * h.s +
                       (cp.beta[2].mean[0] + std::sqrt(cp.beta[2].variance[0]) * z(rng)) * h.c;
      s += v;
      ss += v * v;
    }
    const double mc = (ss - s * s / n) / (n - 1);
    CHECK(std::abs(mc / p.variance[0] - 1.0) < 0.02);
  }
}

TEST_CASE("intercept-only model equals the aggregate GP") {
  std::mt19937_64 rng(39);
  SeasonalTruth t;
  t.beta = [](SourceId, double lat, double lon) {
    return std::array<double, 3>{200.0 + 3.0 * lat + std::sin(lon), 50.0, -20.0};
  };
  t.noise_sd = 25.0;
  const auto ds = seasonal_dataset(rng, 40, 365, t);
  SeasonalConfig cfg;
  cfg.ols.harmonics = false;
  cfg.fit.seed = 5;
  cfg.fit.starts = 3;
  const auto cf = fit_coeff_field(ds, SourceId::Field, cfg);

  const auto agg = aggregate_time(ds, SourceId::Field);
  Matrix x(agg.means.size(), 2);
  std::vector<double> y;
  for (std::size_t i = 0; i < agg.means.size(); ++i) {
    x(i, 0) = ds.sites()[agg.means[i].site].lat;
    x(i, 1) = ds.sites()[agg.means[i].site].lon;
    y.push_back(agg.means[i].mean);
  }
  const auto gp = fit_gp(x, y, cfg.fit);
  const Matrix g = hull_grid(8);
  const auto a = gp.predict(g);
  for (int day : {0, 100, 250}) {
    const auto s = seasonal_predict(cf, g, day);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      CHECK(std::abs(s.mean[i] - a.mean[i]) <= 1e-8 * std::abs(a.mean[i]));
      CHECK(std::abs(s.variance[i] - a.variance[i]) <= 1e-8 * a.variance[i] + 1e-12);
    }
  }
}

TEST_CASE("space-time bias correction") {
  std::mt19937_64 rng(40);
  SeasonalTruth t;
  t.beta = [](SourceId src, double lat, double lon) {
    std::array<double, 3> b{300.0 + 2.0 * lat, 80.0 + lon / 5.0, -100.0};
    if (src == SourceId::Field) b[2] += 30.0;
    return b;
  };
  t.noise_sd = 20.0;
  t.missing = 0.05;
  const auto ds = seasonal_dataset(rng, 80, 365, t);
  SeasonalConfig cfg;
  cfg.fit.starts = 2;
  const auto bm = seasonal_bias_pipeline(ds, ds, SourceId::SimA, cfg);
  const auto cp = predict_coefficients(bm.discrepancy, hull_grid(8));
  for (double m : cp.beta[2].mean) CHECK(m == doctest::Approx(30.0).epsilon(0.1));
  for (double m : cp.beta[0].mean) CHECK(std::abs(m) < 5.0);

  const auto held = seasonal_dataset(rng, 20, 365, t);
  const Matrix hx = site_locations(held);
  double se_raw = 0.0, se_cor = 0.0;
  for (int d = 0; d < 365; d += 7) {
    const auto raw = seasonal_predict(*bm.surrogate, hx, d);
    const auto cor = bm.predict(hx, d);
    for (std::size_t s = 0; s < held.size(); ++s) {
      const auto y = held.value(s, d, SourceId::Field);
      if (!y) continue;
      se_raw += std::pow(*y - raw.mean[s], 2);
      se_cor += std::pow(*y - cor.mean[s], 2);
    }
  }
  CHECK(se_cor < se_raw);

  std::vector<std::optional<double>> sim;
  for (std::size_t s = 0; s < held.size(); ++s) sim.push_back(held.value(s, 30, SourceId::SimA));
  const auto with_sim = bm.predict(hx, 30, sim);
  const auto with_sur = bm.predict(hx, 30);
  for (std::size_t s = 0; s < held.size(); ++s)
    if (sim[s]) CHECK(with_sim.variance[s] < with_sur.variance[s]);
}

TEST_CASE("identical simulator gives a null discrepancy") {
  std::mt19937_64 rng(41);
  SeasonalTruth t;
  t.beta = [](SourceId, double lat, double) { return std::array<double, 3>{300.0 + lat, 50.0, -80.0}; };
  t.noise_sd = 15.0;
  auto ds = seasonal_dataset(rng, 50, 365, t);
  Dataset::Table obs = ds.observations();
  for (auto& [key, v] : obs)
    if (key.source == SourceId::SimA) v = ds.value(key.site, key.day, SourceId::Field);
  const Dataset same(ds.sites(), obs);
  SeasonalConfig cfg;
  cfg.fit.starts = 2;
  const auto bm = seasonal_bias_pipeline(same, same, SourceId::SimA, cfg);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto p = bm.discrepancy.beta[k].predict(hull_grid(8), true);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p.mean[i]) <= 2.0 * std::sqrt(p.variance[i]) + 1e-9);
  }
}

TEST_CASE("autoregressive regression") {
  const std::array<double, 6> beta{50.0, 12.0, -7.0, 0.4, 0.3, 0.2};
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(100.0, 600.0);
  std::vector<DayValue> field, a, b;
  double prev = 300.0;
  field.push_back({0, prev});
  for (int d = 0; d < 120; ++d) {
    a.push_back({d, u(rng)});
    b.push_back({d, u(rng)});
  }
  for (int d = 1; d < 120; ++d) {
    const auto h = harmonics(d);
    prev = beta[0] + beta[1] * h.s + beta[2] * h.c + beta[3] * prev + beta[4] * a[d].value + beta[5] * b[d].value;
    field.push_back({d, prev});
  }
  const auto fit = fit_ar_seasonal(field, a, b);
  CHECK(fit.n_rows == 119);
  for (std::size_t k = 0; k < 6; ++k) CHECK(fit.coeffs.beta[k] == doctest::Approx(beta[k]).epsilon(1e-6));
  CHECK(fit.coeffs.sigma2 < 1e-12);
  CHECK(fit.fitted.size() == 119);
  CHECK(fit.fitted.front().day == 1);
}

TEST_CASE("autoregressive regression without simulators") {
  std::mt19937_64 rng(43);
  const auto field = harmonic_series(0, 558, 400.0, 60.0, -90.0, 40.0, &rng);
  std::vector<DayValue> zero;
  for (int d = 0; d <= 558; ++d) zero.push_back({d, 0.0});
  const auto fit = fit_ar_seasonal(field, zero, zero);
  Eigen::MatrixXd x(558, 4);
  Eigen::VectorXd y(558);
  for (int i = 1; i <= 558; ++i) {
    const double w = 2.0 * std::numbers::pi * i / 365.0;
    x.row(i - 1) << 1.0, std::sin(w), std::cos(w), field[i - 1].value;
    y(i - 1) = field[i].value;
  }
  const Eigen::VectorXd b = (x.transpose() * x).inverse() * (x.transpose() * y);
  for (int k = 0; k < 4; ++k) CHECK(fit.coeffs.beta[k] == doctest::Approx(b(k)).epsilon(1e-8));
  CHECK(fit.coeffs.beta[4] == 0.0);
  CHECK(fit.coeffs.beta[5] == 0.0);
  CHECK(fit.coeffs.sigma2 == doctest::Approx((y - x * b).squaredNorm() / 554.0).epsilon(1e-8));
}

TEST_CASE("autoregressive regression uses only complete consecutive rows") {
  std::mt19937_64 rng(44);
  auto field = harmonic_series(0, 558, 400.0, 60.0, -90.0, 40.0, &rng);
  auto a = harmonic_series(0, 558, 380.0, 50.0, -80.0, 30.0, &rng);
  auto b = harmonic_series(0, 558, 390.0, 55.0, -85.0, 30.0, &rng);
  // seventeen missing field days: an isolated gap, a run, and scattered days
  const std::vector<int> gone{10, 50, 51, 52, 53, 54, 120, 200, 201, 300, 301, 302, 400, 401, 450, 500, 557};
  std::vector<DayValue> f;
  for (const auto& dv : field)
    if (!std::binary_search(gone.begin(), gone.end(), dv.day)) f.push_back(dv);
  REQUIRE(f.size() == 542);
  std::size_t expect = 0;
  for (int d = 1; d <= 558; ++d)
    expect += !std::binary_search(gone.begin(), gone.end(), d) && !std::binary_search(gone.begin(), gone.end(), d - 1);
  const auto fit = fit_ar_seasonal(f, a, b);
  CHECK(fit.n_rows == expect);
  CHECK(fit.fitted.size() == expect);
  for (const auto& dv : fit.fitted) {
    CHECK_FALSE(std::binary_search(gone.begin(), gone.end(), dv.day));
    CHECK_FALSE(std::binary_search(gone.begin(), gone.end(), dv.day - 1));
  }
  CHECK_THROWS_AS(fit_ar_seasonal(std::span(f).first(15), a, b), InsufficientDataError);
}

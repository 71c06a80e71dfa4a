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
#include <random>

#include "doctest.h"
#include "solgp/calibrate.hpp"
#include "solgp/error.hpp"
#include "test_support.hpp"

using namespace solgp;
using solgp::testing::correlation;
using solgp::testing::random_inputs;

namespace {

Prediction pred(std::vector<double> m, std::vector<double> v) { return Prediction{std::move(m), std::move(v)}; }

double sim_fn(double lat, double lon) { return 300.0 + 40.0 * std::sin(lat / 4.0) + 25.0 * std::cos(lon / 6.0); }

struct Synthetic {
  Matrix x;
  std::vector<double> sim, field, bias;
};

// Sites over a (lat, lon) box with a smooth simulator and a planted bias.
template <class Bias>
Synthetic synthetic(std::mt19937_64& rng, std::size_t n, Bias bias, double noise_sd) {
  Synthetic s;
  s.x = random_inputs(rng, n, 2);
  std::normal_distribution<double> z(0, noise_sd);
  for (std::size_t i = 0; i < n; ++i) {
    s.x(i, 0) = 30.0 + 15.0 * s.x(i, 0);
    s.x(i, 1) = -100.0 + 15.0 * s.x(i, 1);
    const double lat = s.x(i, 0), lon = s.x(i, 1);
    s.sim.push_back(sim_fn(lat, lon));
    s.bias.push_back(bias(lat, lon));
    s.field.push_back(s.sim.back() + s.bias.back() + z(rng));
  }
  return s;
}

Matrix grid_in_hull(std::size_t k) {
  Matrix g(k * k, 2);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      g(i * k + j, 0) = 32.0 + 11.0 * static_cast<double>(i) / static_cast<double>(k - 1);
      g(i * k + j, 1) = -98.0 + 11.0 * static_cast<double>(j) / static_cast<double>(k - 1);
    }
  return g;
}

BiasModel train(const Synthetic& s, std::uint64_t seed = 0) {
  GpFitConfig fit;
  fit.seed = seed;
  fit.starts = 3;
  auto sur = std::make_shared<const Emulator>(Emulator::train(s.x, s.sim, fit));
  const auto at_field = sur->predict(s.x);
  return fit_bias(s.x, s.field, sur, at_field, fit);
}

}  // namespace

TEST_CASE("ivw examples") {
  const std::vector<Prediction> two{pred({10.0}, {2.0}), pred({20.0}, {2.0})};
  auto f = ivw_fuse(two);
  CHECK(f.mean[0] == doctest::Approx(15.0).epsilon(1e-15));
  CHECK(f.variance[0] == doctest::Approx(1.0).epsilon(1e-15));

  const std::vector<Prediction> one{pred({3.25, -1.0}, {0.7, 1e-14})};
  f = ivw_fuse(one);
  CHECK(f.mean == one[0].mean);
  CHECK(f.variance == one[0].variance);

  const std::vector<Prediction> three{pred({1.0}, {1.0}), pred({2.0}, {4.0}), pred({3.0}, {0.25})};
  f = ivw_fuse(three);
  CHECK(f.mean[0] == doctest::Approx(13.5 / 5.25).epsilon(1e-14));
  CHECK(f.mean[0] == doctest::Approx(2.571428571428).epsilon(1e-12));
  CHECK(f.variance[0] == doctest::Approx(1.0 / 5.25).epsilon(1e-14));

  CHECK_THROWS_AS(ivw_fuse(std::vector<Prediction>{}), EmptyInputError);
  CHECK_THROWS_AS(ivw_fuse(std::vector<Prediction>{pred({1.0}, {1.0}), pred({1.0, 2.0}, {1.0, 1.0})}),
                  ShapeError);
}

TEST_CASE("ivw floors zero variances") {
  const std::vector<Prediction> s{pred({1.0}, {0.0}), pred({5.0}, {1.0})};
  const auto f = ivw_fuse(s);
  CHECK(std::isfinite(f.mean[0]));
  CHECK(f.mean[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(f.variance[0] <= kVarianceFloor);
}

TEST_CASE("ivw properties") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-100, 100), lv(-8, 4), sc(-5, 5);
  std::uniform_int_distribution<int> k(2, 6);
  for (int t = 0; t < 2000; ++t) {
    std::vector<Prediction> s(static_cast<std::size_t>(k(rng)));
    for (auto& p : s) p = pred({u(rng)}, {std::exp(lv(rng))});
    const auto f = ivw_fuse(s);
    double vmin = INFINITY, mlo = INFINITY, mhi = -INFINITY;
    for (const auto& p : s) {
      vmin = std::min(vmin, p.variance[0]);
      mlo = std::min(mlo, p.mean[0]);
      mhi = std::max(mhi, p.mean[0]);
    }
    CHECK(f.variance[0] < vmin);
    CHECK(f.mean[0] >= mlo - 1e-9 * std::abs(mlo));
    CHECK(f.mean[0] <= mhi + 1e-9 * std::abs(mhi));
    const double c = std::exp(sc(rng));
    auto scaled = s;
    for (auto& p : scaled) p.variance[0] *= c;
    const auto g = ivw_fuse(scaled);
    CHECK(g.mean[0] == doctest::Approx(f.mean[0]).epsilon(1e-12).scale(1.0));
    CHECK(g.variance[0] == doctest::Approx(c * f.variance[0]).epsilon(1e-12));
  }
}

TEST_CASE("fit_bias input checks") {
  std::mt19937_64 rng(1);
  const auto s = synthetic(rng, 4, [](double, double) { return 0.0; }, 1.0);
  auto sur = std::make_shared<const Emulator>(Emulator(Emulator::Constant{300.0}));
  CHECK_THROWS_AS(fit_bias(s.x, s.field, sur, sur->predict(s.x), GpFitConfig{}), InsufficientDataError);
  const auto t = synthetic(rng, 8, [](double, double) { return 0.0; }, 1.0);
  CHECK_THROWS_AS(fit_bias(t.x, t.field, sur, sur->predict(s.x), GpFitConfig{}), ShapeError);
}

TEST_CASE("zero bias reverts to zero") {
  std::mt19937_64 rng(2);
  const auto s = synthetic(rng, 80, [](double, double) { return 0.0; }, 2.0);
  const auto bm = train(s);
  const auto b = bm.discrepancy.predict(grid_in_hull(12), true);
  // predictive sd of the field residual; the plug-in latent sd ignores
  // hyperparameter and mean uncertainty
  for (std::size_t i = 0; i < b.size(); ++i) CHECK(std::abs(b.mean[i]) <= 2.0 * std::sqrt(b.variance[i]));
  REQUIRE(bm.noise_var);
  CHECK(*bm.noise_var >= 0.0);
}

TEST_CASE("constant bias is recovered across the hull") {
  std::mt19937_64 rng(3);
  const auto s = synthetic(rng, 100, [](double, double) { return 7.0; }, 1.0);
  const auto b = train(s).discrepancy.predict(grid_in_hull(15));
  for (double m : b.mean) {
    CHECK(m >= 6.0);
    CHECK(m <= 8.0);
  }
}

TEST_CASE("planted sinusoidal bias is recovered") {
  std::mt19937_64 rng(4);
  auto bias = [](double, double lon) { return 10.0 * std::sin(lon); };
  const auto s = synthetic(rng, 200, bias, 1.0);
  const auto bm = train(s);
  const Matrix g = grid_in_hull(20);
  const auto b = bm.discrepancy.predict(g);
  std::vector<double> truth;
  for (std::size_t i = 0; i < g.rows(); ++i) truth.push_back(bias(g(i, 0), g(i, 1)));
  CHECK(correlation(b.mean, truth) >= 0.9);

  // corrected beats the raw surrogate on held-out sites
  const auto held = synthetic(rng, 100, bias, 1.0);
  const auto raw = bm.surrogate->predict(held.x);
  const auto cor = bias_corrected_predict(bm, held.x);
  double se_raw = 0, se_cor = 0;
  for (std::size_t i = 0; i < held.field.size(); ++i) {
    se_raw += std::pow(held.field[i] - raw.mean[i], 2);
    se_cor += std::pow(held.field[i] - cor.mean[i], 2);
  }
  CHECK(se_cor < se_raw);
}

TEST_CASE("zero discrepancy reduces to the surrogate") {
  std::mt19937_64 rng(5);
  const auto s = synthetic(rng, 30, [](double, double) { return 0.0; }, 1.0);
  auto sur = std::make_shared<const Emulator>(Emulator::train(s.x, s.sim, GpFitConfig{}));
  const BiasModel bm{sur, Emulator(Emulator::Constant{0.0}), 0.0};
  const Matrix g = grid_in_hull(5);
  const auto a = bias_corrected_predict(bm, g);
  const auto b = sur->predict(g);
  CHECK(a.mean == b.mean);
  CHECK(a.variance == b.variance);
}

TEST_CASE("true simulator values remove the surrogate variance") {
  std::mt19937_64 rng(6);
  const auto s = synthetic(rng, 60, [](double lat, double) { return lat - 37.0; }, 1.0);
  const auto bm = train(s);
  const Matrix g = grid_in_hull(6);
  std::vector<std::optional<double>> truth;
  for (std::size_t i = 0; i < g.rows(); ++i) truth.emplace_back(sim_fn(g(i, 0), g(i, 1)));
  const auto with_sur = bias_corrected_predict(bm, g);
  const auto with_sim = bias_corrected_predict(bm, g, truth);
  const auto sur = bm.surrogate->predict(g);
  const auto disc = bm.discrepancy.predict(g, true);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    CHECK(with_sim.variance[i] < with_sur.variance[i]);
    CHECK(with_sim.variance[i] == disc.variance[i]);
    CHECK(with_sim.mean[i] == *truth[i] + disc.mean[i]);
    CHECK(with_sur.mean[i] == sur.mean[i] + disc.mean[i]);
  }
  truth[3].reset();
  CHECK_THROWS_AS(bias_corrected_predict(bm, g, truth), CoverageError);
  truth.pop_back();
  CHECK_THROWS_AS(bias_corrected_predict(bm, g, truth), CoverageError);
}

TEST_CASE("refitting the discrepancy leaves the surrogate untouched") {
  std::mt19937_64 rng(7);
  const auto s = synthetic(rng, 40, [](double lat, double) { return 0.5 * lat; }, 1.0);
  GpFitConfig fit;
  auto sur = std::make_shared<const Emulator>(Emulator::train(s.x, s.sim, fit));
  const auto before = sur->global_model()->params();
  const auto at_field = sur->predict(s.x);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    fit.seed = seed;
    const auto bm = fit_bias(s.x, s.field, sur, at_field, fit);
    CHECK(bm.surrogate.get() == sur.get());
  }
  const auto after = sur->global_model()->params();
  CHECK(after.lengthscales == before.lengthscales);
  CHECK(after.signal_variance == before.signal_variance);
  CHECK(after.nugget == before.nugget);
}

TEST_CASE("local discrepancy") {
  std::mt19937_64 rng(8);
  const auto s = synthetic(rng, 80, [](double, double) { return 5.0; }, 1.0);
  GpFitConfig fit;
  fit.starts = 2;
  LocalConfig local;
  local.n = 30;
  auto sur = std::make_shared<const Emulator>(Emulator::train(s.x, s.sim, fit, local));
  CHECK(sur->is_local());
  const auto bm = fit_bias(s.x, s.field, sur, sur->predict(s.x), fit, local);
  CHECK_FALSE(bm.noise_var.has_value());
  const auto p = bias_corrected_predict(bm, grid_in_hull(4));
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(std::isfinite(p.mean[i]));
    CHECK(p.variance[i] > 0.0);
  }
}

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

#include "solgp/localgp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "solgp/error.hpp"
#include "solgp/parallel.hpp"
#include "solgp/simd/kernels.hpp"

namespace solgp {

std::string_view to_string(LocalMethod m) {
  return m == LocalMethod::NearestNeighbor ? "nn" : "alc";
}

namespace {

void validate(const Matrix& x, const LocalConfig& cfg) {
  if (cfg.n < 3) throw Error("local config: sub-design size must be at least 3");
  if (cfg.n_start > cfg.n) throw Error("local config: n_start exceeds n");
  if (cfg.method == LocalMethod::GreedyVariance && cfg.n_start < 1)
    throw Error("local config: greedy search needs n_start >= 1");
  if (x.rows() < cfg.n)
    throw InsufficientDataError("local design of size " + std::to_string(cfg.n) + " needs at least " +
                                std::to_string(cfg.n) + " points, have " +
                                std::to_string(x.rows()));
}

std::vector<double> sq_distances(const Matrix& x, std::span<const double> q) {
  if (q.size() != x.cols()) throw ShapeError("local query dimension differs from inputs");
  std::vector<double> d(x.rows(), 0.0);
  for (std::size_t k = 0; k < x.cols(); ++k) {
    const auto col = x.column(k);
    simd::sqdist_accumulate(col, q[k], 1.0, d);
  }
  return d;
}

// The m nearest indices, ordered by (distance, index).
std::vector<std::size_t> nearest(const std::vector<double>& d, std::size_t m) {
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto by_dist = [&](std::size_t a, std::size_t b) { return d[a] < d[b] || (d[a] == d[b] && a < b); };
  m = std::min(m, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end(), by_dist);
  idx.resize(m);
  return idx;
}

double search_lengthscale(const std::vector<double>& d, const LocalConfig& cfg) {
  if (cfg.search_lengthscale) return *cfg.search_lengthscale;
  const auto nn = nearest(d, cfg.n);
  const double r2 = d[nn.back()];
  return r2 > 0.0 ? r2 : 1.0;
}

double corr(const Matrix& x, std::size_t i, std::span<const double> q, double theta) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.cols(); ++k) {
    const double t = x(i, k) - q[k];
    s += t * t;
  }
  return std::exp(-s / theta);
}

double corr(const Matrix& x, std::size_t i, std::size_t j, double theta) {
  return corr(x, i, x.row(j), theta);
}

// Greedy reduction-in-variance search: seed with the n_start nearest,
// then repeatedly add the pool candidate that most reduces the predictive
// variance at the query under the fixed search kernel.
std::vector<std::size_t> greedy_variance(const Matrix& x, std::span<const double> q,
                                         const std::vector<double>& d, const LocalConfig& cfg) {
  const double theta = search_lengthscale(d, cfg);
  const double g = cfg.search_nugget;
  const auto pool = nearest(d, cfg.pool_factor * cfg.n);
  std::vector<std::size_t> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(cfg.n_start));
  std::vector<bool> used(pool.size(), false);
  for (std::size_t i = 0; i < cfg.n_start; ++i) used[i] = true;

  // Kinv of the correlation (plus nugget) among chosen points.
  std::size_t m = chosen.size();
  Matrix kmat(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      kmat(i, j) = corr(x, chosen[i], chosen[j], theta) + (i == j ? g : 0.0);
  Matrix chol = kmat;
  if (!cholesky_in_place(chol)) throw ConditioningError("greedy local search: seed design is singular");
  Matrix kinv = cholesky_inverse(chol);
  std::vector<double> kx(m);
  for (std::size_t i = 0; i < m; ++i) kx[i] = corr(x, chosen[i], q, theta);

  std::vector<double> kc(cfg.n), u(cfg.n);
  while (chosen.size() < cfg.n) {
    double best_gain = -1.0;
    std::size_t best = pool.size();
    std::vector<double> best_u;
    double best_s = 0.0;
    for (std::size_t c = 0; c < pool.size(); ++c) {
      if (used[c]) continue;
      for (std::size_t i = 0; i < m; ++i) kc[i] = corr(x, chosen[i], pool[c], theta);
      const auto kcs = std::span<const double>(kc).first(m);
      for (std::size_t i = 0; i < m; ++i) u[i] = simd::dot(kinv.row(i), kcs);
      const auto us = std::span<const double>(u).first(m);
      const double s = 1.0 + g - simd::dot(kcs, us);
      if (!(s > 0.0)) continue;
      const double r = corr(x, pool[c], q, theta) - simd::dot(us, std::span<const double>(kx));
      const double gain = r * r / s;
      if (gain > best_gain) {
        best_gain = gain;
        best = c;
        best_u.assign(us.begin(), us.end());
        best_s = s;
      }
    }
    if (best == pool.size()) throw ConditioningError("greedy local search: no admissible candidate");

    // block-inverse update with the new point appended
    Matrix next(m + 1, m + 1);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) next(i, j) = kinv(i, j) + best_u[i] * best_u[j] / best_s;
      next(i, m) = -best_u[i] / best_s;
      next(m, i) = -best_u[i] / best_s;
    }
    next(m, m) = 1.0 / best_s;
    kinv = std::move(next);
    used[best] = true;
    chosen.push_back(pool[best]);
    kx.push_back(corr(x, pool[best], q, theta));
    ++m;
  }
  return chosen;
}

}  // namespace

KernelParams local_search_params(const Matrix& x, std::span<const double> query,
                                 const LocalConfig& cfg) {
  validate(x, cfg);
  const auto d = sq_distances(x, query);
  const double theta = search_lengthscale(d, cfg);
  return KernelParams{std::vector<double>(x.cols(), theta), 1.0, cfg.search_nugget};
}

std::vector<std::size_t> select_subdesign(const Matrix& x, std::span<const double> query,
                                          const LocalConfig& cfg) {
  validate(x, cfg);
  const auto d = sq_distances(x, query);
  std::vector<std::size_t> idx;
  if (cfg.n == x.rows()) {
    idx.resize(x.rows());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }
  idx = cfg.method == LocalMethod::NearestNeighbor ? nearest(d, cfg.n) : greedy_variance(x, query, d, cfg);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Prediction local_predict(const Matrix& x, std::span<const double> y, const Matrix& xnew,
                         const LocalConfig& cfg, bool include_noise, LocalStats* stats) {
  if (y.size() != x.rows()) throw ShapeError("local_predict: y length differs from X rows");
  if (xnew.cols() != x.cols()) throw ShapeError("local_predict: query dimension differs from inputs");
  validate(x, cfg);
  Prediction out;
  out.mean.resize(xnew.rows());
  out.variance.resize(xnew.rows());
  parallel_for(xnew.rows(), cfg.jobs, [&](std::size_t q) {
    const auto idx = select_subdesign(x, xnew.row(q), cfg);
    std::vector<double> ys(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) ys[i] = y[idx[i]];
    try {
      const GPModel m = fit_gp(x.select_rows(idx), ys, cfg.fit);
      Matrix one(1, x.cols());
      std::copy(xnew.row(q).begin(), xnew.row(q).end(), one.row(0).begin());
      const auto p = m.predict(one, include_noise);
      out.mean[q] = p.mean[0];
      out.variance[q] = p.variance[0];
    } catch (const FitError& e) {
      throw FitError("local query " + std::to_string(q) + ": " + e.what(), e.diagnostics());
    } catch (const Error& e) {
      throw FitError("local query " + std::to_string(q) + ": " + e.what(), {});
    }
  });
  if (stats) {
    stats->queries = xnew.rows();
    stats->max_factorized_dim = xnew.rows() ? cfg.n : 0;
  }
  return out;
}

}  // namespace solgp

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

#include "solgp/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "solgp/error.hpp"
#include "solgp/linalg.hpp"

namespace solgp {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

BfgsResult minimize_box_bfgs(const Objective& f, std::vector<double> x0,
                             std::span<const double> lower, std::span<const double> upper,
                             const BfgsOptions& opts) {
  const std::size_t n = x0.size();
  if (lower.size() != n || upper.size() != n) throw ShapeError("bfgs: bound sizes differ from x0");
  auto clamp = [&](std::vector<double>& x) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
  };

  BfgsResult r;
  r.x = std::move(x0);
  clamp(r.x);
  std::vector<double> g(n), gn(n), xn(n), d(n), s(n), yv(n);
  r.f = f(r.x, g);
  r.evaluations = 1;

  auto try_eval = [&](const std::vector<double>& x, std::vector<double>& grad) {
    ++r.evaluations;
    try {
      const double v = f(x, grad);
      return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  Matrix h = Matrix::identity(n);
  bool h_is_identity = true;
  std::vector<bool> free_var(n);

  for (r.iterations = 0; r.iterations < opts.max_iter; ++r.iterations) {
    double pg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double stepped = std::clamp(r.x[i] - g[i], lower[i], upper[i]);
      pg = std::max(pg, std::abs(stepped - r.x[i]));
      free_var[i] = !((r.x[i] <= lower[i] && g[i] > 0) || (r.x[i] >= upper[i] && g[i] < 0));
    }
    if (pg < opts.grad_tol) {
      r.converged = true;
      r.status = "projected gradient below tolerance";
      return r;
    }

    auto build_direction = [&] {
      for (std::size_t i = 0; i < n; ++i) {
        d[i] = 0.0;
        if (!free_var[i]) continue;
        for (std::size_t j = 0; j < n; ++j)
          if (free_var[j]) d[i] -= h(i, j) * g[j];
      }
    };
    build_direction();
    if (!(dot(g, d) < 0.0)) {
      h = Matrix::identity(n);
      h_is_identity = true;
      build_direction();
    }
    double dmax = 0.0;
    for (double v : d) dmax = std::max(dmax, std::abs(v));
    double t = dmax > opts.max_step ? opts.max_step / dmax : 1.0;

    bool accepted = false;
    double fn = 0.0;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) xn[i] = r.x[i] + t * d[i];
      clamp(xn);
      double decrease = 0.0;
      for (std::size_t i = 0; i < n; ++i) decrease += g[i] * (xn[i] - r.x[i]);
      fn = try_eval(xn, gn);
      if (fn <= r.f + 1e-4 * decrease) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (h_is_identity) {
        r.status = "line search failed";
        r.converged = pg < 1e3 * opts.grad_tol;
        return r;
      }
      h = Matrix::identity(n);
      h_is_identity = true;
      continue;
    }

    for (std::size_t i = 0; i < n; ++i) {
      s[i] = xn[i] - r.x[i];
      yv[i] = gn[i] - g[i];
    }
    const double sy = dot(s, yv);
    const double ss = dot(s, s);
    const double yy = dot(yv, yv);
    if (sy > 1e-12 * std::sqrt(ss * yy)) {
      if (h_is_identity) {
        h = Matrix::identity(n);
        for (std::size_t i = 0; i < n; ++i) h(i, i) = sy / yy;
      }
      // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
      const double rho = 1.0 / sy;
      std::vector<double> hy(n, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) hy[i] += h(i, j) * yv[j];
      const double yhy = dot(yv, hy);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          h(i, j) += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
      h_is_identity = false;
    }

    const double fprev = r.f;
    r.x = xn;
    r.f = fn;
    g = gn;
    if (std::abs(fprev - fn) <= opts.f_rel_tol * (std::abs(fprev) + 1e-10) ||
        std::sqrt(ss) < 1e-12) {
      r.converged = true;
      r.status = "objective change below tolerance";
      ++r.iterations;
      return r;
    }
  }
  r.status = "iteration limit";
  return r;
}

}  // namespace solgp

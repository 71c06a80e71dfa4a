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

#include "solgp/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

#include "solgp/error.hpp"
#include "solgp/optimize.hpp"
#include "solgp/simd/kernels.hpp"

namespace solgp {

std::vector<double> KernelParams::to_log() const {
  std::vector<double> v;
  v.reserve(lengthscales.size() + 2);
  for (double l : lengthscales) v.push_back(std::log(l));
  v.push_back(std::log(signal_variance));
  v.push_back(std::log(nugget));
  return v;
}

KernelParams KernelParams::from_log(std::span<const double> v) {
  if (v.size() < 3) throw ShapeError("KernelParams::from_log: need at least 3 entries");
  KernelParams p;
  for (std::size_t k = 0; k + 2 < v.size(); ++k) p.lengthscales.push_back(std::exp(v[k]));
  p.signal_variance = std::exp(v[v.size() - 2]);
  p.nugget = std::exp(v[v.size() - 1]);
  return p;
}

double kernel(std::span<const double> x, std::span<const double> x2, const KernelParams& params) {
  if (x.size() != x2.size() || x.size() != params.lengthscales.size())
    throw ShapeError("kernel: input dimension " + std::to_string(x.size()) + "/" +
                     std::to_string(x2.size()) + " does not match " +
                     std::to_string(params.lengthscales.size()) + " lengthscales");
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - x2[k];
    s += (d * d) / params.lengthscales[k];
  }
  return params.signal_variance * std::exp(-s);
}

namespace {

std::vector<std::vector<double>> columns_of(const Matrix& x) {
  std::vector<std::vector<double>> cols(x.cols());
  for (std::size_t k = 0; k < x.cols(); ++k) cols[k] = x.column(k);
  return cols;
}

// Correlation matrix R (full, symmetric) with unit diagonal.
Matrix correlation(const Matrix& x, const std::vector<std::vector<double>>& cols,
                   const KernelParams& p) {
  const std::size_t n = x.rows();
  Matrix r(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = r.row(i).first(i + 1);
    for (std::size_t k = 0; k < x.cols(); ++k)
      simd::sqdist_accumulate(std::span<const double>(cols[k]).first(i + 1), x(i, k),
                              1.0 / p.lengthscales[k], row);
    for (auto& v : row) v = std::exp(-v);
    for (std::size_t j = 0; j < i; ++j) r(j, i) = r(i, j);
  }
  return r;
}

bool has_duplicate_rows(const Matrix& x) {
  std::vector<std::size_t> idx(x.rows());
  std::iota(idx.begin(), idx.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    const auto ra = x.row(a), rb = x.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  };
  std::sort(idx.begin(), idx.end(), less);
  for (std::size_t i = 1; i < idx.size(); ++i) {
    const auto a = x.row(idx[i - 1]), b = x.row(idx[i]);
    if (std::equal(a.begin(), a.end(), b.begin())) return true;
  }
  return false;
}

struct Factorization {
  Matrix lower;
  double jitter = 0.0;
};

// sv * (R + (nugget + jitter) I), escalating jitter until Cholesky succeeds.
Factorization factorize(const Matrix& x, const Matrix& corr, const KernelParams& p) {
  if (p.nugget < kJitterFloor && has_duplicate_rows(x))
    throw ConditioningError("covariance is singular: repeated input with nugget below the jitter floor");
  const std::size_t n = corr.rows();
  double jitter = 0.0;
  while (true) {
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j <= i; ++j) a(i, j) = p.signal_variance * corr(i, j);
      a(i, i) = p.signal_variance * (corr(i, i) + p.nugget + jitter);
    }
    if (cholesky_in_place(a)) return {std::move(a), jitter};
    if (jitter >= kJitterMax * (1 - 1e-12)) break;
    jitter = jitter == 0.0 ? kJitterFloor : jitter * 10.0;
  }
  std::ostringstream msg;
  msg << "Cholesky failed after jitter escalation to " << kJitterMax
      << " (lengthscale[0]=" << p.lengthscales.front() << ", signal_variance=" << p.signal_variance
      << ", nugget=" << p.nugget << ")";
  throw ConditioningError(msg.str());
}

double mean_of(std::span<const double> y) {
  double s = 0.0;
  for (double v : y) s += v;
  return y.empty() ? 0.0 : s / static_cast<double>(y.size());
}

void check_params(const KernelParams& p, std::size_t dim) {
  if (p.lengthscales.size() != dim)
    throw ShapeError("kernel has " + std::to_string(p.lengthscales.size()) +
                     " lengthscales for inputs of dimension " + std::to_string(dim));
  for (double l : p.lengthscales)
    if (!(l > 0.0)) throw Error("lengthscales must be positive");
  if (!(p.signal_variance > 0.0)) throw Error("signal variance must be positive");
  if (!(p.nugget >= 0.0)) throw Error("nugget must be nonnegative");
}

}  // namespace

NllResult neg_log_likelihood(const Matrix& x, std::span<const double> y,
                             const KernelParams& params, bool with_gradient) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  if (y.size() != n) throw ShapeError("neg_log_likelihood: y length differs from X rows");
  if (n < 2) throw InsufficientDataError("neg_log_likelihood: need at least 2 points");
  check_params(params, p);

  const auto cols = columns_of(x);
  const Matrix corr = correlation(x, cols, params);
  const Factorization f = factorize(x, corr, params);

  const double offset = mean_of(y);
  std::vector<double> yc(y.begin(), y.end());
  for (auto& v : yc) v -= offset;
  const std::vector<double> alpha = cholesky_solve(f.lower, yc);

  NllResult out;
  out.jitter = f.jitter;
  const double quad = simd::dot(yc, alpha);
  out.value = 0.5 * quad + 0.5 * cholesky_log_det(f.lower) +
              0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  if (!with_gradient) return out;

  // dNLL/dphi = 1/2 tr((Sigma^{-1} - alpha alpha^T) dSigma/dphi)
  Matrix w = cholesky_inverse(f.lower);
  for (std::size_t i = 0; i < n; ++i) simd::axpy(-alpha[i], alpha, w.row(i));

  out.gradient.assign(p + 2, 0.0);
  std::vector<double> d2(n);
  for (std::size_t k = 0; k < p; ++k) {
    double acc = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      auto dk = std::span<double>(d2).first(i);
      std::fill(dk.begin(), dk.end(), 0.0);
      simd::sqdist_accumulate(std::span<const double>(cols[k]).first(i), x(i, k), 1.0, dk);
      const auto wi = w.row(i);
      const auto ri = corr.row(i);
      for (std::size_t j = 0; j < i; ++j) acc += wi[j] * ri[j] * dk[j];
    }
    // off-diagonal pairs counted once above; the 1/2 and the symmetric
    // double count cancel
    out.gradient[k] = acc * params.signal_variance / params.lengthscales[k];
  }
  out.gradient[p] = 0.5 * (static_cast<double>(n) - quad);
  double trace_w = 0.0;
  for (std::size_t i = 0; i < n; ++i) trace_w += w(i, i);
  out.gradient[p + 1] = 0.5 * params.signal_variance * params.nugget * trace_w;
  return out;
}

GPModel GPModel::build(Matrix x, std::vector<double> y, KernelParams params) {
  if (y.size() != x.rows()) throw ShapeError("GPModel::build: y length differs from X rows");
  if (y.empty()) throw InsufficientDataError("GPModel::build: no training data");
  check_params(params, x.cols());

  GPModel m;
  m.x_cols_ = columns_of(x);
  const Matrix corr = correlation(x, m.x_cols_, params);
  Factorization f = factorize(x, corr, params);
  m.mean_offset_ = mean_of(y);
  std::vector<double> yc(y);
  for (auto& v : yc) v -= m.mean_offset_;
  m.alpha_ = cholesky_solve(f.lower, yc);
  m.nll_ = 0.5 * simd::dot(yc, m.alpha_) + 0.5 * cholesky_log_det(f.lower) +
           0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
  m.chol_ = std::move(f.lower);
  m.jitter_ = f.jitter;
  m.x_ = std::move(x);
  m.y_ = std::move(y);
  m.params_ = std::move(params);
  return m;
}

Matrix GPModel::covariance() const {
  const Matrix corr = correlation(x_, x_cols_, params_);
  Matrix a(corr.rows(), corr.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      a(i, j) = params_.signal_variance *
                (corr(i, j) + (i == j ? params_.nugget + jitter_ : 0.0));
  return a;
}

void GPModel::cross_cov(std::span<const double> x, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < x_cols_.size(); ++k)
    simd::sqdist_accumulate(x_cols_[k], x[k], 1.0 / params_.lengthscales[k], out);
  for (auto& v : out) v = params_.signal_variance * std::exp(-v);
}

Prediction GPModel::predict(const Matrix& xnew, bool include_noise) const {
  if (xnew.cols() != dim())
    throw ShapeError("predict: query dimension " + std::to_string(xnew.cols()) +
                     " differs from model dimension " + std::to_string(dim()));
  Prediction out;
  out.mean.resize(xnew.rows());
  out.variance.resize(xnew.rows());
  std::vector<double> k(size());
  const double noise = include_noise ? params_.nugget * params_.signal_variance : 0.0;
  for (std::size_t i = 0; i < xnew.rows(); ++i) {
    cross_cov(xnew.row(i), k);
    out.mean[i] = mean_offset_ + simd::dot(k, alpha_);
    solve_lower_in_place(chol_, k);
    out.variance[i] = std::max(0.0, params_.signal_variance - simd::dot(k, k)) + noise;
  }
  return out;
}

PredictionWithCov GPModel::predict_cov(const Matrix& xnew, bool include_noise) const {
  if (xnew.cols() != dim()) throw ShapeError("predict_cov: query dimension differs from model");
  const std::size_t m = xnew.rows();
  PredictionWithCov out;
  out.mean.resize(m);
  Matrix v(m, size());
  for (std::size_t i = 0; i < m; ++i) {
    auto vi = v.row(i);
    cross_cov(xnew.row(i), vi);
    out.mean[i] = mean_offset_ + simd::dot(vi, alpha_);
    solve_lower_in_place(chol_, vi);
  }
  out.cov = Matrix(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double c = kernel(xnew.row(i), xnew.row(j), params_) - simd::dot(v.row(i), v.row(j));
      out.cov(i, j) = c;
      out.cov(j, i) = c;
    }
    if (include_noise) out.cov(i, i) += params_.nugget * params_.signal_variance;
  }
  return out;
}

ParamBounds param_bounds(const Matrix& x, std::span<const double> y) {
  ParamBounds b;
  for (std::size_t k = 0; k < x.cols(); ++k) {
    const auto col = x.column(k);
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    double r2 = (*hi - *lo) * (*hi - *lo);
    if (!(r2 > 0.0)) r2 = 1.0;
    b.lower.push_back(std::log(1e-4 * r2));
    b.upper.push_back(std::log(1e4 * r2));
  }
  const double m = mean_of(y);
  double s = 0.0;
  for (double v : y) s += (v - m) * (v - m);
  s /= static_cast<double>(std::max<std::size_t>(y.size(), 1));
  if (!(s > 0.0)) s = 1.0;
  b.lower.push_back(std::log(1e-6 * s));
  b.upper.push_back(std::log(1e4 * s));
  b.lower.push_back(std::log(kJitterFloor));
  b.upper.push_back(std::log(1e3));
  return b;
}

namespace {

// Latin-hypercube starts in log space: lengthscales over [1e-3, 10] x
// squared input range, signal variance over [1e-2, 1e2] x output
// variance, nugget over [1e-4, 1].
std::vector<std::vector<double>> start_points(const Matrix& x, std::span<const double> y,
                                              int starts, std::uint64_t seed) {
  const std::size_t p = x.cols();
  const ParamBounds b = param_bounds(x, y);
  std::vector<double> lo(p + 2), hi(p + 2);
  for (std::size_t k = 0; k < p; ++k) {
    const double log_r2 = 0.5 * (b.lower[k] + b.upper[k]);
    lo[k] = log_r2 + std::log(1e-3);
    hi[k] = log_r2 + std::log(10.0);
  }
  // signal variance center sits at log(s) rather than the box midpoint
  const double log_s = b.lower[p] - std::log(1e-6);
  lo[p] = log_s + std::log(1e-2);
  hi[p] = log_s + std::log(1e2);
  lo[p + 1] = std::log(1e-4);
  hi[p + 1] = 0.0;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto n = static_cast<std::size_t>(starts);
  std::vector<std::vector<double>> pts(n, std::vector<double>(p + 2));
  for (std::size_t k = 0; k < p + 2; ++k) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t s = 0; s < n; ++s) {
      const double u = (static_cast<double>(perm[s]) + unif(rng)) / static_cast<double>(n);
      pts[s][k] = lo[k] + u * (hi[k] - lo[k]);
    }
  }
  return pts;
}

}  // namespace

GPModel fit_gp(const Matrix& x, std::span<const double> y, const GpFitConfig& config) {
  if (y.size() != x.rows()) throw ShapeError("fit_gp: y length differs from X rows");
  if (x.rows() < 5)
    throw InsufficientDataError("fit_gp: need at least 5 points, got " + std::to_string(x.rows()));
  const std::vector<double> yv(y.begin(), y.end());
  if (config.fixed) return GPModel::build(x, yv, *config.fixed);
  if (config.starts < 1) throw Error("fit_gp: need at least one optimizer start");

  const ParamBounds bounds = param_bounds(x, y);
  std::vector<std::vector<double>> starts;
  if (config.warm_start) {
    if (config.warm_start->lengthscales.size() != x.cols())
      throw ShapeError("fit_gp: warm start dimension differs from inputs");
    auto v = config.warm_start->to_log();
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::clamp(v[k], bounds.lower[k], bounds.upper[k]);
    starts.push_back(std::move(v));
  } else {
    starts = start_points(x, y, config.starts, config.seed);
  }

  Objective objective = [&](std::span<const double> v, std::span<double> grad) {
    const NllResult r = neg_log_likelihood(x, y, KernelParams::from_log(v), true);
    std::copy(r.gradient.begin(), r.gradient.end(), grad.begin());
    return r.value;
  };

  BfgsOptions opts;
  opts.max_iter = config.max_iter;
  std::vector<std::string> diag;
  std::optional<BfgsResult> best;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    std::ostringstream line;
    line << "start " << s << ": ";
    try {
      BfgsResult r = minimize_box_bfgs(objective, starts[s], bounds.lower, bounds.upper, opts);
      line << "nll=" << r.f << " iterations=" << r.iterations << " evaluations=" << r.evaluations
           << " status=" << r.status;
      if (!best || r.f < best->f) best = std::move(r);
    } catch (const Error& e) {
      line << "failed: " << e.what();
    }
    diag.push_back(line.str());
  }
  if (!best) throw FitError("fit_gp: all optimizer starts failed", diag);

  GPModel m = GPModel::build(x, yv, KernelParams::from_log(best->x));
  m.diagnostics_ = std::move(diag);
  return m;
}

std::string GPModel::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "solgp.gp_model";
  j["version"] = 1;
  j["params"] = {{"lengthscales", params_.lengthscales},
                 {"signal_variance", params_.signal_variance},
                 {"nugget", params_.nugget}};
  j["mean_offset"] = mean_offset_;
  j["jitter"] = jitter_;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < x_.rows(); ++i)
    rows.push_back(std::vector<double>(x_.row(i).begin(), x_.row(i).end()));
  j["x"] = std::move(rows);
  j["y"] = y_;
  return j.dump(1);
}

GPModel GPModel::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("gp model json: ") + e.what());
  }
  try {
    if (j.at("format") != "solgp.gp_model") throw Error("gp model json: wrong format tag");
    if (j.at("version").get<int>() != 1) throw Error("gp model json: unsupported version");
    KernelParams p;
    p.lengthscales = j.at("params").at("lengthscales").get<std::vector<double>>();
    p.signal_variance = j.at("params").at("signal_variance").get<double>();
    p.nugget = j.at("params").at("nugget").get<double>();
    const auto rows = j.at("x").get<std::vector<std::vector<double>>>();
    auto y = j.at("y").get<std::vector<double>>();
    const std::size_t dim = rows.empty() ? 0 : rows.front().size();
    Matrix x(rows.size(), dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != dim) throw ShapeError("gp model json: ragged inputs");
      std::copy(rows[i].begin(), rows[i].end(), x.row(i).begin());
    }
    GPModel m = build(std::move(x), std::move(y), std::move(p));
    const double stored = j.at("mean_offset").get<double>();
    if (std::abs(stored - m.mean_offset_) > 1e-9 * (1.0 + std::abs(stored)))
      throw Error("gp model json: mean_offset inconsistent with stored outputs");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("gp model json: ") + e.what());
  }
}

}  // namespace solgp

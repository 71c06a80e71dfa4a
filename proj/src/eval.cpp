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

#include "solgp/eval.hpp"

#include <algorithm>
#include <array>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>

#include "json.hpp"
#include "solgp/csv.hpp"
#include "solgp/error.hpp"
#include "solgp/parallel.hpp"

namespace solgp {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a == 0) throw ShapeError(std::string(what) + ": empty input");
  if (a != b) throw ShapeError(std::string(what) + ": length mismatch");
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> obs) {
  check_lengths(pred.size(), obs.size(), "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - obs[i]) * (pred[i] - obs[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

double coverage95(const Prediction& pred, std::span<const double> obs) {
  check_lengths(pred.size(), obs.size(), "coverage95");
  if (pred.variance.size() != pred.mean.size()) throw ShapeError("coverage95: mean and variance lengths differ");
  std::size_t in = 0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (pred.variance[i] < 0.0) throw Error("coverage95: negative variance");
    in += std::abs(obs[i] - pred.mean[i]) <= kZ95 * std::sqrt(pred.variance[i]);
  }
  return static_cast<double>(in) / static_cast<double>(obs.size());
}

TTest paired_log_t_test(std::span<const double> sq_a, std::span<const double> sq_b) {
  check_lengths(sq_a.size(), sq_b.size(), "paired_log_t_test");
  if (sq_a.size() < 2) throw ShapeError("paired_log_t_test: need at least 2 pairs");
  const std::size_t n = sq_a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i)
    d[i] = std::log(std::max(sq_a[i], kSqErrorFloor)) - std::log(std::max(sq_b[i], kSqErrorFloor));
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  TTest out;
  out.n = n;
  out.mean_diff = mean;
  if (ss == 0.0) {
    out.degenerate = true;
    out.p = mean >= 0.0 ? 1.0 : 0.0;
    out.t = mean >= 0.0 ? (mean > 0.0 ? INFINITY : 0.0) : -INFINITY;
    return out;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  out.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  out.p = boost::math::cdf(dist, out.t);
  return out;
}

double proper_score(std::span<const double> mean, const Matrix& cov, std::span<const double> obs) {
  check_lengths(mean.size(), obs.size(), "proper_score");
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) throw ShapeError("proper_score: covariance shape");
  Matrix l = cov;
  if (!cholesky_in_place(l)) throw ConditioningError("proper_score: covariance is not positive definite");
  std::vector<double> r(mean.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = obs[i] - mean[i];
  solve_lower_in_place(l, r);
  double q = 0.0;
  for (double v : r) q += v * v;
  return -cholesky_log_det(l) - q;
}

// ---------------------------------------------------------------------
// Comparator registry

bool Comparator::needs_true_sim() const {
  return kind == ComparatorKind::TrueSimNoBias || kind == ComparatorKind::TrueSimBias ||
         kind == ComparatorKind::IvwTrueSim;
}

namespace {

struct Entry {
  const char* name;
  ComparatorKind kind;
  SourceId source;
  SourceId target;
};

const std::vector<Entry>& registry() {
  using K = ComparatorKind;
  using S = SourceId;
  static const std::vector<Entry> r{
      {"field-hat", K::Direct, S::Field, S::Field},
      {"simA-hat", K::Direct, S::SimA, S::SimA},
      {"simB-hat", K::Direct, S::SimB, S::SimB},
      {"simB-hat-nob", K::SurrogateNoBias, S::SimB, S::Field},
      {"simA-hat-nob", K::SurrogateNoBias, S::SimA, S::Field},
      {"simA-hat+b", K::SurrogateBias, S::SimA, S::Field},
      {"simB-hat+b", K::SurrogateBias, S::SimB, S::Field},
      {"ivw-hat", K::IvwSurrogate, S::Field, S::Field},
      {"simB-nob", K::TrueSimNoBias, S::SimB, S::Field},
      {"simA-nob", K::TrueSimNoBias, S::SimA, S::Field},
      {"simA+b", K::TrueSimBias, S::SimA, S::Field},
      {"simB+b", K::TrueSimBias, S::SimB, S::Field},
      {"ivw", K::IvwTrueSim, S::Field, S::Field},
      {"field-mean", K::TrainingMean, S::Field, S::Field},
      {"simA-mean", K::TrainingMean, S::SimA, S::SimA},
      {"simB-mean", K::TrainingMean, S::SimB, S::SimB},
  };
  return r;
}

}  // namespace

const std::vector<std::string>& comparator_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& e : registry()) v.emplace_back(e.name);
    return v;
  }();
  return names;
}

Comparator parse_comparator(std::string_view label) {
  Comparator c;
  c.label = std::string(label);
  std::string_view rest = label;
  for (bool more = true; more;) {
    more = false;
    if (rest.starts_with("local:")) {
      c.local = more = true;
      rest.remove_prefix(6);
    } else if (rest.starts_with("daily:")) {
      c.daily = more = true;
      rest.remove_prefix(6);
    }
  }
  for (const auto& e : registry()) {
    if (rest != e.name) continue;
    c.base = e.name;
    c.kind = e.kind;
    c.source = e.source;
    c.target = e.target;
    if (c.local && c.daily)
      throw Error("comparator " + c.label + ": the seasonal model has no local variant");
    return c;
  }
  throw Error("unknown comparator '" + std::string(label) + "'");
}

std::string_view to_string(CvMode m) {
  switch (m) {
    case CvMode::Refit: return "refit";
    case CvMode::WarmStart: return "warm";
    case CvMode::Fast: return "fast";
  }
  return "refit";
}

std::optional<CvMode> parse_cv_mode(std::string_view s) {
  if (s == "refit") return CvMode::Refit;
  if (s == "warm") return CvMode::WarmStart;
  if (s == "fast") return CvMode::Fast;
  return std::nullopt;
}

// ---------------------------------------------------------------------
// Pipelines

namespace {

std::string src_name(SourceId s) { return std::string(to_string(s)); }

// Fits GP stages by name. In record mode the fitted hyperparameters are
// kept; in replay mode they fix or warm-start the per-fold fits.
class StageFitter {
 public:
  StageFitter(const EvalConfig& cfg, bool local) : cfg_(cfg), local_(local) {}

  void start_replay() { replay_ = true; }

  GpFitConfig config(const std::string& stage) const {
    GpFitConfig f = cfg_.fit;
    if (!replay_ || cfg_.mode == CvMode::Refit) return f;
    const auto it = params_.find(stage);
    if (it == params_.end()) return f;
    if (cfg_.mode == CvMode::Fast) {
      f.fixed = it->second;
    } else {
      f.warm_start = it->second;
    }
    return f;
  }

  std::optional<LocalConfig> local(unsigned jobs) const {
    if (!local_) return std::nullopt;
    LocalConfig l = cfg_.local;
    l.jobs = jobs;
    return l;
  }

  void record(const std::string& stage, const Emulator& em) {
    if (replay_ || !em.global_model()) return;
    std::lock_guard lock(mu_);
    params_[stage] = em.global_model()->params();
  }

  Emulator fit(const std::string& stage, const Matrix& x, std::span<const double> y, unsigned jobs) {
    Emulator em = Emulator::train(x, y, config(stage), local(jobs));
    record(stage, em);
    return em;
  }

  CoeffFitter coeff_fitter(const std::string& stage) {
    return [this, stage](std::size_t k, const Matrix& x, std::span<const double> y) {
      return fit(stage + ":" + std::to_string(k), x, y, 1);
    };
  }

 private:
  const EvalConfig& cfg_;
  bool local_;
  bool replay_ = false;
  std::map<std::string, KernelParams> params_;
  std::mutex mu_;
};

Comparator recording_equivalent(Comparator c) {
  if (c.kind == ComparatorKind::TrueSimBias) c.kind = ComparatorKind::SurrogateBias;
  if (c.kind == ComparatorKind::IvwTrueSim) c.kind = ComparatorKind::IvwSurrogate;
  return c;
}

using Truth = std::array<std::vector<std::optional<double>>, 3>;  // per source, per query row

struct Training {
  Matrix x;
  std::vector<double> y;
};

struct AggData {
  Matrix loc;
  std::array<std::vector<std::optional<double>>, 3> mean;
};

AggData aggregate_all(const Dataset& ds) {
  AggData d;
  d.loc = site_locations(ds);
  for (SourceId s : kAllSources) {
    auto& m = d.mean[static_cast<std::size_t>(s)];
    m.assign(ds.size(), std::nullopt);
    try {
      for (const auto& sm : aggregate_time(ds, s).means) m[sm.site] = sm.mean;
    } catch (const EmptyInputError&) {
    }
  }
  return d;
}

Training training(const AggData& d, SourceId s, const std::vector<bool>& train) {
  const auto& m = d.mean[static_cast<std::size_t>(s)];
  std::vector<std::size_t> idx;
  Training t;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (train[i] && m[i]) {
      idx.push_back(i);
      t.y.push_back(*m[i]);
    }
  t.x = d.loc.select_rows(idx);
  return t;
}

std::vector<std::optional<double>> truth_for(const Truth* truth, SourceId s, std::size_t rows) {
  if (!truth) throw InfeasibleComparatorError("comparator needs simulator output at the prediction locations");
  const auto& v = (*truth)[static_cast<std::size_t>(s)];
  if (v.size() != rows) throw CoverageError("simulator values do not cover the prediction locations");
  return v;
}

Prediction constant_prediction(std::span<const double> y, std::size_t rows) {
  if (y.size() < 2) throw InsufficientDataError("training mean needs at least 2 values");
  double m = 0.0;
  for (double v : y) m += v;
  m /= static_cast<double>(y.size());
  double ss = 0.0;
  for (double v : y) ss += (v - m) * (v - m);
  Prediction p;
  p.mean.assign(rows, m);
  p.variance.assign(rows, ss / static_cast<double>(y.size() - 1));
  return p;
}

class AggPipeline {
 public:
  AggPipeline(const AggData& d, StageFitter& f, unsigned jobs) : d_(d), f_(f), jobs_(jobs) {}

  Prediction run(const Comparator& c, const std::vector<bool>& train, const Matrix& at, const Truth* truth) {
    using K = ComparatorKind;
    switch (c.kind) {
      case K::Direct:
      case K::SurrogateNoBias:
        return direct(c.source, train).predict(at, true);
      case K::SurrogateBias:
        return bias_corrected_predict(bias(c.source, train), at, true);
      case K::TrueSimBias:
        return bias_corrected_predict(bias(c.source, train), at, truth_for(truth, c.source, at.rows()), true);
      case K::TrueSimNoBias: {
        const auto v = truth_for(truth, c.source, at.rows());
        Prediction p;
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (!v[i]) throw CoverageError("no simulator value for query row " + std::to_string(i));
          p.mean.push_back(*v[i]);
          p.variance.push_back(kNaN);
        }
        return p;
      }
      case K::IvwSurrogate:
      case K::IvwTrueSim: {
        std::vector<Prediction> parts;
        parts.push_back(direct(SourceId::Field, train).predict(at, true));
        for (SourceId s : {SourceId::SimA, SourceId::SimB}) {
          const BiasModel bm = bias(s, train);
          parts.push_back(c.kind == K::IvwSurrogate
                              ? bias_corrected_predict(bm, at, true)
                              : bias_corrected_predict(bm, at, truth_for(truth, s, at.rows()), true));
        }
        return ivw_fuse(parts);
      }
      case K::TrainingMean:
        return constant_prediction(training(d_, c.target, train).y, at.rows());
    }
    throw Error("unhandled comparator");
  }

  std::size_t n_train(const Comparator& c, const std::vector<bool>& train) const {
    return training(d_, c.kind == ComparatorKind::Direct || c.kind == ComparatorKind::TrainingMean ? c.target
                                                                                                  : SourceId::Field,
                    train)
        .y.size();
  }

 private:
  Emulator direct(SourceId s, const std::vector<bool>& train) {
    const auto t = training(d_, s, train);
    return f_.fit("direct:" + src_name(s), t.x, t.y, jobs_);
  }

  BiasModel bias(SourceId s, const std::vector<bool>& train) {
    auto sur = std::make_shared<const Emulator>(direct(s, train));
    const auto field = training(d_, SourceId::Field, train);
    const auto at_field = sur->predict(field.x, false);
    const std::string stage = "bias:" + src_name(s);
    BiasModel bm = fit_bias(field.x, field.y, sur, at_field, f_.config(stage), f_.local(jobs_));
    f_.record(stage, bm.discrepancy);
    return bm;
  }

  const AggData& d_;
  StageFitter& f_;
  unsigned jobs_;
};

// Daily (seasonal) pipelines. Per-site OLS of the raw sources does not
// depend on the fold and is computed once.
struct DailyData {
  const Dataset* ds = nullptr;
  Matrix loc;
  int origin = 0;
  OlsOptions ols;
  std::array<SiteCoefficients, 3> coeffs;
};

DailyData daily_data(const Dataset& ds, const EvalConfig& cfg) {
  DailyData d;
  d.ds = &ds;
  d.loc = site_locations(ds);
  d.origin = cfg.day_origin.value_or(ds.day_range().first);
  d.ols = cfg.ols;
  d.ols.day_origin = d.origin;
  for (SourceId s : kAllSources)
    d.coeffs[static_cast<std::size_t>(s)] = fit_site_coefficients(ds, s, d.ols, cfg.jobs);
  return d;
}

using DailyTruth = std::function<std::optional<double>(SourceId, std::size_t row, int day)>;

class DailyPipeline {
 public:
  DailyPipeline(const DailyData& d, StageFitter& f) : d_(d), f_(f) {}

  // Fits the comparator's models once; the returned function evaluates
  // one day over the rows of `at`.
  using DayFn = std::function<Prediction(int day)>;

  DayFn prepare(const Comparator& c, const std::vector<bool>& train, const Matrix& at, const DailyTruth* truth) {
    using K = ComparatorKind;
    const std::size_t rows = at.rows();
    std::optional<DailyTruth> tr;
    if (truth) tr = *truth;
    auto need_truth = [tr](SourceId s, std::size_t i, int day) {
      if (!tr) throw InfeasibleComparatorError("comparator needs simulator output at the prediction locations");
      const auto v = (*tr)(s, i, day);
      if (!v) throw CoverageError("no simulator value for row " + std::to_string(i) + " on day " + std::to_string(day));
      return *v;
    };
    auto blank = [rows] {
      Prediction p;
      p.mean.resize(rows);
      p.variance.resize(rows);
      return p;
    };
    switch (c.kind) {
      case K::Direct:
      case K::SurrogateNoBias: {
        const auto cf = field(c.source, train);
        auto cp = std::make_shared<const CoeffPrediction>(predict_coefficients(cf, at));
        const int origin = cf.day_origin;
        const double rv = cf.resid_var;
        return [=](int day) {
          Prediction p = blank();
          for (std::size_t i = 0; i < rows; ++i) seasonal_combine(*cp, i, day, origin, rv, true, p.mean[i], p.variance[i]);
          return p;
        };
      }
      case K::SurrogateBias:
      case K::TrueSimBias: {
        const auto bm = bias(c.source, train);
        auto sp = std::make_shared<const CoeffPrediction>(predict_coefficients(*bm.surrogate, at));
        auto bp = std::make_shared<const CoeffPrediction>(predict_coefficients(bm.discrepancy, at));
        const int origin = d_.origin;
        const double rv = bm.discrepancy.resid_var;
        const bool true_sim = c.kind == K::TrueSimBias;
        const SourceId src = c.source;
        return [=](int day) {
          Prediction p = blank();
          for (std::size_t i = 0; i < rows; ++i) {
            double bmean, bvar;
            seasonal_combine(*bp, i, day, origin, rv, true, bmean, bvar);
            if (true_sim) {
              p.mean[i] = need_truth(src, i, day) + bmean;
              p.variance[i] = bvar;
            } else {
              double sm, sv;
              seasonal_combine(*sp, i, day, origin, 0.0, false, sm, sv);
              p.mean[i] = sm + bmean;
              p.variance[i] = sv + bvar;
            }
          }
          return p;
        };
      }
      case K::TrueSimNoBias: {
        const SourceId src = c.source;
        return [=](int day) {
          Prediction p = blank();
          for (std::size_t i = 0; i < rows; ++i) {
            p.mean[i] = need_truth(src, i, day);
            p.variance[i] = kNaN;
          }
          return p;
        };
      }
      case K::IvwSurrogate:
      case K::IvwTrueSim: {
        Comparator f = c, a = c, b = c;
        f.kind = K::Direct;
        f.source = SourceId::Field;
        a.kind = b.kind = c.kind == K::IvwSurrogate ? K::SurrogateBias : K::TrueSimBias;
        a.source = SourceId::SimA;
        b.source = SourceId::SimB;
        DayFn pf = prepare(f, train, at, truth), pa = prepare(a, train, at, truth), pb = prepare(b, train, at, truth);
        return [=](int day) {
          const std::vector<Prediction> parts{pf(day), pa(day), pb(day)};
          return ivw_fuse(parts);
        };
      }
      case K::TrainingMean: {
        std::vector<double> y;
        for (std::size_t s = 0; s < d_.ds->size(); ++s)
          if (train[s])
            for (const auto& dv : d_.ds->series(s, c.target)) y.push_back(dv.value);
        const auto p = constant_prediction(y, rows);
        return [p](int) { return p; };
      }
    }
    throw Error("unhandled comparator");
  }

  std::vector<Prediction> run(const Comparator& c, const std::vector<bool>& train, const Matrix& at,
                              std::span<const int> days, const DailyTruth* truth) {
    const DayFn fn = prepare(c, train, at, truth);
    std::vector<Prediction> out;
    out.reserve(days.size());
    for (int d : days) out.push_back(fn(d));
    return out;
  }

 private:
  static std::vector<std::optional<HarmonicCoeffs>> masked(const SiteCoefficients& sc, const std::vector<bool>& train) {
    auto c = sc.coeffs;
    for (std::size_t s = 0; s < c.size(); ++s)
      if (!train[s]) c[s].reset();
    return c;
  }

  CoeffField field(SourceId s, const std::vector<bool>& train) {
    const auto c = masked(d_.coeffs[static_cast<std::size_t>(s)], train);
    return smooth_coefficients(d_.loc, c, f_.coeff_fitter("direct:" + src_name(s)), d_.ols.harmonics, 1, d_.origin);
  }

  SeasonalBiasModel bias(SourceId s, const std::vector<bool>& train) {
    auto sur = std::make_shared<const CoeffField>(field(s, train));
    const Dataset resid = seasonal_residuals(*d_.ds, *sur);
    const auto rc = fit_site_coefficients(resid, SourceId::Field, d_.ols, 1);
    auto disc = smooth_coefficients(d_.loc, masked(rc, train), f_.coeff_fitter("bias:" + src_name(s)),
                                    d_.ols.harmonics, 1, d_.origin);
    return SeasonalBiasModel{std::move(sur), std::move(disc)};
  }

  const DailyData& d_;
  StageFitter& f_;
};

}  // namespace

// ---------------------------------------------------------------------
// Cross-validation

namespace {

std::optional<double> day_value(const Dataset& ds, std::size_t site, SourceId s, int day) {
  const auto& ser = ds.series(site, s);
  const auto it = std::find_if(ser.begin(), ser.end(), [day](const DayValue& v) { return v.day == day; });
  if (it == ser.end()) return std::nullopt;
  return it->value;
}

std::vector<SourceId> truth_sources(const Comparator& c) {
  switch (c.kind) {
    case ComparatorKind::TrueSimNoBias:
    case ComparatorKind::TrueSimBias:
      return {c.source};
    case ComparatorKind::IvwTrueSim:
      return {SourceId::SimA, SourceId::SimB};
    default:
      return {};
  }
}

bool fits_models(const Comparator& c) {
  return c.kind != ComparatorKind::TrueSimNoBias && c.kind != ComparatorKind::TrainingMean;
}

double log_sq(double e) { return std::log(std::max(e * e, kSqErrorFloor)); }

void score_fold(FoldResult& fr, const Prediction& p, std::span<const double> obs) {
  fr.n_obs = obs.size();
  fr.rmse = rmse(p.mean, obs);
  bool has_var = std::none_of(p.variance.begin(), p.variance.end(), [](double v) { return std::isnan(v); });
  fr.covered_frac = has_var ? coverage95(p, obs) : kNaN;
  for (std::size_t i = 0; i < obs.size(); ++i) fr.log_sq_errors.push_back(log_sq(p.mean[i] - obs[i]));
}

}  // namespace

std::vector<FoldResult> loo_cv(const Dataset& ds, const Comparator& c, const EvalConfig& cfg) {
  const AggData agg = aggregate_all(ds);
  const auto& field = agg.mean[static_cast<std::size_t>(SourceId::Field)];
  const auto& target = agg.mean[static_cast<std::size_t>(c.target)];
  std::vector<std::size_t> fold_sites;
  for (std::size_t s = 0; s < ds.size(); ++s)
    if (field[s] && target[s]) fold_sites.push_back(s);

  StageFitter fitter(cfg, c.local);
  std::optional<DailyData> daily;
  if (c.daily) daily = daily_data(ds, cfg);

  const std::vector<bool> all(ds.size(), true);
  if (cfg.mode != CvMode::Refit && fits_models(c) && !fold_sites.empty()) {
    const Comparator rc = recording_equivalent(c);
    const Matrix at = agg.loc.select_rows(std::vector<std::size_t>{fold_sites.front()});
    try {
      if (daily) {
        DailyPipeline(*daily, fitter).run(rc, all, at, std::vector<int>{daily->origin}, nullptr);
      } else {
        AggPipeline(agg, fitter, cfg.jobs).run(rc, all, at, nullptr);
      }
    } catch (const Error&) {
      // folds fall back to full fits for stages that were not recorded
    }
  }
  fitter.start_replay();

  std::vector<FoldResult> out(fold_sites.size());
  parallel_for(fold_sites.size(), cfg.jobs, [&](std::size_t f) {
    const std::size_t h = fold_sites[f];
    FoldResult& fr = out[f];
    fr.site = h;
    fr.site_id = ds.sites()[h].id;
    std::vector<bool> train(ds.size(), true);
    train[h] = false;
    try {
      AggPipeline ap(agg, fitter, 1);
      fr.n_train = ap.n_train(c, train);
      const Matrix at = agg.loc.select_rows(std::vector<std::size_t>{h});
      const auto needs = truth_sources(c);
      if (!daily) {
        Truth truth;
        for (SourceId s : kAllSources) truth[static_cast<std::size_t>(s)] = {agg.mean[static_cast<std::size_t>(s)][h]};
        const Prediction p = ap.run(c, train, at, &truth);
        const std::vector<double> obs{*target[h]};
        score_fold(fr, p, obs);
      } else {
        std::vector<int> days;
        std::vector<double> obs;
        for (const auto& dv : ds.series(h, c.target)) {
          const bool ok = std::all_of(needs.begin(), needs.end(),
                                      [&](SourceId s) { return day_value(ds, h, s, dv.day).has_value(); });
          if (!ok) continue;
          days.push_back(dv.day);
          obs.push_back(dv.value);
        }
        if (days.empty()) throw CoverageError("no day with target and simulator values");
        const DailyTruth truth = [&](SourceId s, std::size_t, int day) { return day_value(ds, h, s, day); };
        const auto per_day = DailyPipeline(*daily, fitter).run(c, train, at, days, &truth);
        Prediction p;
        for (const auto& pd : per_day) {
          p.mean.push_back(pd.mean[0]);
          p.variance.push_back(pd.variance[0]);
        }
        score_fold(fr, p, obs);
      }
    } catch (const std::exception& e) {
      fr.failed = true;
      fr.diagnostics = e.what();
      fr.rmse = fr.covered_frac = kNaN;
      fr.log_sq_errors.clear();
    }
  });
  return out;
}

Prediction predict_comparator(const Dataset& ds, const Comparator& c, const EvalConfig& cfg,
                              const Matrix& locations) {
  if (c.daily) throw Error("comparator " + c.label + " is daily; use predict_comparator_daily");
  if (c.needs_true_sim())
    throw InfeasibleComparatorError("comparator " + c.label + " needs simulator output at the prediction locations");
  const AggData agg = aggregate_all(ds);
  StageFitter fitter(cfg, c.local);
  return AggPipeline(agg, fitter, cfg.jobs).run(c, std::vector<bool>(ds.size(), true), locations, nullptr);
}

std::vector<Prediction> predict_comparator_daily(const Dataset& ds, const Comparator& c, const EvalConfig& cfg,
                                                 const Matrix& locations, std::span<const int> days) {
  std::vector<Prediction> out;
  predict_comparator_daily(ds, c, cfg, locations, days, [&](int, const Prediction& p) { out.push_back(p); });
  return out;
}

void predict_comparator_daily(const Dataset& ds, const Comparator& c, const EvalConfig& cfg, const Matrix& locations,
                              std::span<const int> days, const std::function<void(int, const Prediction&)>& sink) {
  if (c.needs_true_sim())
    throw InfeasibleComparatorError("comparator " + c.label + " needs simulator output at the prediction locations");
  if (c.local) throw Error("comparator " + c.label + ": the seasonal model has no local variant");
  const DailyData d = daily_data(ds, cfg);
  StageFitter fitter(cfg, false);
  const auto fn = DailyPipeline(d, fitter).prepare(c, std::vector<bool>(ds.size(), true), locations, nullptr);
  for (int day : days) sink(day, fn(day));
}

// ---------------------------------------------------------------------
// Reports

namespace {

struct RunSummary {
  double rmse = kNaN;
  double cov95 = kNaN;
  std::size_t ok = 0;
  std::size_t failed = 0;
};

RunSummary summarize(const CvRun& run) {
  RunSummary s;
  double r = 0.0, c = 0.0;
  for (const auto& f : run.folds) {
    if (f.failed) {
      ++s.failed;
      continue;
    }
    ++s.ok;
    r += f.rmse;
    c += f.covered_frac;
  }
  if (s.ok > 0) {
    s.rmse = r / static_cast<double>(s.ok);
    s.cov95 = c / static_cast<double>(s.ok);
  }
  return s;
}

// p for "a beats b" over common successful folds; nullopt with < 2 pairs.
std::optional<double> paired_p(const CvRun& a, const CvRun& b) {
  std::map<std::size_t, double> bsq;
  for (const auto& f : b.folds)
    if (!f.failed) bsq[f.site] = f.rmse * f.rmse;
  std::vector<double> sa, sb;
  for (const auto& f : a.folds) {
    if (f.failed) continue;
    const auto it = bsq.find(f.site);
    if (it == bsq.end()) continue;
    sa.push_back(f.rmse * f.rmse);
    sb.push_back(it->second);
  }
  if (sa.size() < 2) return std::nullopt;
  return paired_log_t_test(sa, sb).p;
}

std::string fmt(std::optional<double> v) { return v && !std::isnan(*v) ? csv::format_double(*v) : ""; }

std::string fmt_short(std::optional<double> v) {
  if (!v || std::isnan(*v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", *v);
  return buf;
}

}  // namespace

ComparisonReport compare_runs(const std::vector<CvRun>& runs, const std::vector<CvRun>* baseline) {
  ComparisonReport rep;
  rep.has_p_tab = baseline != nullptr;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto s = summarize(runs[i]);
    ReportRow row;
    row.row = i + 1;
    row.target = src_name(runs[i].comparator.target);
    row.comparator = runs[i].comparator.label;
    row.rmse = s.rmse;
    row.cov95 = s.cov95;
    row.folds_ok = s.ok;
    row.folds_failed = s.failed;
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < i; ++j) {
      if (rep.rows[j].target != row.target || std::isnan(rep.rows[j].rmse)) continue;
      if (!best || rep.rows[j].rmse < rep.rows[*best].rmse) best = j;
    }
    if (best) {
      row.p = paired_p(runs[i], runs[*best]);
      if (row.p) row.ref_row = *best + 1;
    }
    if (baseline) {
      for (const auto& b : *baseline)
        if (b.comparator.label == row.comparator) {
          row.p_tab = paired_p(runs[i], b);
          break;
        }
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

void write_report_csv(std::ostream& out, const ComparisonReport& r) {
  out << "target,comparator,rmse,cov95,p,ref_row";
  if (r.has_p_tab) out << ",p_tab";
  out << '\n';
  for (const auto& row : r.rows) {
    out << row.target << ',' << row.comparator << ',' << fmt(row.rmse) << ',' << fmt(row.cov95) << ','
        << fmt(row.p) << ',' << (row.ref_row ? std::to_string(*row.ref_row) : "");
    if (r.has_p_tab) out << ',' << fmt(row.p_tab);
    out << '\n';
  }
}

void write_report_text(std::ostream& out, const ComparisonReport& r) {
  std::size_t w = 10;
  for (const auto& row : r.rows) w = std::max(w, row.comparator.size());
  char buf[256];
  std::snprintf(buf, sizeof buf, "%3s  %-6s %-*s %10s %7s %10s %4s", "#", "target", static_cast<int>(w),
                "comparator", "rmse", "cov95", "p", "ref");
  out << buf;
  if (r.has_p_tab) out << "      p_tab";
  out << "  folds\n";
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%3zu  %-6s %-*s %10s %7s %10s %4s", row.row, row.target.c_str(),
                  static_cast<int>(w), row.comparator.c_str(), fmt_short(row.rmse).c_str(),
                  fmt_short(row.cov95).c_str(), fmt_short(row.p).c_str(),
                  row.ref_row ? std::to_string(*row.ref_row).c_str() : "-");
    out << buf;
    if (r.has_p_tab) {
      std::snprintf(buf, sizeof buf, " %10s", fmt_short(row.p_tab).c_str());
      out << buf;
    }
    out << "  " << row.folds_ok;
    if (row.folds_failed) out << " (" << row.folds_failed << " failed)";
    out << '\n';
  }
}

std::string report_json(const ComparisonReport& r) {
  auto num = [](std::optional<double> v) -> nlohmann::ordered_json {
    if (!v || std::isnan(*v)) return nullptr;
    return *v;
  };
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    nlohmann::ordered_json j;
    j["row"] = row.row;
    j["target"] = row.target;
    j["comparator"] = row.comparator;
    j["rmse"] = num(row.rmse);
    j["cov95"] = num(row.cov95);
    j["p"] = num(row.p);
    j["ref_row"] = row.ref_row ? nlohmann::ordered_json(*row.ref_row) : nlohmann::ordered_json(nullptr);
    if (r.has_p_tab) j["p_tab"] = num(row.p_tab);
    j["folds_ok"] = row.folds_ok;
    j["folds_failed"] = row.folds_failed;
    rows.push_back(std::move(j));
  }
  return rows.dump(2);
}

}  // namespace solgp

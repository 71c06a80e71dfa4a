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
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "solgp/calibrate.hpp"
#include "solgp/data.hpp"
#include "solgp/gp.hpp"
#include "solgp/linalg.hpp"
#include "solgp/localgp.hpp"
#include "solgp/seasonal.hpp"

namespace solgp {

inline constexpr double kZ95 = 1.959964;
inline constexpr double kSqErrorFloor = 1e-12;

// Throws ShapeError on empty input or a length mismatch.
double rmse(std::span<const double> pred, std::span<const double> obs);

// Fraction of obs within mean +- 1.959964 sd. Throws ShapeError as rmse,
// and Error on a negative variance.
double coverage95(const Prediction& pred, std::span<const double> obs);

struct TTest {
  double p = 1.0;
  double t = 0.0;
  double mean_diff = 0.0;  // mean of log(a) - log(b)
  std::size_t n = 0;
  bool degenerate = false;  // zero variance of differences
};

// One-tailed paired t-test on log squared errors, H1: A has the smaller
// mean. Squared errors are floored at 1e-12 before the log. With zero
// variance of the differences p is 1 if the mean difference is >= 0,
// else 0.
TTest paired_log_t_test(std::span<const double> sq_a, std::span<const double> sq_b);

// -log|cov| - r' cov^{-1} r with r = obs - mean; higher is better.
// Throws ConditioningError unless cov is positive definite.
double proper_score(std::span<const double> mean, const Matrix& cov, std::span<const double> obs);

enum class ComparatorKind {
  Direct,           // GP of the target source itself
  SurrogateNoBias,  // simulator surrogate used as a field predictor
  SurrogateBias,    // surrogate plus discrepancy
  IvwSurrogate,     // field, simA surrogate + b, simB surrogate + b
  TrueSimNoBias,    // simulator output used as a field predictor
  TrueSimBias,      // simulator output plus discrepancy
  IvwTrueSim,       // field, simA + b, simB + b
  TrainingMean,     // constant training mean of the target
};

struct Comparator {
  std::string label;  // as given, e.g. "local:simA-hat+b"
  std::string base;   // without prefixes
  ComparatorKind kind = ComparatorKind::Direct;
  SourceId source = SourceId::Field;  // modelled source (simulator for sim rows)
  SourceId target = SourceId::Field;
  bool local = false;
  bool daily = false;

  bool needs_true_sim() const;
};

// Base names, in table order:
//   field-hat simA-hat simB-hat simB-hat-nob simA-hat-nob simA-hat+b
//   simB-hat+b ivw-hat simB-nob simA-nob simA+b simB+b ivw
//   field-mean simA-mean simB-mean
// Prefixes "local:" and "daily:" select local GPs and the seasonal model.
const std::vector<std::string>& comparator_names();
// Throws Error on an unknown name or an unsupported combination.
Comparator parse_comparator(std::string_view label);

enum class CvMode {
  Refit,      // full multi-start hyperparameter search in every fold
  WarmStart,  // one optimizer run per fold from the full-data optimum
  Fast,       // full-data hyperparameters reused (a deviation)
};
std::string_view to_string(CvMode m);
std::optional<CvMode> parse_cv_mode(std::string_view s);

struct EvalConfig {
  GpFitConfig fit;
  LocalConfig local;  // used by "local:" comparators
  OlsOptions ols;     // daily comparators
  std::optional<int> day_origin;
  CvMode mode = CvMode::Refit;
  unsigned jobs = 1;
};

struct FoldResult {
  std::size_t site = 0;
  std::string site_id;
  std::size_t n_train = 0;
  std::size_t n_obs = 0;
  double rmse = std::numeric_limits<double>::quiet_NaN();
  double covered_frac = std::numeric_limits<double>::quiet_NaN();  // NaN without a variance
  std::vector<double> log_sq_errors;
  bool failed = false;
  std::string diagnostics;
};

// Leave-one-site-out over sites with field data and target data. Other
// sites (e.g. simulator-only design points) only ever train. A failing
// fold is marked with diagnostics and the run continues. Results are in
// site order and do not depend on cfg.jobs.
std::vector<FoldResult> loo_cv(const Dataset& ds, const Comparator& c, const EvalConfig& cfg);

// Trains on every site and predicts at new locations (aggregated
// comparators). Throws InfeasibleComparatorError for comparators that
// need simulator output at the locations.
Prediction predict_comparator(const Dataset& ds, const Comparator& c, const EvalConfig& cfg,
                              const Matrix& locations);

// Daily comparators: one Prediction per requested day.
std::vector<Prediction> predict_comparator_daily(const Dataset& ds, const Comparator& c, const EvalConfig& cfg,
                                                 const Matrix& locations, std::span<const int> days);
// Same, streaming each day to `sink` in order; models are fitted once.
void predict_comparator_daily(const Dataset& ds, const Comparator& c, const EvalConfig& cfg, const Matrix& locations,
                              std::span<const int> days, const std::function<void(int, const Prediction&)>& sink);

struct CvRun {
  Comparator comparator;
  std::vector<FoldResult> folds;
};

struct ReportRow {
  std::size_t row = 0;  // 1-based
  std::string target;
  std::string comparator;
  double rmse = std::numeric_limits<double>::quiet_NaN();  // mean over folds
  double cov95 = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> p;
  std::optional<std::size_t> ref_row;
  std::optional<double> p_tab;  // against the same comparator in a baseline run
  std::size_t folds_ok = 0;
  std::size_t folds_failed = 0;
};

struct ComparisonReport {
  std::vector<ReportRow> rows;
  bool has_p_tab = false;
};

// p compares each row with the best (lowest RMSE) earlier row of the
// same target, paired over folds that succeeded in both, on per-fold
// squared RMSE.
ComparisonReport compare_runs(const std::vector<CvRun>& runs, const std::vector<CvRun>* baseline = nullptr);

void write_report_csv(std::ostream& out, const ComparisonReport& r);
void write_report_text(std::ostream& out, const ComparisonReport& r);
std::string report_json(const ComparisonReport& r);

}  // namespace solgp

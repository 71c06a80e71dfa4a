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

#include "solgp/cli.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "solgp/calibrate.hpp"
#include "solgp/csv.hpp"
#include "solgp/design.hpp"
#include "solgp/error.hpp"
#include "solgp/eval.hpp"
#include "solgp/seasonal.hpp"

namespace fs = std::filesystem;

namespace solgp::cli {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_hash(std::string_view command, std::uint64_t seed, const Settings& settings) {
  std::string text = "command=" + std::string(command) + "\nseed=" + std::to_string(seed) + "\n";
  for (const auto& [k, v] : settings) text += k + "=" + v + "\n";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a(text));
  return buf;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw EmptyInputError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<RegionFraction> top_regions(std::span<const DayGrid> days) {
  if (days.size() != static_cast<std::size_t>(kYearDays))
    throw CoverageError("top regions need a complete year of " + std::to_string(kYearDays) + " daily grids, got " +
                        std::to_string(days.size()));
  const auto& pts = days.front().points;
  if (pts.empty()) throw EmptyInputError("top regions: empty grid");
  std::vector<RegionFraction> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) out[i].point = pts[i];
  for (std::size_t d = 0; d < days.size(); ++d) {
    const auto& g = days[d];
    if (g.points != pts || g.pred.size() != pts.size() || g.pred.variance.size() != pts.size())
      throw CoverageError("top regions: grid of day " + std::to_string(d) + " differs from day 0");
    if (pts.size() == 1) {
      out[0].top_decile += 1.0;
      out[0].confident += 1.0;
      continue;
    }
    const double q90 = quantile(g.pred.mean, 0.90);
    const double q75 = quantile(g.pred.mean, 0.75);
    const double q25 = quantile(g.pred.mean, 0.25);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double m = g.pred.mean[i];
      const double lower = m - kZ90 * std::sqrt(std::max(g.pred.variance[i], 0.0));
      out[i].top_decile += m >= q90;
      out[i].confident += m >= q75 && lower >= q25;
    }
  }
  for (auto& r : out) {
    r.top_decile /= static_cast<double>(days.size());
    r.confident /= static_cast<double>(days.size());
  }
  return out;
}

namespace {

using Json = nlohmann::ordered_json;
using csv::format_double;

struct Global {
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::string out_dir = ".";
};

struct Opts {
  std::string input;
  std::string schema = "auto";
  std::string source = "field";
  std::string sim = "simA";
  bool local = false;
  std::vector<std::string> comparators{"field-hat", "simA-hat+b", "simB-hat+b", "ivw-hat"};
  std::string comparator = "field-hat";
  std::string mode = "refit";
  std::string baseline;
  int starts = 5;
  int max_iter = 200;
  std::size_t local_n = 50;
  std::string local_method = "nn";
  int day_origin = 0;
  bool intercept_only = false;
  std::size_t min_obs = kMinObs;
  std::string box = "24,50,-125,-66";
  double resolution = 0.5;
  std::string days;
  std::string existing;
  std::string polygon;
  std::size_t n_new = 0;
  std::size_t candidates = 0;
  std::size_t rejections = 0;
  double grid_step = kPairsStep;
  std::string layer;
  std::string start;
  std::string end;
  std::string points;
  bool snap = false;
  std::vector<std::string> predictions;
  std::string grid_dir;
};

std::string abs_path(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

class Artifacts {
 public:
  Artifacts(const Global& g, std::string command, Settings settings, std::ostream& log)
      : g_(g), command_(std::move(command)), settings_(std::move(settings)), log_(log) {
    hash_ = config_hash(command_, g_.seed, settings_);
    fs::create_directories(g_.out_dir);
  }

  void write(const std::string& name, const std::function<void(std::ostream&)>& body,
             const Settings& extra = {}) const {
    std::ostringstream os;
    os << "# command: " << command_ << "\n# seed: " << g_.seed << "\n# config_hash: " << hash_ << '\n';
    for (const auto& [k, v] : settings_) os << "# " << k << ": " << v << '\n';
    for (const auto& [k, v] : extra) os << "# " << k << ": " << v << '\n';
    body(os);
    emit(name, os.str());
  }

  void write_json(const std::string& name, const std::string& key, Json payload) const {
    Json doc;
    Json meta;
    meta["command"] = command_;
    meta["seed"] = g_.seed;
    meta["config_hash"] = hash_;
    for (const auto& [k, v] : settings_) meta[k] = v;
    doc["metadata"] = std::move(meta);
    doc[key] = std::move(payload);
    emit(name, doc.dump(2) + "\n");
  }

 private:
  void emit(const std::string& name, const std::string& text) const {
    const fs::path p = fs::path(g_.out_dir) / name;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write " + p.string());
    f << text;
    if (!f) throw Error("write failed: " + p.string());
    log_ << "wrote " << p.string() << '\n';
  }

  const Global& g_;
  std::string command_;
  Settings settings_;
  std::string hash_;
  std::ostream& log_;
};

// Header plus records of a plain CSV; '#' lines are skipped.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line;

  std::size_t col(const std::string& name, const std::string& path) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(1, path + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  Table t;
  std::string line;
  std::size_t no = 0;
  if (!csv::next_record(in, line, no)) throw EmptyInputError(path + ": no header");
  for (auto f : csv::split(line)) t.header.emplace_back(csv::trim(f));
  while (csv::next_record(in, line, no)) {
    std::vector<std::string> r;
    for (auto f : csv::split(line)) r.emplace_back(csv::trim(f));
    if (r.size() != t.header.size())
      throw ParseError(no, path + ": expected " + std::to_string(t.header.size()) + " fields");
    t.rows.push_back(std::move(r));
    t.line.push_back(no);
  }
  return t;
}

double number(const Table& t, std::size_t r, std::size_t c, const std::string& path) {
  const auto v = csv::to_double(t.rows[r][c]);
  if (!v) throw ParseError(t.line[r], path + ": bad number '" + t.rows[r][c] + "'");
  return *v;
}

std::vector<LatLon> read_points(const std::string& path) {
  const Table t = read_table(path);
  const std::size_t la = t.col("lat", path), lo = t.col("lon", path);
  std::vector<LatLon> pts;
  std::set<std::pair<double, double>> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const LatLon p{number(t, r, la, path), number(t, r, lo, path)};
    if (seen.insert({p.lat, p.lon}).second) pts.push_back(p);
  }
  return pts;
}

DayGrid read_prediction(const std::string& path) {
  const Table t = read_table(path);
  const std::size_t la = t.col("lat", path), lo = t.col("lon", path), m = t.col("mean", path),
                    v = t.col("var", path);
  DayGrid g;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    g.points.push_back({number(t, r, la, path), number(t, r, lo, path)});
    g.pred.mean.push_back(number(t, r, m, path));
    g.pred.variance.push_back(number(t, r, v, path));
  }
  return g;
}

void write_prediction(std::ostream& os, const std::vector<LatLon>& pts, const Prediction& p) {
  os << "lat,lon,mean,var\n";
  for (std::size_t i = 0; i < pts.size(); ++i)
    os << format_double(pts[i].lat) << ',' << format_double(pts[i].lon) << ',' << format_double(p.mean[i]) << ','
       << format_double(p.variance[i]) << '\n';
}

Matrix to_matrix(const std::vector<LatLon>& pts) {
  Matrix m(pts.size(), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    m(i, 0) = pts[i].lat;
    m(i, 1) = pts[i].lon;
  }
  return m;
}

Box parse_box(const std::string& s) {
  const auto f = csv::split(s);
  std::vector<double> v;
  for (auto x : f) {
    const auto d = csv::to_double(csv::trim(x));
    if (!d) throw Error("box: bad number in '" + s + "'");
    v.push_back(*d);
  }
  if (v.size() != 4 || !(v[0] < v[1]) || !(v[2] < v[3]))
    throw Error("box must be lat_min,lat_max,lon_min,lon_max with min < max");
  return Box{v[0], v[1], v[2], v[3]};
}

std::vector<int> parse_days(const std::string& s) {
  const auto colon = s.find(':');
  auto num = [&](std::string_view x) {
    const auto v = csv::to_int(csv::trim(x));
    if (!v || *v < 0) throw Error("days: expected d or a:b, got '" + s + "'");
    return static_cast<int>(*v);
  };
  if (colon == std::string::npos) return {num(s)};
  const int a = num(std::string_view(s).substr(0, colon)), b = num(std::string_view(s).substr(colon + 1));
  if (b < a) throw Error("days: empty range '" + s + "'");
  std::vector<int> out;
  for (int d = a; d <= b; ++d) out.push_back(d);
  return out;
}

Dataset load_dataset(const Opts& o) {
  if (o.schema == "auto") return load_csv(o.input);
  if (o.schema == "long") return load_csv(o.input, CsvSchema::Long);
  if (o.schema == "wide") return load_csv(o.input, CsvSchema::Wide);
  throw Error("schema must be auto, long or wide");
}

SourceId source_of(const std::string& s) {
  const auto v = parse_source(s);
  if (!v) throw Error("unknown source '" + s + "' (field, simA, simB)");
  return *v;
}

GpFitConfig fit_config(const Global& g, const Opts& o) {
  GpFitConfig f;
  f.starts = o.starts;
  f.max_iter = o.max_iter;
  f.seed = g.seed;
  return f;
}

LocalConfig local_config(const Global& g, const Opts& o) {
  LocalConfig l;
  l.n = o.local_n;
  if (o.local_method == "nn") {
    l.method = LocalMethod::NearestNeighbor;
  } else if (o.local_method == "alc") {
    l.method = LocalMethod::GreedyVariance;
  } else {
    throw Error("local method must be nn or alc");
  }
  l.fit = fit_config(g, o);
  l.jobs = g.jobs;
  return l;
}

EvalConfig eval_config(const Global& g, const Opts& o, const CLI::Option* origin_opt) {
  EvalConfig c;
  c.fit = fit_config(g, o);
  c.local = local_config(g, o);
  c.ols.min_obs = o.min_obs;
  c.ols.harmonics = !o.intercept_only;
  if (origin_opt && origin_opt->count() > 0) c.day_origin = o.day_origin;
  const auto m = parse_cv_mode(o.mode);
  if (!m) throw Error("mode must be refit, warm or fast");
  c.mode = *m;
  c.jobs = g.jobs;
  return c;
}

Settings fit_settings(const Opts& o) {
  return {{"fit.starts", std::to_string(o.starts)}, {"fit.max_iter", std::to_string(o.max_iter)}};
}

Settings model_settings(const Opts& o, const CLI::Option* origin_opt) {
  Settings s = fit_settings(o);
  s.emplace_back("local.n", std::to_string(o.local_n));
  s.emplace_back("local.method", o.local_method);
  s.emplace_back("phase.day_origin",
                 origin_opt && origin_opt->count() > 0 ? std::to_string(o.day_origin) : "first-day");
  s.emplace_back("seasonal.harmonics", o.intercept_only ? "false" : "true");
  s.emplace_back("seasonal.min_obs", std::to_string(o.min_obs));
  return s;
}

// ---------------------------------------------------------------------
// Commands

int cmd_aggregate(const Global& g, const Opts& o, std::ostream& out) {
  const Dataset ds = load_dataset(o);
  Artifacts art(g, "aggregate", {{"input", abs_path(o.input)}, {"schema", o.schema}}, out);
  for (SourceId s : kAllSources) {
    Aggregate a;
    try {
      a = aggregate_time(ds, s);
    } catch (const EmptyInputError&) {
      continue;
    }
    art.write("aggregate_" + std::string(to_string(s)) + ".csv", [&](std::ostream& os) {
      os << "site_id,lat,lon,mean,n_obs\n";
      for (const auto& m : a.means) {
        const Site& site = ds.sites()[m.site];
        os << site.id << ',' << format_double(site.lat) << ',' << format_double(site.lon) << ','
           << format_double(m.mean) << ',' << m.n_obs << '\n';
      }
    });
  }
  const auto issues = quality_report(ds);
  art.write("quality.csv", [&](std::ostream& os) { write_quality_csv(os, issues); });
  out << ds.size() << " sites, " << issues.size() << " quality issues\n";
  return 0;
}

struct Means {
  std::vector<std::size_t> sites;
  Matrix x;
  std::vector<double> y;
};

Means site_means(const Dataset& ds, SourceId s) {
  Means m;
  for (const auto& sm : aggregate_time(ds, s).means) {
    m.sites.push_back(sm.site);
    m.y.push_back(sm.mean);
  }
  m.x = site_locations(ds).select_rows(m.sites);
  return m;
}

Json model_json(const Emulator& e) {
  if (const GPModel* gp = e.global_model()) return Json::parse(gp->to_json());
  return nullptr;
}

int cmd_fit(const Global& g, const Opts& o, std::ostream& out) {
  const Dataset ds = load_dataset(o);
  const SourceId s = source_of(o.source);
  const Means m = site_means(ds, s);
  Settings st{{"input", abs_path(o.input)}, {"source", o.source}};
  for (auto& kv : fit_settings(o)) st.push_back(kv);
  const GPModel gp = fit_gp(m.x, m.y, fit_config(g, o));
  Artifacts art(g, "fit", st, out);
  art.write_json("model_" + o.source + ".json", "model", Json::parse(gp.to_json()));
  const Prediction p = gp.predict(m.x, true);
  art.write("fitted_" + o.source + ".csv", [&](std::ostream& os) {
    os << "site_id,lat,lon,value,mean,var\n";
    for (std::size_t i = 0; i < m.y.size(); ++i) {
      const Site& site = ds.sites()[m.sites[i]];
      os << site.id << ',' << format_double(site.lat) << ',' << format_double(site.lon) << ','
         << format_double(m.y[i]) << ',' << format_double(p.mean[i]) << ',' << format_double(p.variance[i]) << '\n';
    }
  });
  const auto& kp = gp.params();
  out << "lengthscales";
  for (double t : kp.lengthscales) out << ' ' << format_double(t);
  out << "; signal_variance " << format_double(kp.signal_variance) << "; nugget " << format_double(kp.nugget)
      << "; nll " << format_double(gp.nll()) << '\n';
  return 0;
}

int cmd_calibrate(const Global& g, const Opts& o, std::ostream& out) {
  const Dataset ds = load_dataset(o);
  const SourceId s = source_of(o.sim);
  if (s == SourceId::Field) throw Error("calibrate needs a simulator source (simA or simB)");
  const Means sim = site_means(ds, s), field = site_means(ds, SourceId::Field);
  const GpFitConfig fc = fit_config(g, o);
  std::optional<LocalConfig> lc;
  if (o.local) lc = local_config(g, o);
  Settings st{{"input", abs_path(o.input)}, {"sim", o.sim}, {"local", o.local ? "true" : "false"}};
  for (auto& kv : fit_settings(o)) st.push_back(kv);
  if (o.local) {
    st.emplace_back("local.n", std::to_string(o.local_n));
    st.emplace_back("local.method", o.local_method);
  }
  auto sur = std::make_shared<const Emulator>(Emulator::train(sim.x, sim.y, fc, lc));
  const Prediction at_field = sur->predict(field.x, false);
  const BiasModel bm = fit_bias(field.x, field.y, sur, at_field, fc, lc);
  const Prediction b = bm.discrepancy.predict(field.x, true);
  const Prediction corrected = bias_corrected_predict(bm, field.x, true);
  Artifacts art(g, "calibrate", st, out);
  art.write("calibrate_" + o.sim + ".csv", [&](std::ostream& os) {
    os << "site_id,lat,lon,field,surrogate,bias_mean,bias_var,corrected_mean,corrected_var\n";
    for (std::size_t i = 0; i < field.y.size(); ++i) {
      const Site& site = ds.sites()[field.sites[i]];
      os << site.id << ',' << format_double(site.lat) << ',' << format_double(site.lon) << ','
         << format_double(field.y[i]) << ',' << format_double(at_field.mean[i]) << ',' << format_double(b.mean[i])
         << ',' << format_double(b.variance[i]) << ',' << format_double(corrected.mean[i]) << ','
         << format_double(corrected.variance[i]) << '\n';
    }
  });
  if (!o.local) {
    Json models;
    models["surrogate"] = model_json(*sur);
    models["discrepancy"] = model_json(bm.discrepancy);
    art.write_json("models_" + o.sim + ".json", "models", std::move(models));
  }
  return 0;
}

int cmd_fuse(const Global& g, const Opts& o, std::ostream& out) {
  std::vector<DayGrid> parts;
  Settings st;
  for (const auto& p : o.predictions) {
    parts.push_back(read_prediction(p));
    st.emplace_back("prediction", abs_path(p));
    if (parts.back().points != parts.front().points)
      throw ShapeError(p + ": locations differ from " + o.predictions.front());
  }
  std::vector<Prediction> preds;
  for (const auto& d : parts) preds.push_back(d.pred);
  const Prediction f = ivw_fuse(preds);
  Artifacts(g, "fuse", st, out).write("fused.csv", [&](std::ostream& os) {
    write_prediction(os, parts.front().points, f);
  });
  return 0;
}

std::vector<CvRun> run_cv(const Dataset& ds, const std::vector<Comparator>& cs, const EvalConfig& cfg,
                          std::ostream& out, const char* tag) {
  std::vector<CvRun> runs;
  for (const auto& c : cs) {
    out << tag << c.label << " ..." << std::flush;
    runs.push_back(CvRun{c, loo_cv(ds, c, cfg)});
    std::size_t failed = 0;
    for (const auto& f : runs.back().folds) failed += f.failed;
    out << ' ' << runs.back().folds.size() << " folds";
    if (failed) out << ", " << failed << " failed";
    out << '\n';
  }
  return runs;
}

int cmd_cv(const Global& g, const Opts& o, const CLI::Option* origin_opt, std::ostream& out) {
  const Dataset ds = load_dataset(o);
  std::vector<Comparator> cs;
  for (const auto& name : o.comparators) cs.push_back(parse_comparator(name));
  if (cs.empty()) throw Error("no comparators given");
  const EvalConfig cfg = eval_config(g, o, origin_opt);
  std::string names;
  for (const auto& c : cs) names += (names.empty() ? "" : " ") + c.label;
  Settings st{{"input", abs_path(o.input)}, {"comparators", names}, {"cv.mode", o.mode}};
  if (!o.baseline.empty()) st.emplace_back("baseline", abs_path(o.baseline));
  for (auto& kv : model_settings(o, origin_opt)) st.push_back(kv);

  const auto runs = run_cv(ds, cs, cfg, out, "");
  std::optional<std::vector<CvRun>> base;
  if (!o.baseline.empty()) {
    Opts bo = o;
    bo.input = o.baseline;
    base = run_cv(load_dataset(bo), cs, cfg, out, "baseline ");
  }
  const ComparisonReport rep = compare_runs(runs, base ? &*base : nullptr);

  Artifacts art(g, "cv", st, out);
  art.write("report.csv", [&](std::ostream& os) { write_report_csv(os, rep); });
  art.write("report.txt", [&](std::ostream& os) { write_report_text(os, rep); });
  art.write_json("report.json", "rows", Json::parse(report_json(rep)));
  art.write("folds.csv", [&](std::ostream& os) {
    os << "comparator,site_id,n_train,n_obs,rmse,cov95,failed,diagnostics\n";
    for (const auto& r : runs)
      for (const auto& f : r.folds) {
        std::string diag = f.diagnostics;
        std::replace(diag.begin(), diag.end(), ',', ';');
        std::replace(diag.begin(), diag.end(), '\n', ' ');
        os << r.comparator.label << ',' << f.site_id << ',' << f.n_train << ',' << f.n_obs << ','
           << (std::isnan(f.rmse) ? "" : format_double(f.rmse)) << ','
           << (std::isnan(f.covered_frac) ? "" : format_double(f.covered_frac)) << ',' << (f.failed ? 1 : 0) << ','
           << diag << '\n';
      }
  });
  write_report_text(out, rep);
  return 0;
}

int cmd_design(const Global& g, const Opts& o, std::ostream& out) {
  if (o.n_new == 0) throw Error("design: --n must be positive");
  std::vector<LatLon> existing;
  if (!o.existing.empty()) existing = read_points(o.existing);
  Region region = parse_box(o.box);
  Settings st{{"n", std::to_string(o.n_new)},
              {"candidates", std::to_string(o.candidates)},
              {"grid_step", format_double(o.grid_step)},
              {"existing", abs_path(o.existing)}};
  if (!o.polygon.empty()) {
    region = load_polygon(o.polygon);
    st.emplace_back("polygon", abs_path(o.polygon));
  } else {
    st.emplace_back("box", o.box);
  }
  st.emplace_back("rejections", std::to_string(o.rejections));
  DesignOptions opts;
  opts.candidates = o.candidates;
  opts.seed = g.seed;
  opts.grid.step = o.grid_step;
  const DesignResult d = maximin_design(o.n_new, existing, region, opts);
  std::vector<bool> answered(d.points.size(), true);
  if (o.rejections > 0)
    for (std::size_t i : simulate_rejections(d.points.size(), o.rejections, g.seed)) answered[i] = false;

  Artifacts art(g, "design", st, out);
  art.write("design.csv", [&](std::ostream& os) {
    os << "lat,lon,answered\n";
    for (std::size_t i = 0; i < d.points.size(); ++i)
      os << format_double(d.points[i].lat) << ',' << format_double(d.points[i].lon) << ',' << (answered[i] ? 1 : 0)
         << '\n';
  }, {{"achieved_min_dist", format_double(d.achieved_min_dist)}});
  if (!o.layer.empty()) {
    PairsQuery q{o.layer, o.start, o.end, {}};
    for (std::size_t i = 0; i < d.points.size(); ++i)
      if (answered[i]) q.coords.push_back(d.points[i]);
    art.write_json("pairs_query.json", "query", Json::parse(build_pairs_query(q)));
  }
  out << d.points.size() << " points, min distance " << format_double(d.achieved_min_dist) << " deg\n";
  return 0;
}

int cmd_predict_grid(const Global& g, const Opts& o, const CLI::Option* origin_opt, std::ostream& out) {
  const Comparator c = parse_comparator(o.comparator);
  if (c.needs_true_sim())
    throw InfeasibleComparatorError("comparator " + c.label +
                                    " needs simulator output at every grid point, which is not available off-station");
  if (c.daily && o.days.empty()) throw Error("daily comparators need --days");
  if (!(o.resolution > 0.0)) throw Error("resolution must be positive");
  const Box box = parse_box(o.box);
  const Dataset ds = load_dataset(o);
  const EvalConfig cfg = eval_config(g, o, origin_opt);
  const auto pts = grid_points(box, o.resolution);
  const Matrix at = to_matrix(pts);
  Settings st{{"input", abs_path(o.input)},
              {"comparator", c.label},
              {"box", o.box},
              {"resolution", format_double(o.resolution)}};
  if (c.daily) st.emplace_back("days", o.days);
  for (auto& kv : model_settings(o, origin_opt)) st.push_back(kv);
  Artifacts art(g, "predict-grid", st, out);
  out << pts.size() << " grid points\n";
  if (!c.daily) {
    const Prediction p = predict_comparator(ds, c, cfg, at);
    art.write("grid.csv", [&](std::ostream& os) { write_prediction(os, pts, p); });
    return 0;
  }
  const auto days = parse_days(o.days);
  predict_comparator_daily(ds, c, cfg, at, days, [&](int day, const Prediction& p) {
    char name[32];
    std::snprintf(name, sizeof name, "grid_day_%03d.csv", day);
    art.write(name, [&](std::ostream& os) { write_prediction(os, pts, p); }, {{"day", std::to_string(day)}});
  });
  return 0;
}

int cmd_top_regions(const Global& g, const Opts& o, std::ostream& out) {
  std::vector<DayGrid> days;
  for (int d = 0; d < kYearDays; ++d) {
    char name[32];
    std::snprintf(name, sizeof name, "grid_day_%03d.csv", d);
    const fs::path p = fs::path(o.grid_dir) / name;
    if (!fs::exists(p)) throw CoverageError("incomplete year: " + p.string() + " is missing");
    days.push_back(read_prediction(p.string()));
  }
  const auto rows = top_regions(days);
  Artifacts(g, "top-regions", {{"grid_dir", abs_path(o.grid_dir)}}, out).write("top_regions.csv", [&](std::ostream& os) {
    os << "lat,lon,top_decile_frac,confident_frac\n";
    for (const auto& r : rows)
      os << format_double(r.point.lat) << ',' << format_double(r.point.lon) << ',' << format_double(r.top_decile)
         << ',' << format_double(r.confident) << '\n';
  });
  return 0;
}

int cmd_pairs_query(const Global& g, const Opts& o, std::ostream& out) {
  PairsQuery q{o.layer, o.start, o.end, read_points(o.points)};
  if (o.snap) {
    GridSpec gs;
    gs.step = o.grid_step;
    for (auto& p : q.coords) p = snap_to_grid(p, gs);
  }
  const std::string doc = build_pairs_query(q);
  Settings st{{"layer", o.layer},         {"start", o.start}, {"end", o.end}, {"points", abs_path(o.points)},
              {"snap", o.snap ? "true" : "false"}, {"grid_step", format_double(o.grid_step)}};
  Artifacts(g, "pairs-query", st, out).write_json("pairs_query.json", "query", Json::parse(doc));
  out << doc << '\n';
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatial GP emulation, calibration and evaluation for solar irradiance", "solgp"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value configuration file mirroring the flags");
  Global g;
  Opts o;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--jobs", g.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "output directory")->capture_default_str();

  auto input = [&](CLI::App* sc) {
    sc->add_option("--input", o.input, "dataset CSV (long or wide)")->required()->check(CLI::ExistingFile);
    sc->add_option("--schema", o.schema, "auto, long or wide")->capture_default_str();
  };
  auto fitting = [&](CLI::App* sc) {
    sc->add_option("--starts", o.starts, "optimizer starts")->capture_default_str()->check(CLI::PositiveNumber);
    sc->add_option("--max-iter", o.max_iter, "optimizer iterations")->capture_default_str();
  };
  CLI::Option* origin_opt = nullptr;
  auto modelling = [&](CLI::App* sc) {
    fitting(sc);
    sc->add_option("--local-n", o.local_n, "local sub-design size")->capture_default_str();
    sc->add_option("--local-method", o.local_method, "nn or alc")->capture_default_str();
    auto* opt = sc->add_option("--day-origin", o.day_origin, "harmonic phase origin (default: first day)");
    if (!origin_opt) origin_opt = opt;
    sc->add_flag("--intercept-only", o.intercept_only, "seasonal model without harmonics");
    sc->add_option("--min-obs", o.min_obs, "minimum days per site")->capture_default_str();
  };

  auto* agg = app.add_subcommand("aggregate", "per-site time means and a quality report");
  input(agg);
  auto* fit = app.add_subcommand("fit", "fit a GP to one source's site means");
  input(fit);
  fitting(fit);
  fit->add_option("--source", o.source, "field, simA or simB")->capture_default_str();
  auto* cal = app.add_subcommand("calibrate", "simulator surrogate plus field discrepancy");
  input(cal);
  fitting(cal);
  cal->add_option("--sim", o.sim, "simA or simB")->capture_default_str();
  cal->add_flag("--local", o.local, "local GP emulators");
  cal->add_option("--local-n", o.local_n, "local sub-design size")->capture_default_str();
  cal->add_option("--local-method", o.local_method, "nn or alc")->capture_default_str();
  auto* fuse = app.add_subcommand("fuse", "inverse-variance weighted fusion of prediction CSVs");
  fuse->add_option("--prediction", o.predictions, "lat,lon,mean,var CSV (repeat)")
      ->required()
      ->check(CLI::ExistingFile);
  auto* cv = app.add_subcommand("cv", "leave-one-site-out comparison");
  input(cv);
  modelling(cv);
  CLI::Option* cv_origin = origin_opt;
  cv->add_option("--comparators", o.comparators, "comparator labels")->delimiter(',')->capture_default_str();
  cv->add_option("--mode", o.mode, "refit, warm or fast")->capture_default_str();
  cv->add_option("--baseline", o.baseline, "baseline dataset for the cross-run p column")
      ->check(CLI::ExistingFile);
  auto* des = app.add_subcommand("design", "greedy maximin design of new simulator runs");
  des->add_option("--existing", o.existing, "CSV with lat,lon columns")->check(CLI::ExistingFile);
  des->add_option("--n", o.n_new, "new points")->required();
  des->add_option("--box", o.box, "lat_min,lat_max,lon_min,lon_max")->capture_default_str();
  des->add_option("--polygon", o.polygon, "polygon mask, one lat,lon vertex per line")->check(CLI::ExistingFile);
  des->add_option("--candidates", o.candidates, "candidate pool size (0: 100 per point)")->capture_default_str();
  des->add_option("--rejections", o.rejections, "simulated unanswered points")->capture_default_str();
  des->add_option("--grid-step", o.grid_step, "snapping grid step in degrees")->capture_default_str();
  des->add_option("--layer", o.layer, "emit a point query for this layer id");
  des->add_option("--start", o.start, "query start timestamp");
  des->add_option("--end", o.end, "query end timestamp");
  origin_opt = nullptr;
  auto* grid = app.add_subcommand("predict-grid", "comparator predictions over a lat/lon grid");
  input(grid);
  modelling(grid);
  CLI::Option* grid_origin = origin_opt;
  grid->add_option("--comparator", o.comparator, "comparator label")->capture_default_str();
  grid->add_option("--box", o.box, "lat_min,lat_max,lon_min,lon_max")->capture_default_str();
  grid->add_option("--resolution", o.resolution, "grid step in degrees")->capture_default_str();
  grid->add_option("--days", o.days, "day or first:last, daily comparators");
  auto* top = app.add_subcommand("top-regions", "sunniest-region fractions from a year of daily grids");
  top->add_option("--grid-dir", o.grid_dir, "directory of grid_day_DDD.csv files")
      ->required()
      ->check(CLI::ExistingDirectory);
  auto* pq = app.add_subcommand("pairs-query", "point query document for a list of locations");
  pq->add_option("--layer", o.layer, "layer id")->required();
  pq->add_option("--start", o.start, "start timestamp")->required();
  pq->add_option("--end", o.end, "end timestamp")->required();
  pq->add_option("--points", o.points, "CSV with lat,lon columns")->required()->check(CLI::ExistingFile);
  pq->add_flag("--snap", o.snap, "snap coordinates to the grid");
  pq->add_option("--grid-step", o.grid_step, "snapping grid step in degrees")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (agg->parsed()) return cmd_aggregate(g, o, out);
    if (fit->parsed()) return cmd_fit(g, o, out);
    if (cal->parsed()) return cmd_calibrate(g, o, out);
    if (fuse->parsed()) return cmd_fuse(g, o, out);
    if (cv->parsed()) return cmd_cv(g, o, cv_origin, out);
    if (des->parsed()) return cmd_design(g, o, out);
    if (grid->parsed()) return cmd_predict_grid(g, o, grid_origin, out);
    if (top->parsed()) return cmd_top_regions(g, o, out);
    if (pq->parsed()) return cmd_pairs_query(g, o, out);
  } catch (const InfeasibleComparatorError& e) {
    err << "error: infeasible comparator: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace solgp::cli

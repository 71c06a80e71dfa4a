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

#include "solgp/data.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "solgp/csv.hpp"
#include "solgp/error.hpp"

namespace solgp {

std::string_view to_string(SourceId s) {
  switch (s) {
    case SourceId::Field:
      return "field";
    case SourceId::SimA:
      return "simA";
    case SourceId::SimB:
      return "simB";
  }
  return "?";
}

std::optional<SourceId> parse_source(std::string_view s) {
  for (auto id : kAllSources)
    if (to_string(id) == s) return id;
  return std::nullopt;
}

namespace {

std::size_t source_index(SourceId s) { return static_cast<std::size_t>(s); }

const std::vector<DayValue>& empty_series() {
  static const std::vector<DayValue> e;
  return e;
}

}  // namespace

Dataset::Dataset(std::vector<Site> sites, Table observations)
    : sites_(std::move(sites)), obs_(std::move(observations)) {
  if (sites_.empty()) throw EmptyInputError("dataset has no sites");
  series_.resize(sites_.size());
  bool first = true;
  for (const auto& [key, val] : obs_) {
    if (key.site >= sites_.size())
      throw ShapeError("observation refers to unknown site index " + std::to_string(key.site));
    if (key.day < 0) throw ShapeError("negative day index");
    if (first) {
      day_range_ = {key.day, key.day};
      first = false;
    } else {
      day_range_.first = std::min(day_range_.first, key.day);
      day_range_.second = std::max(day_range_.second, key.day);
    }
    if (val) {
      series_[key.site][source_index(key.source)].push_back({key.day, *val});
    } else {
      ++missing_;
    }
  }
  // map order is (site, day, source), so each series is already sorted by day
}

std::optional<double> Dataset::value(std::size_t site, int day, SourceId source) const {
  const auto it = obs_.find(ObsKey{site, day, source});
  if (it == obs_.end()) return std::nullopt;
  return it->second;
}

const std::vector<DayValue>& Dataset::series(std::size_t site, SourceId source) const {
  if (site >= series_.size()) return empty_series();
  return series_[site][source_index(source)];
}

std::optional<std::size_t> Dataset::find_site(std::string_view id) const {
  for (std::size_t i = 0; i < sites_.size(); ++i)
    if (sites_[i].id == id) return i;
  return std::nullopt;
}

namespace {

struct Builder {
  std::vector<Site> sites;
  std::unordered_map<std::string, std::size_t> index;
  Dataset::Table table;

  std::size_t site(std::string_view id, double lat, double lon, std::size_t line) {
    if (lat < -90.0 || lat > 90.0) throw ParseError(line, "latitude out of range");
    if (lon < -180.0 || lon > 180.0) throw ParseError(line, "longitude out of range");
    const std::string key(id);
    const auto it = index.find(key);
    if (it != index.end()) {
      const Site& s = sites[it->second];
      if (s.lat != lat || s.lon != lon)
        throw ParseError(line, "site '" + key + "' appears with two different locations");
      return it->second;
    }
    sites.push_back(Site{key, lat, lon});
    index.emplace(key, sites.size() - 1);
    return sites.size() - 1;
  }

  void add(std::size_t site, int day, SourceId src, std::optional<double> v, std::size_t line) {
    const auto [it, inserted] = table.emplace(ObsKey{site, day, src}, v);
    if (!inserted) {
      throw DuplicateKeyError("line " + std::to_string(line) + ": duplicate observation for site '" +
                              sites[site].id + "', day " + std::to_string(day) + ", source " +
                              std::string(to_string(src)));
    }
  }
};

std::optional<double> parse_value(std::string_view field, std::size_t line) {
  if (csv::trim(field).empty()) return std::nullopt;
  auto v = csv::to_double(field);
  if (!v) throw ParseError(line, "malformed value '" + std::string(field) + "'");
  return v;
}

}  // namespace

Dataset parse_csv(std::istream& in, CsvSchema schema) {
  std::string line;
  std::size_t line_no = 0;
  if (!csv::next_record(in, line, line_no)) throw EmptyInputError("csv input is empty");

  const std::string long_header = "site_id,lat,lon,day,source,value";
  const std::string wide_header = "site_id,lat,lon,day,field,simA,simB";
  {
    std::string h;
    for (auto f : csv::split(line)) {
      if (!h.empty()) h += ',';
      h += f;
    }
    const auto& want = schema == CsvSchema::Long ? long_header : wide_header;
    if (h != want) throw ParseError(line_no, "expected header '" + want + "', got '" + h + "'");
  }

  const std::size_t ncols = schema == CsvSchema::Long ? 6 : 7;
  Builder b;
  while (csv::next_record(in, line, line_no)) {
    const auto f = csv::split(line);
    if (f.size() != ncols)
      throw ParseError(line_no, "expected " + std::to_string(ncols) + " fields, got " +
                                    std::to_string(f.size()));
    if (f[0].empty()) throw ParseError(line_no, "empty site_id");
    const auto lat = csv::to_double(f[1]);
    const auto lon = csv::to_double(f[2]);
    const auto day = csv::to_int(f[3]);
    if (!lat || !lon) throw ParseError(line_no, "malformed coordinates");
    if (!day || *day < 0 || *day > 1'000'000) throw ParseError(line_no, "malformed day index");
    const std::size_t s = b.site(f[0], *lat, *lon, line_no);
    const int d = static_cast<int>(*day);
    if (schema == CsvSchema::Long) {
      const auto src = parse_source(f[4]);
      if (!src) throw ParseError(line_no, "unknown source '" + std::string(f[4]) + "'");
      b.add(s, d, *src, parse_value(f[5], line_no), line_no);
    } else {
      for (std::size_t k = 0; k < 3; ++k)
        b.add(s, d, kAllSources[k], parse_value(f[4 + k], line_no), line_no);
    }
  }
  if (b.sites.empty()) throw EmptyInputError("csv input has no data rows");
  return Dataset(std::move(b.sites), std::move(b.table));
}

Dataset load_csv(const std::filesystem::path& path, CsvSchema schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return parse_csv(in, schema);
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  if (!csv::next_record(in, line, line_no)) throw EmptyInputError("csv input is empty");
  const auto f = csv::split(line);
  const bool wide = f.size() == 7 && f[4] == "field";
  in.clear();
  in.seekg(0);
  return parse_csv(in, wide ? CsvSchema::Wide : CsvSchema::Long);
}

void write_csv(std::ostream& out, const Dataset& ds, CsvSchema schema) {
  const auto& sites = ds.sites();
  auto prefix = [&](std::size_t s, int day) {
    out << sites[s].id << ',' << csv::format_double(sites[s].lat) << ','
        << csv::format_double(sites[s].lon) << ',' << day << ',';
  };
  if (schema == CsvSchema::Long) {
    out << "site_id,lat,lon,day,source,value\n";
    for (const auto& [k, v] : ds.observations()) {
      prefix(k.site, k.day);
      out << to_string(k.source) << ',';
      if (v) out << csv::format_double(*v);
      out << '\n';
    }
    return;
  }
  out << "site_id,lat,lon,day,field,simA,simB\n";
  const auto& obs = ds.observations();
  for (auto it = obs.begin(); it != obs.end();) {
    const std::size_t s = it->first.site;
    const int day = it->first.day;
    std::array<std::optional<double>, 3> row{};
    for (; it != obs.end() && it->first.site == s && it->first.day == day; ++it)
      row[static_cast<std::size_t>(it->first.source)] = it->second;
    prefix(s, day);
    for (std::size_t k = 0; k < 3; ++k) {
      if (row[k]) out << csv::format_double(*row[k]);
      out << (k < 2 ? ',' : '\n');
    }
  }
}

Dataset merge(const Dataset& a, const Dataset& b) {
  std::vector<Site> sites = a.sites();
  std::vector<std::size_t> remap(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    const Site& s = b.sites()[i];
    const auto found = a.find_site(s.id);
    if (found) {
      if (!(sites[*found] == s))
        throw ShapeError("merge: site '" + s.id + "' has different locations in the two datasets");
      remap[i] = *found;
    } else {
      sites.push_back(s);
      remap[i] = sites.size() - 1;
    }
  }
  Dataset::Table table = a.observations();
  for (const auto& [k, v] : b.observations()) {
    const ObsKey nk{remap[k.site], k.day, k.source};
    if (!table.emplace(nk, v).second)
      throw DuplicateKeyError("merge: duplicate observation for site '" + sites[nk.site].id +
                              "', day " + std::to_string(k.day));
  }
  return Dataset(std::move(sites), std::move(table));
}

Aggregate aggregate_time(const Dataset& ds, SourceId source) {
  if (ds.observed_count() == 0) throw EmptyInputError("aggregate_time: dataset has no observed values");
  Aggregate out;
  out.source = source;
  for (std::size_t s = 0; s < ds.size(); ++s) {
    const auto& series = ds.series(s, source);
    if (series.empty()) {
      out.excluded.push_back(s);
      continue;
    }
    double sum = 0.0;
    for (const auto& dv : series) sum += dv.value;
    out.means.push_back(SiteMean{s, sum / static_cast<double>(series.size()), series.size()});
  }
  return out;
}

Dataset residual_series(const Dataset& ds, SourceId source, const FittedValues& fitted) {
  Dataset::Table table;
  for (const auto& [k, v] : ds.observations()) {
    if (k.source != source) continue;
    if (!v) {
      table.emplace(k, std::nullopt);
      continue;
    }
    const auto it = fitted.find(SiteDay{k.site, k.day});
    if (it == fitted.end())
      throw CoverageError("residual_series: no fitted value for site '" + ds.sites()[k.site].id +
                          "', day " + std::to_string(k.day));
    table.emplace(k, *v - it->second);
  }
  return Dataset(ds.sites(), std::move(table));
}

std::vector<QualityIssue> quality_report(const Dataset& ds) {
  std::vector<QualityIssue> out;
  const auto [first, last] = ds.day_range();
  const double span = static_cast<double>(last - first + 1);
  for (auto src : kAllSources) {
    bool source_present = false;
    for (std::size_t s = 0; s < ds.size() && !source_present; ++s)
      source_present = !ds.series(s, src).empty();
    if (!source_present) continue;
    const std::string src_name(to_string(src));
    for (std::size_t s = 0; s < ds.size(); ++s) {
      const auto& id = ds.sites()[s].id;
      const auto& series = ds.series(s, src);
      if (series.empty()) {
        out.push_back({id, src_name, "excluded", "no observed values"});
        continue;
      }
      std::size_t zeros = 0, negatives = 0;
      double sum = 0.0;
      for (const auto& dv : series) {
        zeros += dv.value == 0.0;
        negatives += dv.value < 0.0;
        sum += dv.value;
      }
      if (zeros > 0) out.push_back({id, src_name, "zero_values", std::to_string(zeros) + " days"});
      if (negatives > 0)
        out.push_back({id, src_name, "negative_values", std::to_string(negatives) + " days"});
      if (sum == 0.0) out.push_back({id, src_name, "zero_aggregate", "mean is 0"});
      const double missing_frac = 1.0 - static_cast<double>(series.size()) / span;
      if (missing_frac > 0.0) {
        std::ostringstream d;
        d << "missing fraction " << missing_frac;
        out.push_back({id, src_name, "missing_days", d.str()});
      }
    }
  }
  return out;
}

void write_quality_csv(std::ostream& out, const std::vector<QualityIssue>& issues) {
  out << "site_id,source,issue,detail\n";
  for (const auto& q : issues)
    out << q.site_id << ',' << q.source << ',' << q.issue << ',' << q.detail << '\n';
}

}  // namespace solgp

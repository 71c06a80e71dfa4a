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

#include <array>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace solgp {

// The three co-located sources. SimA and SimB play interchangeable
// roles (two independent numerical weather simulators).
enum class SourceId { Field, SimA, SimB };

inline constexpr std::array<SourceId, 3> kAllSources{SourceId::Field, SourceId::SimA,
                                                     SourceId::SimB};

std::string_view to_string(SourceId s);
// Accepts "field", "simA", "simB".
std::optional<SourceId> parse_source(std::string_view s);

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
  friend bool operator==(const LatLon&, const LatLon&) = default;
};

struct Site {
  std::string id;
  double lat = 0.0;
  double lon = 0.0;

  LatLon location() const { return {lat, lon}; }
  friend bool operator==(const Site&, const Site&) = default;
};

struct ObsKey {
  std::size_t site = 0;  // index into Dataset::sites()
  int day = 0;
  SourceId source = SourceId::Field;
  friend auto operator<=>(const ObsKey&, const ObsKey&) = default;
};

struct SiteDay {
  std::size_t site = 0;
  int day = 0;
  friend auto operator<=>(const SiteDay&, const SiteDay&) = default;
};

struct DayValue {
  int day = 0;
  double value = 0.0;
  friend bool operator==(const DayValue&, const DayValue&) = default;
};

// Sparse table of per-site, per-day observations for each source. A cell
// that is present but std::nullopt is a recorded missing observation;
// an absent cell was never part of the input. Immutable after
// construction.
class Dataset {
 public:
  using Table = std::map<ObsKey, std::optional<double>>;

  // Throws EmptyInputError if there are no sites, ShapeError on an
  // observation referring to an unknown site or a negative day.
  Dataset(std::vector<Site> sites, Table observations);

  const std::vector<Site>& sites() const noexcept { return sites_; }
  std::size_t size() const noexcept { return sites_.size(); }
  const Table& observations() const noexcept { return obs_; }

  // Observed value; nullopt for missing or absent cells.
  std::optional<double> value(std::size_t site, int day, SourceId source) const;

  // Non-missing (day, value) pairs, ordered by day.
  const std::vector<DayValue>& series(std::size_t site, SourceId source) const;

  std::optional<std::size_t> find_site(std::string_view id) const;

  // [first_day, last_day] over all cells; {0, -1} when there are none.
  std::pair<int, int> day_range() const noexcept { return day_range_; }
  std::size_t missing_count() const noexcept { return missing_; }
  std::size_t observed_count() const noexcept { return obs_.size() - missing_; }

 private:
  std::vector<Site> sites_;
  Table obs_;
  std::vector<std::array<std::vector<DayValue>, 3>> series_;
  std::pair<int, int> day_range_{0, -1};
  std::size_t missing_ = 0;
};

enum class CsvSchema { Long, Wide };

// Long:  site_id,lat,lon,day,source,value
// Wide:  site_id,lat,lon,day,field,simA,simB
// Empty value cells are missing observations. Lines starting with '#'
// (artifact metadata) and blank lines are skipped.
Dataset parse_csv(std::istream& in, CsvSchema schema);
Dataset load_csv(const std::filesystem::path& path, CsvSchema schema);
// Picks the schema from the header line.
Dataset load_csv(const std::filesystem::path& path);

void write_csv(std::ostream& out, const Dataset& ds, CsvSchema schema);

// Union of two datasets over disjoint cells. Sites are matched by id and
// must agree on location; a cell present in both is a DuplicateKeyError.
Dataset merge(const Dataset& a, const Dataset& b);

struct SiteMean {
  std::size_t site = 0;
  double mean = 0.0;
  std::size_t n_obs = 0;
};

struct Aggregate {
  SourceId source = SourceId::Field;
  std::vector<SiteMean> means;        // sites with at least one observation
  std::vector<std::size_t> excluded;  // sites with none
};

// Per-site mean over non-missing days. Throws EmptyInputError when the
// dataset holds no observed values at all.
Aggregate aggregate_time(const Dataset& ds, SourceId source);

using FittedValues = std::map<SiteDay, double>;

// Observed `source` cells minus fitted values, as a dataset holding only
// `source` cells with the original missingness pattern. Throws
// CoverageError naming the first observed cell without a fitted value.
Dataset residual_series(const Dataset& ds, SourceId source, const FittedValues& fitted);

struct QualityIssue {
  std::string site_id;
  std::string source;
  std::string issue;
  std::string detail;
};

// Flags (never removes): sites excluded from aggregation, zero or
// negative daily values, zero aggregate means, and missing-day fractions.
std::vector<QualityIssue> quality_report(const Dataset& ds);
void write_quality_csv(std::ostream& out, const std::vector<QualityIssue>& issues);

}  // namespace solgp

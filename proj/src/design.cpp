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

#include "solgp/design.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>

#include "json.hpp"
#include "solgp/csv.hpp"
#include "solgp/error.hpp"
#include "solgp/simd/kernels.hpp"

namespace solgp {

std::int64_t grid_index(double x, double origin, double step) {
  return static_cast<std::int64_t>(std::floor((x - origin) / step + 0.5));
}

LatLon snap_to_grid(LatLon p, const GridSpec& g) {
  return {g.origin.lat + static_cast<double>(grid_index(p.lat, g.origin.lat, g.step)) * g.step,
          g.origin.lon + static_cast<double>(grid_index(p.lon, g.origin.lon, g.step)) * g.step};
}

bool Polygon::contains(LatLon p) const {
  bool inside = false;
  const std::size_t n = vertices.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = vertices[i];
    const auto& b = vertices[j];
    if ((a.lat > p.lat) != (b.lat > p.lat) &&
        p.lon < (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon)
      inside = !inside;
  }
  return inside;
}

Box Polygon::bounds() const {
  Box b{INFINITY, -INFINITY, INFINITY, -INFINITY};
  for (const auto& v : vertices) {
    b.lat_min = std::min(b.lat_min, v.lat);
    b.lat_max = std::max(b.lat_max, v.lat);
    b.lon_min = std::min(b.lon_min, v.lon);
    b.lon_max = std::max(b.lon_max, v.lon);
  }
  return b;
}

Polygon load_polygon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open polygon file " + path.string());
  Polygon poly;
  std::string line;
  std::size_t line_no = 0;
  while (csv::next_record(in, line, line_no)) {
    const auto f = csv::split(line);
    if (f.size() != 2) throw ParseError(line_no, "polygon vertex needs lat,lon");
    const auto lat = csv::to_double(csv::trim(f[0]));
    const auto lon = csv::to_double(csv::trim(f[1]));
    if (!lat || !lon) {
      if (poly.vertices.empty() && line_no == 1) continue;  // header
      throw ParseError(line_no, "bad polygon vertex");
    }
    poly.vertices.push_back({*lat, *lon});
  }
  if (poly.vertices.size() < 3) throw EmptyInputError("polygon needs at least 3 vertices");
  return poly;
}

double min_distance(const std::vector<LatLon>& points, const std::vector<LatLon>& existing) {
  double best = INFINITY;
  auto d2 = [](LatLon a, LatLon b) { return (a.lat - b.lat) * (a.lat - b.lat) + (a.lon - b.lon) * (a.lon - b.lon); };
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) best = std::min(best, d2(points[i], points[j]));
    for (const auto& e : existing) best = std::min(best, d2(points[i], e));
  }
  return std::sqrt(best);
}

namespace {

Box region_bounds(const Region& r) {
  if (const auto* b = std::get_if<Box>(&r)) return *b;
  return std::get<Polygon>(r).bounds();
}

bool in_region(const Region& r, LatLon p) {
  if (std::holds_alternative<Box>(r)) return true;
  return std::get<Polygon>(r).contains(p);
}

}  // namespace

std::vector<LatLon> sample_candidates(const Region& region, std::size_t count, std::uint64_t seed) {
  const Box b = region_bounds(region);
  if (!(b.lat_max > b.lat_min) || !(b.lon_max > b.lon_min)) throw InfeasibleDesignError("design region is empty");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ulat(b.lat_min, b.lat_max), ulon(b.lon_min, b.lon_max);
  std::vector<LatLon> out;
  out.reserve(count);
  const std::size_t max_tries = 1000 * count + 1000;
  for (std::size_t t = 0; out.size() < count && t < max_tries; ++t) {
    const double lat = ulat(rng);
    const double lon = ulon(rng);
    if (in_region(region, {lat, lon})) out.push_back({lat, lon});
  }
  if (out.size() < count)
    throw InfeasibleDesignError("design region yielded " + std::to_string(out.size()) + " of " +
                                std::to_string(count) + " candidates");
  return out;
}

std::vector<std::size_t> maximin_select(std::size_t n_new, const std::vector<LatLon>& existing,
                                        const std::vector<LatLon>& candidates, LatLon centre) {
  if (n_new == 0) throw InfeasibleDesignError("design size must be at least 1");
  if (n_new > candidates.size())
    throw InfeasibleDesignError("candidate pool exhausted: " + std::to_string(n_new) + " points requested from " +
                                std::to_string(candidates.size()) + " candidates");
  const std::size_t m = candidates.size();
  std::vector<double> lat(m), lon(m), best(m, INFINITY);
  for (std::size_t i = 0; i < m; ++i) {
    lat[i] = candidates[i].lat;
    lon[i] = candidates[i].lon;
  }
  for (const auto& e : existing) simd::min_sqdist2_update(lat, lon, e.lat, e.lon, best);

  std::vector<bool> taken(m, false);
  std::vector<std::size_t> picks;
  if (existing.empty()) {
    // anchor on the candidate farthest from the centre
    std::vector<double> d(m, INFINITY);
    simd::min_sqdist2_update(lat, lon, centre.lat, centre.lon, d);
    std::size_t first = 0;
    for (std::size_t i = 1; i < m; ++i)
      if (d[i] > d[first]) first = i;
    picks.push_back(first);
    taken[first] = true;
    simd::min_sqdist2_update(lat, lon, lat[first], lon[first], best);
  }
  while (picks.size() < n_new) {
    std::size_t arg = m;
    for (std::size_t i = 0; i < m; ++i)
      if (!taken[i] && (arg == m || best[i] > best[arg])) arg = i;
    picks.push_back(arg);
    taken[arg] = true;
    simd::min_sqdist2_update(lat, lon, lat[arg], lon[arg], best);
  }
  return picks;
}

DesignResult maximin_design(std::size_t n_new, const std::vector<LatLon>& existing, const Region& region,
                            const DesignOptions& opts) {
  if (n_new == 0) throw InfeasibleDesignError("design size must be at least 1");
  const std::size_t count = opts.candidates ? opts.candidates : 100 * n_new;
  const auto cand = sample_candidates(region, count, opts.seed);
  const Box b = region_bounds(region);
  const LatLon centre{0.5 * (b.lat_min + b.lat_max), 0.5 * (b.lon_min + b.lon_max)};
  const auto picks = maximin_select(n_new, existing, cand, centre);
  DesignResult out;
  for (auto i : picks) out.points.push_back(snap_to_grid(cand[i], opts.grid));
  out.achieved_min_dist = min_distance(out.points, existing);
  return out;
}

std::vector<std::size_t> simulate_rejections(std::size_t n_points, std::size_t count, std::uint64_t seed) {
  if (count > n_points) throw ShapeError("cannot reject more points than the design holds");
  std::vector<std::size_t> idx(n_points);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // partial Fisher-Yates
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> u(i, n_points - 1);
    std::swap(idx[i], idx[u(rng)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double bilinear_interpolate(const Corners& c, LatLon p, LatLon cell_origin, const GridSpec& g) {
  constexpr double tol = 1e-9;
  const double u = (p.lat - cell_origin.lat) / g.step;
  const double v = (p.lon - cell_origin.lon) / g.step;
  if (!(u >= -tol && u <= 1.0 + tol && v >= -tol && v <= 1.0 + tol))
    throw OutOfCellError("point (" + csv::format_double(p.lat) + ", " + csv::format_double(p.lon) +
                         ") lies outside the cell at (" + csv::format_double(cell_origin.lat) + ", " +
                         csv::format_double(cell_origin.lon) + ")");
  const double uu = std::clamp(u, 0.0, 1.0), vv = std::clamp(v, 0.0, 1.0);
  return (1 - uu) * (1 - vv) * c[0] + (1 - uu) * vv * c[1] + uu * (1 - vv) * c[2] + uu * vv * c[3];
}

GridValues load_grid_values(std::istream& in, const GridSpec& g) {
  GridValues out;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (csv::next_record(in, line, line_no)) {
    const auto f = csv::split(line);
    if (first) {
      first = false;
      if (f.size() == 3 && csv::trim(f[0]) == "lat") continue;
    }
    if (f.size() != 3) throw ParseError(line_no, "grid row needs lat,lon,value");
    const auto lat = csv::to_double(csv::trim(f[0]));
    const auto lon = csv::to_double(csv::trim(f[1]));
    const auto val = csv::to_double(csv::trim(f[2]));
    if (!lat || !lon || !val) throw ParseError(line_no, "bad number in grid row");
    const auto key = std::make_pair(grid_index(*lat, g.origin.lat, g.step), grid_index(*lon, g.origin.lon, g.step));
    if (!out.emplace(key, *val).second) throw DuplicateKeyError("line " + std::to_string(line_no) + ": duplicate grid node");
  }
  return out;
}

GridValues load_grid_values(const std::filesystem::path& path, const GridSpec& g) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open grid file " + path.string());
  return load_grid_values(in, g);
}

std::array<std::pair<std::int64_t, std::int64_t>, 4> enclosing_cell(LatLon p, const GridSpec& g) {
  auto lower = [&](double x, double o) {
    // an on-grid coordinate (after rounding) is its own lower node
    const std::int64_t near = grid_index(x, o, g.step);
    if (std::abs((x - o) / g.step - static_cast<double>(near)) < 1e-9) return near;
    return static_cast<std::int64_t>(std::floor((x - o) / g.step));
  };
  const auto i = lower(p.lat, g.origin.lat);
  const auto j = lower(p.lon, g.origin.lon);
  return {{{i, j}, {i, j + 1}, {i + 1, j}, {i + 1, j + 1}}};
}

double interpolate_offgrid(LatLon p, const GridValues& values, const GridSpec& g) {
  const auto cell = enclosing_cell(p, g);
  const LatLon o{g.origin.lat + static_cast<double>(cell[0].first) * g.step,
                 g.origin.lon + static_cast<double>(cell[0].second) * g.step};
  const double u = std::clamp((p.lat - o.lat) / g.step, 0.0, 1.0);
  const double v = std::clamp((p.lon - o.lon) / g.step, 0.0, 1.0);
  const std::array<double, 4> w{(1 - u) * (1 - v), (1 - u) * v, u * (1 - v), u * v};
  Corners c{};
  std::string missing;
  for (std::size_t k = 0; k < 4; ++k) {
    if (w[k] == 0.0) continue;
    const auto it = values.find(cell[k]);
    if (it == values.end()) {
      if (!missing.empty()) missing += "; ";
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f,%.6f", g.origin.lat + static_cast<double>(cell[k].first) * g.step,
                    g.origin.lon + static_cast<double>(cell[k].second) * g.step);
      missing += buf;
      continue;
    }
    c[k] = it->second;
  }
  if (!missing.empty()) throw CoverageError("grid values missing at " + missing);
  return bilinear_interpolate(c, p, o, g);
}

namespace {

bool valid_timestamp(const std::string& s) {
  static const std::regex re(R"(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z)");
  return std::regex_match(s, re);
}

void validate(const PairsQuery& q) {
  if (q.coords.empty()) throw EmptyInputError("query needs at least one coordinate");
  if (!valid_timestamp(q.start) || !valid_timestamp(q.end))
    throw Error("query timestamps must look like 2016-04-14T23:00:00Z");
  if (!(q.start < q.end)) throw Error("query interval start must precede its end");
}

}  // namespace

std::string build_pairs_query(const PairsQuery& q) {
  validate(q);
  using nlohmann::ordered_json;
  ordered_json coords = ordered_json::array();
  for (const auto& c : q.coords) {
    coords.push_back(c.lat);
    coords.push_back(c.lon);
  }
  ordered_json doc;
  doc["layers"] = ordered_json::array({ordered_json{{"id", q.layer_id}}});
  doc["temporal"]["intervals"] = ordered_json::array({ordered_json{{"start", q.start}, {"end", q.end}}});
  doc["spatial"]["type"] = "point";
  doc["spatial"]["coordinates"] = std::move(coords);
  return doc.dump();
}

PairsQuery parse_pairs_query(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("query document: ") + e.what());
  }
  PairsQuery q;
  try {
    q.layer_id = doc.at("layers").at(0).at("id").get<std::string>();
    const auto& iv = doc.at("temporal").at("intervals").at(0);
    q.start = iv.at("start").get<std::string>();
    q.end = iv.at("end").get<std::string>();
    if (doc.at("spatial").at("type").get<std::string>() != "point") throw ParseError(0, "only point queries");
    const auto& c = doc.at("spatial").at("coordinates");
    if (c.size() % 2 != 0) throw ParseError(0, "coordinates must be lat,lon pairs");
    for (std::size_t i = 0; i < c.size(); i += 2) q.coords.push_back({c[i].get<double>(), c[i + 1].get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("query document: ") + e.what());
  }
  validate(q);
  return q;
}

std::size_t grid_point_count(const Box& box, double resolution) {
  if (!(resolution > 0.0)) throw Error("grid resolution must be positive");
  const auto n = [&](double lo, double hi) {
    return static_cast<std::size_t>(std::floor((hi - lo) / resolution + 1e-9)) + 1;
  };
  return n(box.lat_min, box.lat_max) * n(box.lon_min, box.lon_max);
}

std::vector<LatLon> grid_points(const Box& box, double resolution) {
  const std::size_t total = grid_point_count(box, resolution);
  const auto nlat = static_cast<std::size_t>(std::floor((box.lat_max - box.lat_min) / resolution + 1e-9)) + 1;
  const std::size_t nlon = total / nlat;
  std::vector<LatLon> out;
  out.reserve(total);
  for (std::size_t i = 0; i < nlat; ++i)
    for (std::size_t j = 0; j < nlon; ++j)
      out.push_back({box.lat_min + static_cast<double>(i) * resolution,
                     box.lon_min + static_cast<double>(j) * resolution});
  return out;
}

}  // namespace solgp

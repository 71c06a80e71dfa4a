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
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "solgp/data.hpp"

namespace solgp {

// The PAIRS raster: 1e-6 * 2^15 degrees in both lat and lon.
inline constexpr double kPairsStep = 0.032768;

struct GridSpec {
  double step = kPairsStep;
  LatLon origin{0.0, 0.0};
};

// Integer grid index of the nearest node; ties go toward +infinity.
std::int64_t grid_index(double x, double origin, double step);
LatLon snap_to_grid(LatLon p, const GridSpec& g = {});

struct Box {
  double lat_min = 24.0;
  double lat_max = 50.0;
  double lon_min = -125.0;
  double lon_max = -66.0;
};
inline constexpr Box kConusBox{};

// Closed polygon in (lat, lon); the last vertex connects to the first.
struct Polygon {
  std::vector<LatLon> vertices;
  bool contains(LatLon p) const;
  Box bounds() const;
};

using Region = std::variant<Box, Polygon>;

// Reads a polygon mask: one "lat,lon" vertex per line.
Polygon load_polygon(const std::filesystem::path& path);

struct DesignOptions {
  std::size_t candidates = 0;  // 0: 100 * n_new
  std::uint64_t seed = 0;
  GridSpec grid;
};

struct DesignResult {
  std::vector<LatLon> points;  // snapped
  double achieved_min_dist = 0.0;
};

// Smallest distance among `points` and from `points` to `existing`, in
// degrees; +inf when there is no pair.
double min_distance(const std::vector<LatLon>& points, const std::vector<LatLon>& existing);

// Uniform candidates in the region (rejection sampling for polygons).
// Throws InfeasibleDesignError when the region yields none.
std::vector<LatLon> sample_candidates(const Region& region, std::size_t count, std::uint64_t seed);

// Greedy sequential maximin over sampled candidates, snapped afterwards.
// Without existing sites the first pick is the candidate farthest from
// the region centre. Ties go to the lowest candidate index. Throws
// InfeasibleDesignError when n_new exceeds the candidate pool.
DesignResult maximin_design(std::size_t n_new, const std::vector<LatLon>& existing, const Region& region,
                            const DesignOptions& opts = {});

// Same, over a supplied candidate list.
std::vector<std::size_t> maximin_select(std::size_t n_new, const std::vector<LatLon>& existing,
                                        const std::vector<LatLon>& candidates, LatLon centre);

// Indices (ascending) of `count` design points marked unanswered.
std::vector<std::size_t> simulate_rejections(std::size_t n_points, std::size_t count, std::uint64_t seed);

// Corner order: (lat0, lon0), (lat0, lon1), (lat1, lon0), (lat1, lon1).
using Corners = std::array<double, 4>;

// Bilinear value at p inside the cell whose lower-left node is
// cell_origin. Throws OutOfCellError outside the cell.
double bilinear_interpolate(const Corners& corners, LatLon p, LatLon cell_origin, const GridSpec& g = {});

// Grid node values keyed by (lat index, lon index).
using GridValues = std::map<std::pair<std::int64_t, std::int64_t>, double>;

// CSV lat,lon,value; coordinates are mapped to their nearest node.
GridValues load_grid_values(std::istream& in, const GridSpec& g = {});
GridValues load_grid_values(const std::filesystem::path& path, const GridSpec& g = {});

// Nodes of the cell enclosing p, in corner order.
std::array<std::pair<std::int64_t, std::int64_t>, 4> enclosing_cell(LatLon p, const GridSpec& g = {});

// Cell lookup plus bilinear interpolation. Corners with zero weight may
// be absent; otherwise throws CoverageError listing the missing nodes.
double interpolate_offgrid(LatLon p, const GridValues& values, const GridSpec& g = {});

struct PairsQuery {
  std::string layer_id;
  std::string start;  // ISO 8601, e.g. 2016-04-14T23:00:00Z
  std::string end;
  std::vector<LatLon> coords;
  friend bool operator==(const PairsQuery&, const PairsQuery&) = default;
};

// Point query document with coordinates as a flat lat,lon sequence.
// Throws EmptyInputError without coordinates and Error unless start < end.
std::string build_pairs_query(const PairsQuery& q);
PairsQuery parse_pairs_query(const std::string& doc);

// Regular lat/lon grid over a box, row-major from (lat_min, lon_min).
std::vector<LatLon> grid_points(const Box& box, double resolution);
std::size_t grid_point_count(const Box& box, double resolution);

}  // namespace solgp

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

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "solgp/data.hpp"
#include "solgp/gp.hpp"

namespace solgp::cli {

inline constexpr double kZ90 = 1.644854;

// Ordered key/value settings recorded in artifact headers.
using Settings = std::vector<std::pair<std::string, std::string>>;

std::uint64_t fnv1a(std::string_view s);
// 16 hex digits over command, seed and settings (never jobs or paths of
// outputs).
std::string config_hash(std::string_view command, std::uint64_t seed, const Settings& settings);

// Type-7 (linear interpolation) sample quantile. Throws EmptyInputError.
double quantile(std::vector<double> v, double q);

struct DayGrid {
  std::vector<LatLon> points;
  Prediction pred;
};

struct RegionFraction {
  LatLon point;
  double top_decile = 0.0;  // days with mean >= daily 90th percentile of means
  double confident = 0.0;   // mean >= upper quartile and 90% lower bound >= lower quartile
};

// Needs one grid per day of a full year (365), all over the same points;
// otherwise CoverageError. Quantiles are taken per day across the grid.
// A one-point grid is its own top decile and quartiles on every day.
std::vector<RegionFraction> top_regions(std::span<const DayGrid> days);

// Entry point of the solgp executable; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace solgp::cli

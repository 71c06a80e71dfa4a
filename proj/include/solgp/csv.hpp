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

#include <charconv>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace solgp::csv {

// Minimal CSV helpers: no quoting, ',' separated, as used by every file
// format in this project.

std::vector<std::string_view> split(std::string_view line);
std::string_view trim(std::string_view s);

// Strict full-field number parsing; nullopt on any trailing garbage.
std::optional<double> to_double(std::string_view s);
std::optional<long long> to_int(std::string_view s);

// Shortest representation that round-trips exactly.
std::string format_double(double v);

// Reads the next data line, skipping blank lines and '#' metadata lines.
// `line_no` is advanced for every physical line read.
bool next_record(std::istream& in, std::string& line, std::size_t& line_no);

}  // namespace solgp::csv

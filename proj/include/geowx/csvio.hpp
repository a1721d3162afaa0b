// include/geowx/csvio.hpp

// Copyright 2026 The geowx authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GEOWX_CSVIO_HPP_
#define GEOWX_CSVIO_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace geowx {

// Plain comma-separated tables: no quoting, no embedded commas. Lines
// starting with '#' are comments and are skipped, which is where tools
// in this project record the seed they ran with.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index for a header name; throws std::invalid_argument if absent.
  std::size_t col(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

// Parses a CSV already in memory (used by tests and loaders working on
// generated text).
CsvTable parse_csv(std::string_view text);

std::vector<std::string> split_fields(std::string_view line);

double parse_double(const std::string& s, const char* what);
std::int64_t parse_int(const std::string& s, const char* what);

// Shortest decimal form that round-trips a double exactly.
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace geowx

#endif  // GEOWX_CSVIO_HPP_

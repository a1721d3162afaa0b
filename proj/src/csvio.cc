// src/csvio.cc

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

#include "geowx/csvio.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace geowx {

std::size_t CsvTable::col(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw std::invalid_argument("missing CSV column: " + name);
}

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

CsvTable parse_csv(std::string_view text) {
  CsvTable table;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? std::string_view::npos
                                           : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    if (!have_header) {
      table.header = split_fields(line);
      have_header = true;
    } else {
      auto fields = split_fields(line);
      if (fields.size() != table.header.size()) {
        throw std::invalid_argument("CSV row has " +
                                    std::to_string(fields.size()) +
                                    " fields, header has " +
                                    std::to_string(table.header.size()));
      }
      table.rows.push_back(std::move(fields));
    }
  }
  if (!have_header) throw std::invalid_argument("CSV has no header row");
  return table;
}

CsvTable read_csv(const std::string& path) {
  return parse_csv(read_text_file(path));
}

double parse_double(const std::string& s, const char* what) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument(std::string("bad numeric field for ") + what +
                                ": '" + s + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& s, const char* what) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument(std::string("bad integer field for ") + what +
                                ": '" + s + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace geowx

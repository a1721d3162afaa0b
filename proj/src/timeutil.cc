// src/timeutil.cc

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

#include "geowx/timeutil.hpp"

#include <array>
#include <cstdio>
#include <stdexcept>

namespace geowx {

namespace {

bool is_leap(int y) { return y % 4 == 0 && (y % 100 != 0 || y % 400 == 0); }

int days_in_month(int y, int m) {
  static const std::array<int, 12> kDays = {31, 28, 31, 30, 31, 30,
                                            31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap(y)) return 29;
  return kDays[m - 1];
}

int parse_digits(std::string_view s, std::size_t pos, std::size_t n) {
  int v = 0;
  for (std::size_t i = 0; i < n; ++i) {
    char c = s[pos + i];
    if (c < '0' || c > '9') throw std::invalid_argument("bad digit");
    v = v * 10 + (c - '0');
  }
  return v;
}

}  // namespace

std::int64_t days_from_civil(int y, int m, int d) {
  // Howard Hinnant's algorithm, era-based.
  y -= m <= 2;
  std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  unsigned yoe = static_cast<unsigned>(y - era * 400);
  unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::int64_t civil_to_epoch(const CivilTime& ct) {
  return days_from_civil(ct.year, ct.month, ct.day) * 86400LL +
         ct.hour * 3600LL + ct.minute * 60LL + ct.second;
}

CivilTime epoch_to_civil(std::int64_t t) {
  std::int64_t days = t / 86400;
  std::int64_t rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  // Reverse of days_from_civil.
  days += 719468;
  std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
  unsigned doe = static_cast<unsigned>(days - era * 146097);
  unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  unsigned mp = (5 * doy + 2) / 153;
  unsigned d = doy - (153 * mp + 2) / 5 + 1;
  unsigned m = mp + (mp < 10 ? 3 : -9);
  y += m <= 2;

  CivilTime ct;
  ct.year = static_cast<int>(y);
  ct.month = static_cast<int>(m);
  ct.day = static_cast<int>(d);
  ct.hour = static_cast<int>(rem / 3600);
  ct.minute = static_cast<int>((rem % 3600) / 60);
  ct.second = static_cast<int>(rem % 60);
  return ct;
}

std::int64_t parse_iso8601_utc(std::string_view s) {
  // Expected form: YYYY-MM-DDTHH:MM:SSZ
  if (s.size() != 20 || s[4] != '-' || s[7] != '-' || s[10] != 'T' ||
      s[13] != ':' || s[16] != ':' || s[19] != 'Z') {
    throw std::invalid_argument("malformed UTC timestamp: " + std::string(s));
  }
  CivilTime ct;
  try {
    ct.year = parse_digits(s, 0, 4);
    ct.month = parse_digits(s, 5, 2);
    ct.day = parse_digits(s, 8, 2);
    ct.hour = parse_digits(s, 11, 2);
    ct.minute = parse_digits(s, 14, 2);
    ct.second = parse_digits(s, 17, 2);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("malformed UTC timestamp: " + std::string(s));
  }
  if (ct.month < 1 || ct.month > 12 || ct.day < 1 ||
      ct.day > days_in_month(ct.year, ct.month) || ct.hour > 23 ||
      ct.minute > 59 || ct.second > 59) {
    throw std::invalid_argument("out-of-range UTC timestamp: " +
                                std::string(s));
  }
  return civil_to_epoch(ct);
}

std::string format_iso8601_utc(std::int64_t t) {
  CivilTime ct = epoch_to_civil(t);
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", ct.year,
                ct.month, ct.day, ct.hour, ct.minute, ct.second);
  return buf;
}

std::string format_compact_utc(std::int64_t t) {
  CivilTime ct = epoch_to_civil(t);
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%04d%02d%02d_%02d%02d%02d", ct.year,
                ct.month, ct.day, ct.hour, ct.minute, ct.second);
  return buf;
}

}  // namespace geowx

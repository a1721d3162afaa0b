// include/geowx/timeutil.hpp

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

#ifndef GEOWX_TIMEUTIL_HPP_
#define GEOWX_TIMEUTIL_HPP_

#include <cstdint>
#include <string>
#include <string_view>

namespace geowx {

struct CivilTime {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31
  int hour = 0;
  int minute = 0;
  int second = 0;
};

// Days since 1970-01-01 for a proleptic Gregorian civil date.
std::int64_t days_from_civil(int year, int month, int day);

std::int64_t civil_to_epoch(const CivilTime& ct);
CivilTime epoch_to_civil(std::int64_t t);

// "YYYY-MM-DDTHH:MM:SSZ" <-> unix seconds. Parse throws
// std::invalid_argument on malformed input.
std::int64_t parse_iso8601_utc(std::string_view s);
std::string format_iso8601_utc(std::int64_t t);

// Compact timestamp used in clip filenames: "YYYYMMDD_HHMMSS".
std::string format_compact_utc(std::int64_t t);

}  // namespace geowx

#endif  // GEOWX_TIMEUTIL_HPP_

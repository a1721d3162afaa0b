// include/geowx/weather.hpp

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

#ifndef GEOWX_WEATHER_HPP_
#define GEOWX_WEATHER_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace geowx {

// Hourly gridded surface weather. Axes ascend; values are dense
// [time][lat][lon] with no gaps. Units: rainfall mm/hr, wind m/s,
// temperature degC, relative humidity percent.
struct WeatherGrid {
  std::vector<std::int64_t> time_axis;  // unix seconds, hourly
  std::vector<double> lat_axis;
  std::vector<double> lon_axis;
  std::vector<double> rainfall;
  std::vector<double> wind_speed;
  std::vector<double> temperature;
  std::vector<double> rel_humidity;

  std::size_t index(std::size_t t, std::size_t la, std::size_t lo) const {
    return (t * lat_axis.size() + la) * lon_axis.size() + lo;
  }
  std::size_t cell_hours() const {
    return time_axis.size() * lat_axis.size() * lon_axis.size();
  }
};

struct WeatherSample {
  double rainfall = 0.0;
  double wind_speed = 0.0;
  double temperature = 0.0;
  double rel_humidity = 0.0;
  int time_index = 0;
  int lat_index = 0;
  int lon_index = 0;
};

enum class WeatherVar { kRainfall, kWindSpeed };

struct BinarizationSpec {
  WeatherVar variable = WeatherVar::kRainfall;
  double threshold = 0.0;
};

// CSV columns: time_utc,lat,lon,rain_mmhr,wind_ms,temp_c,rh_pct with
// ISO-8601 hour timestamps. Rows may arrive in any order; the loader
// rejects gaps, duplicates, NaN cells, and out-of-range values with
// std::invalid_argument.
WeatherGrid load_grid(const std::string& path);
void save_grid(const std::string& path, const WeatherGrid& grid,
               std::optional<std::uint64_t> seed = std::nullopt);

// Nearest grid cell spatially (ties toward the lower index) and the
// hour containing t (hours are half-open [h, h+3600)). Throws
// std::invalid_argument outside coverage.
WeatherSample lookup(const WeatherGrid& grid, double lat, double lon,
                     std::int64_t t);

// Strict comparison: value > threshold.
bool binarize(const WeatherSample& sample, const BinarizationSpec& spec);

const char* weather_var_name(WeatherVar v);
WeatherVar weather_var_from_name(const std::string& name);

}  // namespace geowx

#endif  // GEOWX_WEATHER_HPP_

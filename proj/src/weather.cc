// src/weather.cc

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

#include "geowx/weather.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "geowx/csvio.hpp"
#include "geowx/timeutil.hpp"

namespace geowx {

namespace {

// Nearest index on an ascending axis, ties toward the lower index.
// Points further than half a grid step beyond either edge are out of
// coverage; a single-element axis accepts everything.
std::size_t nearest_index(const std::vector<double>& axis, double x,
                          const char* axis_name) {
  std::size_t n = axis.size();
  if (n == 1) return 0;

  double lo_edge = axis.front() - 0.5 * (axis[1] - axis[0]);
  double hi_edge = axis.back() + 0.5 * (axis[n - 1] - axis[n - 2]);
  if (x < lo_edge || x > hi_edge) {
    throw std::invalid_argument(std::string("coordinate outside ") +
                                axis_name + " coverage: " +
                                format_double(x));
  }

  auto it = std::lower_bound(axis.begin(), axis.end(), x);
  if (it == axis.begin()) return 0;
  if (it == axis.end()) return n - 1;
  std::size_t hi = static_cast<std::size_t>(it - axis.begin());
  std::size_t lo = hi - 1;
  double d_lo = x - axis[lo];
  double d_hi = axis[hi] - x;
  return d_lo <= d_hi ? lo : hi;
}

void check_value(double v, double lo, double hi, const char* what,
                 const std::string& row_key) {
  if (std::isnan(v)) {
    throw std::invalid_argument(std::string("NaN ") + what + " at " + row_key);
  }
  if (v < lo || v > hi) {
    throw std::invalid_argument(std::string(what) + " out of range at " +
                                row_key + ": " + format_double(v));
  }
}

}  // namespace

WeatherGrid load_grid(const std::string& path) {
  CsvTable table = read_csv(path);
  std::size_t c_time = table.col("time_utc");
  std::size_t c_lat = table.col("lat");
  std::size_t c_lon = table.col("lon");
  std::size_t c_rain = table.col("rain_mmhr");
  std::size_t c_wind = table.col("wind_ms");
  std::size_t c_temp = table.col("temp_c");
  std::size_t c_rh = table.col("rh_pct");

  if (table.rows.empty()) {
    throw std::invalid_argument(path + ": grid has no rows");
  }

  std::map<std::int64_t, std::size_t> times;
  std::map<double, std::size_t> lats, lons;
  struct Parsed {
    std::int64_t t;
    double lat, lon, rain, wind, temp, rh;
  };
  std::vector<Parsed> parsed;
  parsed.reserve(table.rows.size());

  for (const auto& row : table.rows) {
    Parsed p;
    p.t = parse_iso8601_utc(row[c_time]);
    p.lat = parse_double(row[c_lat], "lat");
    p.lon = parse_double(row[c_lon], "lon");
    p.rain = parse_double(row[c_rain], "rain_mmhr");
    p.wind = parse_double(row[c_wind], "wind_ms");
    p.temp = parse_double(row[c_temp], "temp_c");
    p.rh = parse_double(row[c_rh], "rh_pct");
    times.emplace(p.t, 0);
    lats.emplace(p.lat, 0);
    lons.emplace(p.lon, 0);
    parsed.push_back(p);
  }

  WeatherGrid grid;
  for (auto& [t, idx] : times) {
    idx = grid.time_axis.size();
    grid.time_axis.push_back(t);
  }
  for (auto& [v, idx] : lats) {
    idx = grid.lat_axis.size();
    grid.lat_axis.push_back(v);
  }
  for (auto& [v, idx] : lons) {
    idx = grid.lon_axis.size();
    grid.lon_axis.push_back(v);
  }

  for (std::size_t i = 0; i < grid.time_axis.size(); ++i) {
    if (grid.time_axis[i] % 3600 != 0) {
      throw std::invalid_argument(path + ": timestamp " +
                                  format_iso8601_utc(grid.time_axis[i]) +
                                  " is not hour-aligned");
    }
    if (i > 0 && grid.time_axis[i] - grid.time_axis[i - 1] != 3600) {
      throw std::invalid_argument(
          path + ": time axis has a gap between " +
          format_iso8601_utc(grid.time_axis[i - 1]) + " and " +
          format_iso8601_utc(grid.time_axis[i]));
    }
  }

  std::size_t n = grid.cell_hours();
  grid.rainfall.assign(n, 0.0);
  grid.wind_speed.assign(n, 0.0);
  grid.temperature.assign(n, 0.0);
  grid.rel_humidity.assign(n, 0.0);
  std::vector<char> seen(n, 0);

  for (const Parsed& p : parsed) {
    std::size_t idx =
        grid.index(times[p.t], lats[p.lat], lons[p.lon]);
    std::string key = format_iso8601_utc(p.t) + " (" + format_double(p.lat) +
                      ", " + format_double(p.lon) + ")";
    if (seen[idx]) {
      throw std::invalid_argument(path + ": duplicate cell-hour " + key);
    }
    seen[idx] = 1;
    check_value(p.rain, 0.0, 1e6, "rain_mmhr", key);
    check_value(p.wind, 0.0, 1e6, "wind_ms", key);
    check_value(p.temp, -274.0, 1e6, "temp_c", key);
    check_value(p.rh, 0.0, 100.0, "rh_pct", key);
    grid.rainfall[idx] = p.rain;
    grid.wind_speed[idx] = p.wind;
    grid.temperature[idx] = p.temp;
    grid.rel_humidity[idx] = p.rh;
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!seen[i]) {
      std::size_t lon_n = grid.lon_axis.size();
      std::size_t lat_n = grid.lat_axis.size();
      std::size_t t = i / (lat_n * lon_n);
      std::size_t la = (i / lon_n) % lat_n;
      std::size_t lo = i % lon_n;
      throw std::invalid_argument(
          path + ": missing cell-hour " +
          format_iso8601_utc(grid.time_axis[t]) + " (" +
          format_double(grid.lat_axis[la]) + ", " +
          format_double(grid.lon_axis[lo]) + ")");
    }
  }
  return grid;
}

void save_grid(const std::string& path, const WeatherGrid& grid,
               std::optional<std::uint64_t> seed) {
  std::ostringstream out;
  if (seed) out << "# seed=" << *seed << "\n";
  out << "time_utc,lat,lon,rain_mmhr,wind_ms,temp_c,rh_pct\n";
  for (std::size_t t = 0; t < grid.time_axis.size(); ++t) {
    for (std::size_t la = 0; la < grid.lat_axis.size(); ++la) {
      for (std::size_t lo = 0; lo < grid.lon_axis.size(); ++lo) {
        std::size_t i = grid.index(t, la, lo);
        out << format_iso8601_utc(grid.time_axis[t]) << ','
            << format_double(grid.lat_axis[la]) << ','
            << format_double(grid.lon_axis[lo]) << ','
            << format_double(grid.rainfall[i]) << ','
            << format_double(grid.wind_speed[i]) << ','
            << format_double(grid.temperature[i]) << ','
            << format_double(grid.rel_humidity[i]) << '\n';
      }
    }
  }
  write_text_file(path, out.str());
}

WeatherSample lookup(const WeatherGrid& grid, double lat, double lon,
                     std::int64_t t) {
  if (grid.time_axis.empty()) throw std::invalid_argument("empty grid");
  std::int64_t t0 = grid.time_axis.front();
  if (t < t0 || t >= grid.time_axis.back() + 3600) {
    throw std::invalid_argument("timestamp outside grid coverage: " +
                                format_iso8601_utc(t));
  }
  std::size_t ti = static_cast<std::size_t>((t - t0) / 3600);
  std::size_t la = nearest_index(grid.lat_axis, lat, "lat");
  std::size_t lo = nearest_index(grid.lon_axis, lon, "lon");
  std::size_t i = grid.index(ti, la, lo);

  WeatherSample s;
  s.rainfall = grid.rainfall[i];
  s.wind_speed = grid.wind_speed[i];
  s.temperature = grid.temperature[i];
  s.rel_humidity = grid.rel_humidity[i];
  s.time_index = static_cast<int>(ti);
  s.lat_index = static_cast<int>(la);
  s.lon_index = static_cast<int>(lo);
  return s;
}

bool binarize(const WeatherSample& sample, const BinarizationSpec& spec) {
  double v = spec.variable == WeatherVar::kRainfall ? sample.rainfall
                                                    : sample.wind_speed;
  return v > spec.threshold;
}

const char* weather_var_name(WeatherVar v) {
  return v == WeatherVar::kRainfall ? "rain" : "wind";
}

WeatherVar weather_var_from_name(const std::string& name) {
  if (name == "rain") return WeatherVar::kRainfall;
  if (name == "wind") return WeatherVar::kWindSpeed;
  throw std::invalid_argument("unknown weather variable: " + name +
                              " (want rain or wind)");
}

}  // namespace geowx

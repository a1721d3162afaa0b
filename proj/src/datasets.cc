// src/datasets.cc

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

#include "geowx/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "geowx/csvio.hpp"
#include "geowx/eval.hpp"
#include "geowx/rng.hpp"
#include "geowx/timeutil.hpp"

namespace geowx {

namespace {

std::optional<std::size_t> find_col(const CsvTable& table,
                                    const std::string& name) {
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (table.header[i] == name) return i;
  }
  return std::nullopt;
}

std::optional<bool> parse_opt_bool(const std::string& s, const char* what) {
  if (s.empty()) return std::nullopt;
  if (s == "0") return false;
  if (s == "1") return true;
  throw std::invalid_argument(std::string("bad 0/1 field for ") + what +
                              ": '" + s + "'");
}

std::string opt_bool_field(const std::optional<bool>& b) {
  if (!b) return "";
  return *b ? "1" : "0";
}

// Seed comment lines look like "# seed=12345".
std::optional<std::uint64_t> find_seed_comment(const std::string& text) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string line = text.substr(
        pos, eol == std::string::npos ? std::string::npos : eol - pos);
    pos = eol == std::string::npos ? text.size() : eol + 1;
    if (line.rfind("# seed=", 0) == 0) {
      return static_cast<std::uint64_t>(
          parse_int(line.substr(7), "seed comment"));
    }
    if (!line.empty() && line[0] != '#') break;
  }
  return std::nullopt;
}

}  // namespace

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  CsvTable table = read_csv(path);
  std::size_t c_id = table.col("clip_id");
  std::size_t c_site = table.col("site_id");
  std::size_t c_time = table.col("start_time_utc");
  std::size_t c_wav = table.col("wav_path");
  std::size_t c_lat = table.col("lat");
  std::size_t c_lon = table.col("lon");
  auto c_rain = find_col(table, "rain_strong");
  auto c_wind = find_col(table, "wind_strong");

  std::vector<ManifestEntry> entries;
  entries.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    ManifestEntry e;
    e.clip_id = row[c_id];
    e.site_id = row[c_site];
    e.start_time = parse_iso8601_utc(row[c_time]);
    e.wav_path = row[c_wav];
    e.lat = parse_double(row[c_lat], "lat");
    e.lon = parse_double(row[c_lon], "lon");
    if (c_rain) e.rain_strong = parse_opt_bool(row[*c_rain], "rain_strong");
    if (c_wind) e.wind_strong = parse_opt_bool(row[*c_wind], "wind_strong");
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_manifest(const std::string& path,
                   const std::vector<ManifestEntry>& entries,
                   std::optional<std::uint64_t> seed) {
  bool any_strong = false;
  for (const auto& e : entries) {
    if (e.rain_strong || e.wind_strong) any_strong = true;
  }
  std::ostringstream out;
  if (seed) out << "# seed=" << *seed << "\n";
  out << "clip_id,site_id,start_time_utc,wav_path,lat,lon";
  if (any_strong) out << ",rain_strong,wind_strong";
  out << "\n";
  for (const auto& e : entries) {
    out << e.clip_id << ',' << e.site_id << ','
        << format_iso8601_utc(e.start_time) << ',' << e.wav_path << ','
        << format_double(e.lat) << ',' << format_double(e.lon);
    if (any_strong) {
      out << ',' << opt_bool_field(e.rain_strong) << ','
          << opt_bool_field(e.wind_strong);
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

LabeledDataset build_dataset(const std::vector<ManifestEntry>& entries,
                             const WeatherGrid& grid) {
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.clip_id).second) {
      throw std::invalid_argument("duplicate clip_id: " + e.clip_id);
    }
  }

  LabeledDataset ds;
  for (const auto& e : entries) {
    try {
      WeatherSample weak = lookup(grid, e.lat, e.lon, e.start_time);
      LabeledClip c;
      c.clip_id = e.clip_id;
      c.site_id = e.site_id;
      c.start_time = e.start_time;
      c.wav_path = e.wav_path;
      c.lat = e.lat;
      c.lon = e.lon;
      c.weak = weak;
      c.rain_strong = e.rain_strong;
      c.wind_strong = e.wind_strong;
      ds.clips.push_back(std::move(c));
    } catch (const std::invalid_argument& ex) {
      ds.rejects.push_back({e.clip_id, ex.what()});
    }
  }
  return ds;
}

std::vector<LabeledClip> load_labeled(const std::string& path) {
  CsvTable table = read_csv(path);
  std::size_t c_id = table.col("clip_id");
  std::size_t c_site = table.col("site_id");
  std::size_t c_time = table.col("start_time_utc");
  std::size_t c_wav = table.col("wav_path");
  std::size_t c_lat = table.col("lat");
  std::size_t c_lon = table.col("lon");
  std::size_t c_rain = table.col("rain_mmhr");
  std::size_t c_wind = table.col("wind_ms");
  std::size_t c_temp = table.col("temp_c");
  std::size_t c_rh = table.col("rh_pct");
  auto c_rs = find_col(table, "rain_strong");
  auto c_ws = find_col(table, "wind_strong");

  std::vector<LabeledClip> clips;
  clips.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    LabeledClip c;
    c.clip_id = row[c_id];
    c.site_id = row[c_site];
    c.start_time = parse_iso8601_utc(row[c_time]);
    c.wav_path = row[c_wav];
    c.lat = parse_double(row[c_lat], "lat");
    c.lon = parse_double(row[c_lon], "lon");
    c.weak.rainfall = parse_double(row[c_rain], "rain_mmhr");
    c.weak.wind_speed = parse_double(row[c_wind], "wind_ms");
    c.weak.temperature = parse_double(row[c_temp], "temp_c");
    c.weak.rel_humidity = parse_double(row[c_rh], "rh_pct");
    if (c_rs) c.rain_strong = parse_opt_bool(row[*c_rs], "rain_strong");
    if (c_ws) c.wind_strong = parse_opt_bool(row[*c_ws], "wind_strong");
    clips.push_back(std::move(c));
  }
  return clips;
}

void save_labeled(const std::string& path,
                  const std::vector<LabeledClip>& clips) {
  bool any_strong = false;
  for (const auto& c : clips) {
    if (c.rain_strong || c.wind_strong) any_strong = true;
  }
  std::ostringstream out;
  out << "clip_id,site_id,start_time_utc,wav_path,lat,lon,"
         "rain_mmhr,wind_ms,temp_c,rh_pct";
  if (any_strong) out << ",rain_strong,wind_strong";
  out << "\n";
  for (const auto& c : clips) {
    out << c.clip_id << ',' << c.site_id << ','
        << format_iso8601_utc(c.start_time) << ',' << c.wav_path << ','
        << format_double(c.lat) << ',' << format_double(c.lon) << ','
        << format_double(c.weak.rainfall) << ','
        << format_double(c.weak.wind_speed) << ','
        << format_double(c.weak.temperature) << ','
        << format_double(c.weak.rel_humidity);
    if (any_strong) {
      out << ',' << opt_bool_field(c.rain_strong) << ','
          << opt_bool_field(c.wind_strong);
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

const char* partition_name(Partition p) {
  switch (p) {
    case Partition::kTrain: return "train";
    case Partition::kVal: return "val";
    case Partition::kTest: return "test";
  }
  throw std::invalid_argument("bad partition value");
}

Partition partition_from_name(const std::string& name) {
  if (name == "train") return Partition::kTrain;
  if (name == "val") return Partition::kVal;
  if (name == "test") return Partition::kTest;
  throw std::invalid_argument("unknown partition: " + name);
}

SplitSpec site_exclusive_split(const std::vector<LabeledClip>& clips,
                               const std::array<double, 3>& ratios,
                               std::uint64_t seed) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (ratios[0] <= 0 || ratios[1] <= 0 || ratios[2] <= 0 ||
      std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument(
        "split ratios must be positive and sum to 1");
  }
  if (clips.empty()) throw std::invalid_argument("no clips to split");

  std::map<std::string, std::size_t> site_counts;
  for (const auto& c : clips) ++site_counts[c.site_id];
  if (site_counts.size() < 3) {
    throw std::invalid_argument(
        "site-exclusive split needs at least 3 sites, have " +
        std::to_string(site_counts.size()));
  }

  std::vector<std::string> sites;
  sites.reserve(site_counts.size());
  for (const auto& [site, n] : site_counts) sites.push_back(site);

  Rng rng(Rng::derive(seed, {0x73706c6974ULL}));  // "split" stream
  rng.shuffle(sites);

  double total = static_cast<double>(clips.size());
  std::array<double, 3> assigned = {0, 0, 0};
  SplitSpec split;
  split.seed = seed;

  for (std::size_t i = 0; i < sites.size(); ++i) {
    std::size_t p;
    if (i < 3) {
      p = i;  // one site per partition up front so none is empty
    } else {
      p = 0;
      double best = ratios[0] - assigned[0] / total;
      for (std::size_t q = 1; q < 3; ++q) {
        double deficit = ratios[q] - assigned[q] / total;
        if (deficit > best) {
          best = deficit;
          p = q;
        }
      }
    }
    split.assignment[sites[i]] = static_cast<Partition>(p);
    assigned[p] += static_cast<double>(site_counts[sites[i]]);
  }
  return split;
}

std::vector<std::size_t> partition_indices(
    const std::vector<LabeledClip>& clips, const SplitSpec& split,
    Partition p) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    auto it = split.assignment.find(clips[i].site_id);
    if (it == split.assignment.end()) {
      throw std::invalid_argument("site missing from split: " +
                                  clips[i].site_id);
    }
    if (it->second == p) idx.push_back(i);
  }
  return idx;
}

SplitSpec load_split(const std::string& path) {
  std::string text = read_text_file(path);
  CsvTable table = parse_csv(text);
  std::size_t c_site = table.col("site_id");
  std::size_t c_part = table.col("partition");

  SplitSpec split;
  if (auto seed = find_seed_comment(text)) split.seed = *seed;
  for (const auto& row : table.rows) {
    if (!split.assignment
             .emplace(row[c_site], partition_from_name(row[c_part]))
             .second) {
      throw std::invalid_argument("duplicate site in split: " + row[c_site]);
    }
  }
  return split;
}

void save_split(const std::string& path, const SplitSpec& split) {
  std::ostringstream out;
  out << "# seed=" << split.seed << "\n";
  out << "site_id,partition\n";
  for (const auto& [site, p] : split.assignment) {
    out << site << ',' << partition_name(p) << '\n';
  }
  write_text_file(path, out.str());
}

SweepResult threshold_sweep(const std::vector<double>& values,
                            const std::vector<bool>& labels, double step) {
  if (values.size() != labels.size() || values.empty()) {
    throw std::invalid_argument(
        "threshold_sweep: size mismatch or empty input");
  }
  if (step <= 0.0) throw std::invalid_argument("threshold step must be > 0");
  bool any_pos = false;
  for (bool l : labels) any_pos = any_pos || l;
  if (!any_pos) {
    throw std::invalid_argument("threshold_sweep: no positive labels");
  }

  double max_v = *std::max_element(values.begin(), values.end());
  long n_steps =
      max_v <= 0.0 ? 0
                   : static_cast<long>(std::floor(max_v / step + 1e-6));

  SweepResult best;
  best.best_threshold = 0.0;
  best.train_f1 = -1.0;
  for (long k = 0; k <= n_steps; ++k) {
    double tau = static_cast<double>(k) * step;
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      bool pred = values[i] > tau;
      if (pred && labels[i]) ++tp;
      else if (pred && !labels[i]) ++fp;
      else if (!pred && labels[i]) ++fn;
    }
    long denom = 2 * tp + fp + fn;
    double f1 = denom == 0
                    ? 0.0
                    : 2.0 * static_cast<double>(tp) /
                          static_cast<double>(denom);
    if (f1 > best.train_f1) {
      best.train_f1 = f1;
      best.best_threshold = tau;
    }
  }
  return best;
}

BaselineResult baseline_evaluate(const SweepResult& sweep,
                                 const std::vector<double>& test_values,
                                 const std::vector<bool>& test_labels) {
  if (test_values.size() != test_labels.size() || test_values.empty()) {
    throw std::invalid_argument(
        "baseline_evaluate: size mismatch or empty input");
  }
  std::vector<bool> preds(test_values.size());
  for (std::size_t i = 0; i < test_values.size(); ++i) {
    preds[i] = test_values[i] > sweep.best_threshold;
  }

  BaselineResult r;
  r.best_threshold = sweep.best_threshold;
  r.train_f1 = sweep.train_f1;
  r.test_f1 = f1_score(preds, test_labels);
  r.test_auc = auc_score(test_values, test_labels);
  return r;
}

}  // namespace geowx

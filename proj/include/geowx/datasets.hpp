// include/geowx/datasets.hpp

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

#ifndef GEOWX_DATASETS_HPP_
#define GEOWX_DATASETS_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geowx/weather.hpp"

namespace geowx {

// One row of a clip manifest. Strong labels are optional reference
// annotations carried alongside the weak pipeline.
struct ManifestEntry {
  std::string clip_id;
  std::string site_id;
  std::int64_t start_time = 0;
  std::string wav_path;
  double lat = 0.0;
  double lon = 0.0;
  std::optional<bool> rain_strong;
  std::optional<bool> wind_strong;
};

// CSV columns: clip_id,site_id,start_time_utc,wav_path,lat,lon and
// optionally rain_strong,wind_strong (0/1).
std::vector<ManifestEntry> load_manifest(const std::string& path);
void save_manifest(const std::string& path,
                   const std::vector<ManifestEntry>& entries,
                   std::optional<std::uint64_t> seed = std::nullopt);

// A clip joined with the weather cell-hour containing its start.
struct LabeledClip {
  std::string clip_id;
  std::string site_id;
  std::int64_t start_time = 0;
  std::string wav_path;
  double lat = 0.0;
  double lon = 0.0;
  WeatherSample weak;
  std::optional<bool> rain_strong;
  std::optional<bool> wind_strong;
};

struct RejectedClip {
  std::string clip_id;
  std::string reason;
};

struct LabeledDataset {
  std::vector<LabeledClip> clips;
  std::vector<RejectedClip> rejects;
};

// Joins each manifest entry to its grid cell-hour; entries outside grid
// coverage land in rejects with the reason. Duplicate clip_ids are a
// hard error.
LabeledDataset build_dataset(const std::vector<ManifestEntry>& entries,
                             const WeatherGrid& grid);

// Labeled-clip CSV bundling the manifest columns with the weak weather
// values (rain_mmhr,wind_ms,temp_c,rh_pct).
std::vector<LabeledClip> load_labeled(const std::string& path);
void save_labeled(const std::string& path,
                  const std::vector<LabeledClip>& clips);

enum class Partition { kTrain = 0, kVal = 1, kTest = 2 };

const char* partition_name(Partition p);
Partition partition_from_name(const std::string& name);

struct SplitSpec {
  std::map<std::string, Partition> assignment;  // site_id -> partition
  std::uint64_t seed = 0;
};

// Assigns whole sites to train/val/test so no site spans partitions.
// Sites are shuffled by the seeded generator; the first three seed one
// partition each (so none is empty), the rest go greedily to the
// partition furthest below its clip-count ratio. Requires >= 3 sites
// and positive ratios summing to 1.
SplitSpec site_exclusive_split(const std::vector<LabeledClip>& clips,
                               const std::array<double, 3>& ratios,
                               std::uint64_t seed);

std::vector<std::size_t> partition_indices(
    const std::vector<LabeledClip>& clips, const SplitSpec& split,
    Partition p);

// CSV columns: site_id,partition.
SplitSpec load_split(const std::string& path);
void save_split(const std::string& path, const SplitSpec& split);

struct SweepResult {
  double best_threshold = 0.0;
  double train_f1 = 0.0;
};

// Scans thresholds 0, step, 2*step, ... up to max(values); predictor is
// value > threshold. Returns the smallest threshold attaining the best
// F1. Requires at least one positive label.
SweepResult threshold_sweep(const std::vector<double>& values,
                            const std::vector<bool>& labels,
                            double step = 0.001);

struct BaselineResult {
  double best_threshold = 0.0;
  double train_f1 = 0.0;
  double test_f1 = 0.0;
  double test_auc = 0.0;
};

BaselineResult baseline_evaluate(const SweepResult& sweep,
                                 const std::vector<double>& test_values,
                                 const std::vector<bool>& test_labels);

}  // namespace geowx

#endif  // GEOWX_DATASETS_HPP_

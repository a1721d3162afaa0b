// include/geowx/synth.hpp

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

#ifndef GEOWX_SYNTH_HPP_
#define GEOWX_SYNTH_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "geowx/audio_io.hpp"
#include "geowx/datasets.hpp"
#include "geowx/rng.hpp"
#include "geowx/weather.hpp"

namespace geowx {

// How hourly cell means degrade relative to the per-clip truth.
struct WeakErrorModel {
  // Rain falls only inside a random sub-hour window, but the hourly
  // value reports the whole-hour mean.
  bool temporal_smear = true;
  // Multiplicative gaussian noise on every hourly value.
  double sigma_rel = 0.2;
  // Chance a dry hour reports a spurious drizzle of up to 0.1 mm/hr.
  double light_rain_fp_rate = 0.1;
};

struct ScenarioConfig {
  int n_sites = 8;
  int hours = 24;
  int clips_per_hour = 8;
  int sample_rate = 8000;
  int clip_len_s = 10;

  double rain_hour_prob = 0.35;
  double rain_rate_min = 0.3;  // mm/hr while raining
  double rain_rate_max = 4.0;
  double wind_base_min = 0.5;  // per-site mean wind, m/s
  double wind_base_max = 6.0;
  double wind_event_threshold = 3.0;  // truth label: wind above this

  WeakErrorModel error_model;
  std::uint64_t seed = 0;

  std::int64_t start_time = 1559347200;  // 2019-06-01T00:00:00Z
  double base_lat = 65.0;
  double lat_step = 0.25;
  double lon = -147.0;
};

// What was actually in the air during one clip.
struct ClipTruth {
  bool rain = false;
  double rain_mmhr = 0.0;
  bool wind = false;
  double wind_ms = 0.0;
};

struct SynthCorpus {
  std::vector<AudioClip> clips;
  std::vector<ClipTruth> truth;          // parallel to clips
  std::vector<ManifestEntry> manifest;   // parallel; strong = truth bools
  WeatherGrid weak_grid;
};

// Renders one clip: band-shaped noise for rain (high band, RMS scaling
// with sqrt(rate)) and wind (low band, RMS scaling with speed^1.5) over
// a fixed tonal background, with atmospheric absorption for (temp, rh)
// applied over a 0.05 km virtual distance. Deterministic in the rng
// state; output never clips.
AudioClip synth_clip(double rain_mmhr, double wind_ms, double temp_c,
                     double rh_pct, Rng& rng, int sample_rate = 8000,
                     int clip_len_s = 10, std::string site_id = "",
                     std::int64_t start_time = 0);

// Builds the full desk-scale corpus: per-site wind regimes, per-hour
// rain windows, per-clip audio, the degraded hourly grid, and a manifest
// carrying the per-clip truth as strong labels.
SynthCorpus synth_corpus(const ScenarioConfig& cfg);

// Writes wavs/, manifest.csv, and grid.csv under out_dir.
void write_corpus(const SynthCorpus& corpus, const std::string& out_dir,
                  std::uint64_t seed);

}  // namespace geowx

#endif  // GEOWX_SYNTH_HPP_

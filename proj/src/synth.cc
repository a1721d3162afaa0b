// src/synth.cc

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

#include "geowx/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <stdexcept>

#include "geowx/attenuation.hpp"
#include "geowx/fft.hpp"

namespace geowx {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Component levels (time-domain RMS in full-scale units).
constexpr double kRainGain = 0.05;       // * sqrt(rain mm/hr)
constexpr double kWindGain = 0.004;      // * wind^1.5
constexpr double kFloorRms = 0.0015;     // broadband background
constexpr double kVirtualDistanceKm = 0.05;

constexpr std::uint64_t kSiteStream = 0x73697465;   // per-site draws
constexpr std::uint64_t kHourStream = 0x686f7572;   // per-hour draws
constexpr std::uint64_t kClipStream = 0x636c6970;   // per-clip audio

struct Tone {
  double freq_hz;
  double amp;
};
constexpr Tone kTones[] = {{150.0, 0.006}, {440.0, 0.004}};

// Rain band: silence below 800 Hz, cosine ramp to full level at 1200 Hz.
double rain_band(double f) {
  if (f < 800.0) return 0.0;
  if (f >= 1200.0) return 1.0;
  return 0.5 * (1.0 - std::cos(kPi * (f - 800.0) / 400.0));
}

// Wind band: full level below 300 Hz, cosine ramp to silence at 500 Hz.
double wind_band(double f) {
  if (f <= 300.0) return 1.0;
  if (f > 500.0) return 0.0;
  return 0.5 * (1.0 + std::cos(kPi * (f - 300.0) / 200.0));
}

// Fills bins 1..M/2-1 with band-shaped complex gaussian noise and scales
// the whole half-spectrum to the target time-domain RMS (Parseval).
void add_shaped_noise(std::vector<std::complex<double>>& half, int m,
                      int sample_rate, double (*band)(double),
                      double target_rms, Rng& rng) {
  if (target_rms <= 0.0) return;
  int half_n = m / 2;
  std::vector<std::complex<double>> comp(half_n + 1, {0.0, 0.0});
  double energy2 = 0.0;  // 2 * sum |S_k|^2 over k = 1..M/2-1
  for (int k = 1; k < half_n; ++k) {
    double f = static_cast<double>(k) * sample_rate / m;
    double env = band(f);
    if (env <= 0.0) continue;
    double re = env * rng.gaussian();
    double im = env * rng.gaussian();
    comp[k] = {re, im};
    energy2 += 2.0 * (re * re + im * im);
  }
  if (energy2 <= 0.0) return;
  // rms = sqrt(sum_full |S_k|^2) / M for a zero-DC hermitian spectrum
  double rms = std::sqrt(energy2) / static_cast<double>(m);
  double scale = target_rms / rms;
  for (int k = 1; k < half_n; ++k) half[k] += scale * comp[k];
}

double flat_band(double) { return 1.0; }

}  // namespace

AudioClip synth_clip(double rain_mmhr, double wind_ms, double temp_c,
                     double rh_pct, Rng& rng, int sample_rate, int clip_len_s,
                     std::string site_id, std::int64_t start_time) {
  if (rain_mmhr < 0.0 || wind_ms < 0.0) {
    throw std::invalid_argument("rain and wind must be >= 0");
  }
  if (sample_rate < 4000) {
    throw std::invalid_argument(
        "synthesis needs sample_rate >= 4000 so the rain band exists");
  }
  if (clip_len_s < 1) throw std::invalid_argument("clip_len_s must be >= 1");

  int n = sample_rate * clip_len_s;
  int m = next_pow2(n);
  std::vector<std::complex<double>> half(m / 2 + 1, {0.0, 0.0});

  // Fixed draw order: rain, wind, background floor.
  add_shaped_noise(half, m, sample_rate, rain_band,
                   kRainGain * std::sqrt(rain_mmhr), rng);
  add_shaped_noise(half, m, sample_rate, wind_band,
                   kWindGain * std::pow(wind_ms, 1.5), rng);
  add_shaped_noise(half, m, sample_rate, flat_band, kFloorRms, rng);

  for (const Tone& tone : kTones) {
    int k = static_cast<int>(std::lround(tone.freq_hz * m / sample_rate));
    if (k >= 1 && k < m / 2) {
      half[k] += std::complex<double>(tone.amp * m / 2.0, 0.0);
    }
  }

  // Propagation loss between source and microphone.
  AtmosphereState atm;
  atm.temperature_c = temp_c;
  atm.rel_humidity_pct = rh_pct;
  for (int k = 1; k <= m / 2; ++k) {
    double f = static_cast<double>(k) * sample_rate / m;
    double drop_db = absorption_db_per_km(f, atm) * kVirtualDistanceKm;
    half[k] *= std::pow(10.0, -drop_db / 20.0);
  }

  std::vector<std::complex<double>> full(m);
  full[0] = half[0];
  full[m / 2] = {half[m / 2].real(), 0.0};
  for (int k = 1; k < m / 2; ++k) {
    full[k] = half[k];
    full[m - k] = std::conj(half[k]);
  }
  fft_inplace(full, true);

  double peak = 0.0;
  for (int i = 0; i < n; ++i) peak = std::max(peak, std::abs(full[i].real()));
  double rescale = peak > 0.999 ? 0.999 / peak : 1.0;

  std::vector<std::int16_t> samples(n);
  for (int i = 0; i < n; ++i) {
    double v = full[i].real() * rescale * 32767.0;
    samples[i] = static_cast<std::int16_t>(
        std::clamp(std::lround(v), -32768L, 32767L));
  }
  return make_clip(std::move(samples), sample_rate, std::move(site_id),
                   start_time);
}

SynthCorpus synth_corpus(const ScenarioConfig& cfg) {
  if (cfg.n_sites < 1 || cfg.hours < 1 || cfg.clips_per_hour < 1) {
    throw std::invalid_argument("corpus dimensions must be >= 1");
  }
  if (cfg.clips_per_hour * cfg.clip_len_s > 3600) {
    throw std::invalid_argument("clips do not fit in an hour");
  }
  if (cfg.rain_rate_min <= 0.0 || cfg.rain_rate_max < cfg.rain_rate_min) {
    throw std::invalid_argument("bad rain rate range");
  }
  if (cfg.start_time % 3600 != 0) {
    throw std::invalid_argument("start_time must be on an hour boundary");
  }

  struct HourState {
    bool raining = false;
    double rate = 0.0;        // mm/hr while the window is active
    double win_start_s = 0.0;
    double win_len_s = 3600.0;
    double wind_ms = 0.0;
    double temp_c = 0.0;
    double rh_pct = 0.0;
  };

  SynthCorpus corpus;
  corpus.weak_grid.lon_axis = {cfg.lon};
  for (int s = 0; s < cfg.n_sites; ++s) {
    corpus.weak_grid.lat_axis.push_back(cfg.base_lat + s * cfg.lat_step);
  }
  for (int h = 0; h < cfg.hours; ++h) {
    corpus.weak_grid.time_axis.push_back(cfg.start_time + 3600LL * h);
  }
  std::size_t n_cells = corpus.weak_grid.cell_hours();
  corpus.weak_grid.rainfall.assign(n_cells, 0.0);
  corpus.weak_grid.wind_speed.assign(n_cells, 0.0);
  corpus.weak_grid.temperature.assign(n_cells, 0.0);
  corpus.weak_grid.rel_humidity.assign(n_cells, 0.0);

  std::vector<std::vector<HourState>> hours(
      static_cast<std::size_t>(cfg.n_sites));

  for (int s = 0; s < cfg.n_sites; ++s) {
    Rng site_rng(Rng::derive(cfg.seed,
                             {kSiteStream, static_cast<std::uint64_t>(s)}));
    double wind_base =
        site_rng.uniform(cfg.wind_base_min, cfg.wind_base_max);

    hours[s].resize(static_cast<std::size_t>(cfg.hours));
    for (int h = 0; h < cfg.hours; ++h) {
      Rng rng(Rng::derive(cfg.seed, {kHourStream,
                                     static_cast<std::uint64_t>(s),
                                     static_cast<std::uint64_t>(h)}));
      HourState& hs = hours[s][h];

      hs.raining = rng.uniform() < cfg.rain_hour_prob;
      if (hs.raining) {
        hs.rate = rng.uniform(cfg.rain_rate_min, cfg.rain_rate_max);
        if (cfg.error_model.temporal_smear) {
          hs.win_len_s = rng.uniform(900.0, 3300.0);
          hs.win_start_s = rng.uniform(0.0, 3600.0 - hs.win_len_s);
        }
      }
      hs.wind_ms = std::max(0.05, wind_base + rng.gaussian(0.0, 0.8));
      int tod = h % 24;
      hs.temp_c = 8.0 + 6.0 * std::sin(2.0 * kPi * tod / 24.0) +
                  rng.gaussian(0.0, 1.0);
      hs.rh_pct = std::clamp(75.0 + 15.0 * std::sin(2.0 * kPi *
                                                    ((tod + 8) % 24) / 24.0) +
                                 rng.gaussian(0.0, 4.0),
                             20.0, 100.0);

      // Hourly reported values: mean over the hour plus relative noise.
      double weak_rain = 0.0;
      if (hs.raining) {
        weak_rain = hs.rate * (hs.win_len_s / 3600.0) *
                    std::max(0.0, 1.0 + cfg.error_model.sigma_rel *
                                            rng.gaussian());
      } else if (rng.uniform() < cfg.error_model.light_rain_fp_rate) {
        weak_rain = rng.uniform(0.01, 0.1);
      }
      double weak_wind =
          hs.wind_ms *
          std::max(0.0, 1.0 + cfg.error_model.sigma_rel * rng.gaussian());
      double weak_temp = hs.temp_c + rng.gaussian(0.0, 0.5);
      double weak_rh = std::clamp(hs.rh_pct + rng.gaussian(0.0, 2.0), 0.0,
                                  100.0);

      std::size_t cell = corpus.weak_grid.index(
          static_cast<std::size_t>(h), static_cast<std::size_t>(s), 0);
      corpus.weak_grid.rainfall[cell] = weak_rain;
      corpus.weak_grid.wind_speed[cell] = weak_wind;
      corpus.weak_grid.temperature[cell] = weak_temp;
      corpus.weak_grid.rel_humidity[cell] = weak_rh;
    }
  }

  std::size_t n_clips = static_cast<std::size_t>(cfg.n_sites) * cfg.hours *
                        cfg.clips_per_hour;
  corpus.clips.resize(n_clips);
  corpus.truth.resize(n_clips);
  corpus.manifest.resize(n_clips);

#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(n_clips); ++i) {
    int c = static_cast<int>(i % cfg.clips_per_hour);
    int h = static_cast<int>((i / cfg.clips_per_hour) % cfg.hours);
    int s = static_cast<int>(i / (static_cast<long>(cfg.clips_per_hour) *
                                  cfg.hours));
    const HourState& hs = hours[s][h];

    // Clip starts spread evenly through the hour; the clip's start
    // second decides whether it sits in the rain window, matching how
    // clips are assigned to hours downstream.
    double off_s = (c + 0.5) * 3600.0 / cfg.clips_per_hour;
    std::int64_t t = cfg.start_time + 3600LL * h +
                     static_cast<std::int64_t>(off_s);
    bool in_window = hs.raining && off_s >= hs.win_start_s &&
                     off_s < hs.win_start_s + hs.win_len_s;

    ClipTruth truth;
    truth.rain = in_window;
    truth.rain_mmhr = in_window ? hs.rate : 0.0;
    truth.wind = hs.wind_ms > cfg.wind_event_threshold;
    truth.wind_ms = hs.wind_ms;

    char site_name[16];
    std::snprintf(site_name, sizeof(site_name), "S%02d", s);

    Rng clip_rng(Rng::derive(cfg.seed, {kClipStream,
                                        static_cast<std::uint64_t>(s),
                                        static_cast<std::uint64_t>(h),
                                        static_cast<std::uint64_t>(c)}));
    AudioClip clip = synth_clip(truth.rain_mmhr, hs.wind_ms, hs.temp_c,
                                hs.rh_pct, clip_rng, cfg.sample_rate,
                                cfg.clip_len_s, site_name, t);

    std::string filename = make_clip_filename(site_name, t);
    ManifestEntry entry;
    entry.clip_id = filename.substr(0, filename.size() - 4);
    entry.site_id = site_name;
    entry.start_time = t;
    entry.wav_path = "wavs/" + filename;
    entry.lat = cfg.base_lat + s * cfg.lat_step;
    entry.lon = cfg.lon;
    entry.rain_strong = truth.rain;
    entry.wind_strong = truth.wind;

    corpus.clips[i] = std::move(clip);
    corpus.truth[i] = truth;
    corpus.manifest[i] = std::move(entry);
  }
  return corpus;
}

void write_corpus(const SynthCorpus& corpus, const std::string& out_dir,
                  std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "wavs");
  for (std::size_t i = 0; i < corpus.clips.size(); ++i) {
    const AudioClip& clip = corpus.clips[i];
    fs::path wav = fs::path(out_dir) / corpus.manifest[i].wav_path;
    write_wav(wav.string(), clip.samples, clip.sample_rate);
  }
  save_manifest((fs::path(out_dir) / "manifest.csv").string(),
                corpus.manifest, seed);
  save_grid((fs::path(out_dir) / "grid.csv").string(), corpus.weak_grid,
            seed);
}

}  // namespace geowx

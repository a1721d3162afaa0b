// tests/test_attenuation.cc

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

#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "geowx/attenuation.hpp"
#include "geowx/audio_io.hpp"
#include "geowx/features.hpp"
#include "geowx/rng.hpp"

using namespace geowx;

TEST_CASE("absorption reproduces the published dB/km cells within 15%") {
  // freq, rel humidity, temperature, published value.
  struct Cell {
    double f, rh, t, want;
  };
  const Cell cells[] = {
      {125.0, 77.0, 0.3, 0.38},  {125.0, 77.0, 9.3, 0.39},
      {125.0, 91.0, 0.3, 0.36},  {125.0, 91.0, 9.3, 0.35},
      {4000.0, 77.0, 0.3, 50.30}, {4000.0, 77.0, 9.3, 31.08},
      {4000.0, 91.0, 0.3, 42.35}, {4000.0, 91.0, 9.3, 26.46},
  };
  for (const Cell& c : cells) {
    AtmosphereState atm{c.t, c.rh, 101.325};
    double got = absorption_db_per_km(c.f, atm);
    CHECK(std::fabs(got - c.want) / c.want < 0.15);
  }
}

TEST_CASE("absorption grows strictly with frequency in the audible band") {
  for (double t : {0.3, 9.3, 20.0}) {
    for (double rh : {40.0, 77.0, 91.0}) {
      AtmosphereState atm{t, rh, 101.325};
      double prev = absorption_db_per_km(125.0, atm);
      for (double f = 150.0; f <= 8000.0; f += 25.0) {
        double cur = absorption_db_per_km(f, atm);
        CHECK(cur > prev);
        prev = cur;
      }
    }
  }
}

TEST_CASE("absorption limits and validation") {
  AtmosphereState atm{20.0, 50.0, 101.325};
  CHECK(absorption_db_per_km(0.0, atm) == 0.0);
  CHECK(absorption_db_per_km(1000.0, atm) > 0.0);
  CHECK_THROWS_AS(absorption_db_per_km(-1.0, atm), std::invalid_argument);
  CHECK_THROWS_AS(absorption_db_per_km(1000.0, {20.0, -5.0, 101.325}),
                  std::invalid_argument);
  CHECK_THROWS_AS(absorption_db_per_km(1000.0, {20.0, 101.0, 101.325}),
                  std::invalid_argument);
  CHECK_THROWS_AS(absorption_db_per_km(1000.0, {20.0, 50.0, 0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(absorption_db_per_km(1000.0, {-280.0, 50.0, 101.325}),
                  std::invalid_argument);
}

namespace {

LogMelSpectrogram flat_spec(int n_mels, int n_frames, int sample_rate,
                            double value) {
  LogMelSpectrogram s;
  s.n_mels = n_mels;
  s.n_frames = n_frames;
  s.sample_rate = sample_rate;
  s.frame_hop_s = 0.023;
  s.floor_log = std::log(1e-10);
  s.values.assign(static_cast<std::size_t>(n_mels) * n_frames, value);
  return s;
}

}  // namespace

TEST_CASE("attenuation_filter subtracts distance-scaled absorption") {
  AtmosphereState atm{9.3, 77.0, 101.325};
  LogMelSpectrogram spec = flat_spec(40, 5, 8000, 1.0);

  LogMelSpectrogram same = attenuation_filter(spec, atm, 0.0);
  CHECK(same.values == spec.values);

  double d = 0.3;
  LogMelSpectrogram out = attenuation_filter(spec, atm, d);
  // Band centers are equally spaced in mel between 0 and sr/2; the
  // expected drop per band is alpha(center) * d in dB, times ln(10)/10
  // in natural-log units.
  double mel_max = hz_to_mel(8000.0 / 2.0);
  for (int b = 0; b < spec.n_mels; ++b) {
    double center = mel_to_hz((b + 1) * mel_max / (spec.n_mels + 1));
    double alpha = absorption_db_per_km(center, atm);
    double want = 1.0 - alpha * d * std::log(10.0) / 10.0;
    for (int t = 0; t < spec.n_frames; ++t) {
      CHECK(out.at(b, t) == doctest::Approx(want).epsilon(1e-12));
    }
  }

  // Higher bands lose more.
  CHECK(out.at(spec.n_mels - 1, 0) < out.at(0, 0));
}

TEST_CASE("attenuation_filter clamps at the spectrogram floor") {
  AtmosphereState atm{9.3, 77.0, 101.325};
  LogMelSpectrogram spec = flat_spec(16, 3, 8000, std::log(1e-10) + 0.01);
  LogMelSpectrogram out = attenuation_filter(spec, atm, 5.0);
  for (double v : out.values) CHECK(v == spec.floor_log);
}

TEST_CASE("attenuation_filter needs a sample rate and a distance") {
  AtmosphereState atm{9.3, 77.0, 101.325};
  LogMelSpectrogram spec = flat_spec(4, 2, 8000, 0.0);
  CHECK_THROWS_AS(attenuation_filter(spec, atm, -1.0), std::invalid_argument);
  spec.sample_rate = 0;
  CHECK_THROWS_AS(attenuation_filter(spec, atm, 1.0), std::invalid_argument);
}

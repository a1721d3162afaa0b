// src/attenuation.cc

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

#include "geowx/attenuation.hpp"

#include <cmath>
#include <stdexcept>

namespace geowx {

double absorption_db_per_km(double freq_hz, const AtmosphereState& atm) {
  if (freq_hz < 0.0) throw std::invalid_argument("frequency must be >= 0");
  if (atm.pressure_kpa <= 0.0) {
    throw std::invalid_argument("pressure must be > 0");
  }
  if (atm.rel_humidity_pct < 0.0 || atm.rel_humidity_pct > 100.0) {
    throw std::invalid_argument("relative humidity must be in [0, 100]");
  }

  const double T = atm.temperature_c + 273.15;
  if (T <= 0.0) throw std::invalid_argument("temperature below 0 K");
  const double T0 = 293.15;   // reference temperature, K
  const double T01 = 273.16;  // triple point, K
  const double pa = atm.pressure_kpa;
  const double pr = 101.325;

  // Saturation vapor pressure ratio, then molar concentration of water
  // vapor as a percentage.
  double psat_over_pr =
      std::pow(10.0, -6.8346 * std::pow(T01 / T, 1.261) + 4.6151);
  double h = atm.rel_humidity_pct * psat_over_pr * (pr / pa);

  // Relaxation frequencies of O2 and N2, Hz.
  double fr_o =
      (pa / pr) * (24.0 + 4.04e4 * h * (0.02 + h) / (0.391 + h));
  double fr_n = (pa / pr) * std::pow(T / T0, -0.5) *
                (9.0 + 280.0 * h *
                           std::exp(-4.170 * (std::pow(T / T0, -1.0 / 3.0) -
                                              1.0)));

  double f2 = freq_hz * freq_hz;
  double alpha_m =
      8.686 * f2 *
      (1.84e-11 * (pr / pa) * std::sqrt(T / T0) +
       std::pow(T / T0, -2.5) *
           (0.01275 * std::exp(-2239.1 / T) / (fr_o + f2 / fr_o) +
            0.1068 * std::exp(-3352.0 / T) / (fr_n + f2 / fr_n)));
  return 1000.0 * alpha_m;
}

LogMelSpectrogram attenuation_filter(LogMelSpectrogram spec,
                                     const AtmosphereState& atm,
                                     double distance_km) {
  if (distance_km < 0.0) throw std::invalid_argument("distance must be >= 0");
  if (spec.sample_rate <= 0) {
    throw std::invalid_argument(
        "spectrogram carries no sample rate; band frequencies unknown");
  }

  std::vector<double> centers = mel_center_freqs(spec.n_mels, spec.sample_rate);
  constexpr double kLn10Over10 = 0.23025850929940457;  // dB -> ln power
  for (int m = 0; m < spec.n_mels; ++m) {
    double drop = absorption_db_per_km(centers[m], atm) * distance_km *
                  kLn10Over10;
    for (int t = 0; t < spec.n_frames; ++t) {
      double& v = spec.at(m, t);
      v = std::max(spec.floor_log, v - drop);
    }
  }
  return spec;
}

}  // namespace geowx

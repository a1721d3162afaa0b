// include/geowx/attenuation.hpp

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

#ifndef GEOWX_ATTENUATION_HPP_
#define GEOWX_ATTENUATION_HPP_

#include "geowx/features.hpp"

namespace geowx {

struct AtmosphereState {
  double temperature_c = 20.0;
  double rel_humidity_pct = 50.0;
  double pressure_kpa = 101.325;
};

// Pure-tone atmospheric absorption in dB/km: classical losses plus the
// O2 and N2 vibrational relaxation terms, with relaxation frequencies
// driven by the water-vapor molar concentration.
double absorption_db_per_km(double freq_hz, const AtmosphereState& atm);

// Applies absorption over a propagation distance to a log-mel
// spectrogram, evaluating the curve at each band's center frequency.
// Values are clamped at the spectrogram floor; distance 0 is the
// identity.
LogMelSpectrogram attenuation_filter(LogMelSpectrogram spec,
                                     const AtmosphereState& atm,
                                     double distance_km);

}  // namespace geowx

#endif  // GEOWX_ATTENUATION_HPP_

// include/geowx/features.hpp

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

#ifndef GEOWX_FEATURES_HPP_
#define GEOWX_FEATURES_HPP_

#include <string>
#include <vector>

#include "geowx/audio_io.hpp"
#include "geowx/rng.hpp"

namespace geowx {

// Additive floor inside the log, i.e. values are ln(power + kLogEps) and
// the spectrogram floor is ln(kLogEps).
inline constexpr double kLogEps = 1e-10;

// Analysis frame geometry in seconds; sample counts are rounded per
// sample rate so the frame grid is rate independent.
struct StftConfig {
  double frame_len_s = 0.042;
  double frame_hop_s = 0.023;
};

// |FFT|^2 per frame. Row-major [n_bins][n_frames], bin k at frequency
// k * sample_rate / n_fft.
struct PowerSpectrogram {
  int n_bins = 0;
  int n_frames = 0;
  int n_fft = 0;
  int win = 0;
  int hop = 0;
  int sample_rate = 0;
  std::vector<double> values;

  double at(int bin, int frame) const { return values[static_cast<std::size_t>(bin) * n_frames + frame]; }
};

// Natural-log mel spectrogram, row-major [n_mels][n_frames].
struct LogMelSpectrogram {
  int n_mels = 0;
  int n_frames = 0;
  int sample_rate = 0;
  double frame_hop_s = 0.0;
  double floor_log = 0.0;
  std::vector<double> values;

  double at(int mel, int frame) const {
    return values[static_cast<std::size_t>(mel) * n_frames + frame];
  }
  double& at(int mel, int frame) {
    return values[static_cast<std::size_t>(mel) * n_frames + frame];
  }
};

struct AugmentConfig {
  int n_freq_masks = 2;
  int max_freq_mask_bins = 16;
  int n_time_masks = 2;
  int max_time_mask_frames = 40;
  double noise_std_frac = 0.1;
  double apply_prob = 0.5;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Center frequency of each triangular filter, mel-equally spaced over
// [0, sample_rate/2].
std::vector<double> mel_center_freqs(int n_mels, int sample_rate);

// Triangular mel filterbank, peak 1, row-major [n_mels][n_fft/2 + 1].
// Throws std::invalid_argument if any filter covers no FFT bin.
std::vector<double> mel_filterbank(int n_mels, int sample_rate, int n_fft);

// Hann-windowed power STFT. Window and hop are round(len_s * sr) and
// round(hop_s * sr); n_fft is the next power of two >= window.
PowerSpectrogram stft_power(const AudioClip& clip, const StftConfig& cfg = {});

LogMelSpectrogram log_mel(const AudioClip& clip, int n_mels = 128,
                          const StftConfig& cfg = {});

// With probability cfg.apply_prob, blanks cfg.n_freq_masks random mel
// bands and cfg.n_time_masks random frame ranges to the floor. Mask
// widths are uniform on [0, max]; rng draw order is fixed.
LogMelSpectrogram spec_augment(LogMelSpectrogram spec,
                               const AugmentConfig& cfg, Rng& rng);

// Adds zero-mean gaussian noise with std = noise_std_frac * std(spec),
// clamping at the floor.
LogMelSpectrogram add_gaussian_noise(LogMelSpectrogram spec,
                                     double noise_std_frac, Rng& rng);

// Cache files: 8-byte header of two little-endian uint32 (n_mels,
// n_frames), then row-major float32 values. Precision is reduced to
// float32 by design; load returns the float32 values widened back.
void save_spectrogram(const std::string& path, const LogMelSpectrogram& spec);
LogMelSpectrogram load_spectrogram(const std::string& path);

}  // namespace geowx

#endif  // GEOWX_FEATURES_HPP_

// src/features.cc

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

#include "geowx/features.hpp"

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "geowx/fft.hpp"

namespace geowx {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<double> hann_window(int win) {
  std::vector<double> w(win);
  if (win == 1) {
    w[0] = 1.0;
    return w;
  }
  for (int i = 0; i < win; ++i) {
    w[i] = 0.5 * (1.0 - std::cos(2.0 * 3.14159265358979323846 * i /
                                 (win - 1)));
  }
  return w;
}

void put_u32le(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<double> mel_center_freqs(int n_mels, int sample_rate) {
  if (n_mels <= 0) throw std::invalid_argument("n_mels must be > 0");
  if (sample_rate <= 0) {
    throw std::invalid_argument("sample_rate must be > 0");
  }
  double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<double> centers(n_mels);
  for (int m = 0; m < n_mels; ++m) {
    centers[m] = mel_to_hz((m + 1) * mel_max / (n_mels + 1));
  }
  return centers;
}

std::vector<double> mel_filterbank(int n_mels, int sample_rate, int n_fft) {
  if (n_fft <= 0 || (n_fft & (n_fft - 1)) != 0) {
    throw std::invalid_argument("n_fft must be a power of two");
  }
  if (n_mels <= 0) throw std::invalid_argument("n_mels must be > 0");
  if (sample_rate <= 0) {
    throw std::invalid_argument("sample_rate must be > 0");
  }

  int n_bins = n_fft / 2 + 1;
  double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    edges[i] = mel_to_hz(i * mel_max / (n_mels + 1));
  }

  std::vector<double> fb(static_cast<std::size_t>(n_mels) * n_bins, 0.0);
  for (int m = 0; m < n_mels; ++m) {
    double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    bool covered = false;
    for (int k = 0; k < n_bins; ++k) {
      double f = static_cast<double>(k) * sample_rate / n_fft;
      double w = 0.0;
      if (f >= left && f <= center && center > left) {
        w = (f - left) / (center - left);
      } else if (f > center && f < right && right > center) {
        w = (right - f) / (right - center);
      }
      if (w > 0.0) covered = true;
      fb[static_cast<std::size_t>(m) * n_bins + k] = w;
    }
    if (!covered) {
      throw std::invalid_argument(
          "mel filter " + std::to_string(m) +
          " covers no FFT bin; lower n_mels or raise n_fft");
    }
  }
  return fb;
}

PowerSpectrogram stft_power(const AudioClip& clip, const StftConfig& cfg) {
  if (clip.sample_rate <= 0) {
    throw std::invalid_argument("clip has no sample rate");
  }
  int win = static_cast<int>(std::lround(cfg.frame_len_s * clip.sample_rate));
  int hop = static_cast<int>(std::lround(cfg.frame_hop_s * clip.sample_rate));
  if (win < 2 || hop < 1) {
    throw std::invalid_argument("frame geometry too small for sample rate");
  }
  if (clip.samples.size() < static_cast<std::size_t>(win)) {
    throw std::invalid_argument("clip shorter than one analysis window");
  }
  int n_fft = next_pow2(win);
  int n_frames =
      1 + static_cast<int>((clip.samples.size() - static_cast<std::size_t>(win)) /
                           static_cast<std::size_t>(hop));
  int n_bins = n_fft / 2 + 1;

  std::vector<double> window = hann_window(win);

  PowerSpectrogram out;
  out.n_bins = n_bins;
  out.n_frames = n_frames;
  out.n_fft = n_fft;
  out.win = win;
  out.hop = hop;
  out.sample_rate = clip.sample_rate;
  out.values.assign(static_cast<std::size_t>(n_bins) * n_frames, 0.0);

  std::vector<std::complex<double>> buf(static_cast<std::size_t>(n_fft));
  for (int t = 0; t < n_frames; ++t) {
    const std::int16_t* frame =
        clip.samples.data() + static_cast<std::size_t>(t) * hop;
    for (int i = 0; i < win; ++i) {
      buf[i] = {frame[i] / 32768.0 * window[i], 0.0};
    }
    std::fill(buf.begin() + win, buf.end(), std::complex<double>(0.0, 0.0));
    fft_inplace(buf, false);
    for (int k = 0; k < n_bins; ++k) {
      out.values[static_cast<std::size_t>(k) * n_frames + t] =
          std::norm(buf[k]);
    }
  }
  return out;
}

LogMelSpectrogram log_mel(const AudioClip& clip, int n_mels,
                          const StftConfig& cfg) {
  PowerSpectrogram power = stft_power(clip, cfg);
  std::vector<double> fb =
      mel_filterbank(n_mels, clip.sample_rate, power.n_fft);

  Eigen::Map<const RowMat> fbm(fb.data(), n_mels, power.n_bins);
  Eigen::Map<const RowMat> pm(power.values.data(), power.n_bins,
                              power.n_frames);

  LogMelSpectrogram out;
  out.n_mels = n_mels;
  out.n_frames = power.n_frames;
  out.sample_rate = clip.sample_rate;
  out.frame_hop_s = cfg.frame_hop_s;
  out.floor_log = std::log(kLogEps);
  out.values.resize(static_cast<std::size_t>(n_mels) * power.n_frames);

  Eigen::Map<RowMat> om(out.values.data(), n_mels, power.n_frames);
  om.noalias() = fbm * pm;
  for (double& v : out.values) v = std::log(v + kLogEps);
  return out;
}

LogMelSpectrogram spec_augment(LogMelSpectrogram spec,
                               const AugmentConfig& cfg, Rng& rng) {
  if (cfg.n_freq_masks < 0 || cfg.n_time_masks < 0 ||
      cfg.max_freq_mask_bins < 0 || cfg.max_time_mask_frames < 0) {
    throw std::invalid_argument("mask counts and widths must be >= 0");
  }
  if (cfg.apply_prob < 0.0 || cfg.apply_prob > 1.0) {
    throw std::invalid_argument("apply_prob must be in [0, 1]");
  }
  if (rng.uniform() >= cfg.apply_prob) return spec;

  for (int i = 0; i < cfg.n_freq_masks; ++i) {
    int w = static_cast<int>(
        rng.uniform_int(0, std::min(cfg.max_freq_mask_bins, spec.n_mels)));
    int f0 = static_cast<int>(rng.uniform_int(0, spec.n_mels - w));
    for (int m = f0; m < f0 + w; ++m) {
      for (int t = 0; t < spec.n_frames; ++t) {
        spec.at(m, t) = spec.floor_log;
      }
    }
  }
  for (int i = 0; i < cfg.n_time_masks; ++i) {
    int w = static_cast<int>(
        rng.uniform_int(0, std::min(cfg.max_time_mask_frames, spec.n_frames)));
    int t0 = static_cast<int>(rng.uniform_int(0, spec.n_frames - w));
    for (int m = 0; m < spec.n_mels; ++m) {
      for (int t = t0; t < t0 + w; ++t) {
        spec.at(m, t) = spec.floor_log;
      }
    }
  }
  return spec;
}

LogMelSpectrogram add_gaussian_noise(LogMelSpectrogram spec,
                                     double noise_std_frac, Rng& rng) {
  if (noise_std_frac < 0.0) {
    throw std::invalid_argument("noise_std_frac must be >= 0");
  }
  if (noise_std_frac == 0.0 || spec.values.empty()) return spec;

  double mean = 0.0;
  for (double v : spec.values) mean += v;
  mean /= static_cast<double>(spec.values.size());
  double var = 0.0;
  for (double v : spec.values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(spec.values.size());
  double sigma = noise_std_frac * std::sqrt(var);

  for (double& v : spec.values) {
    v = std::max(spec.floor_log, v + sigma * rng.gaussian());
  }
  return spec;
}

void save_spectrogram(const std::string& path, const LogMelSpectrogram& spec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  put_u32le(out, static_cast<std::uint32_t>(spec.n_mels));
  put_u32le(out, static_cast<std::uint32_t>(spec.n_frames));
  for (double v : spec.values) {
    float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32le(out, bits);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

LogMelSpectrogram load_spectrogram(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  unsigned char hdr[8];
  in.read(reinterpret_cast<char*>(hdr), 8);
  if (in.gcount() != 8) {
    throw std::runtime_error(path + ": truncated spectrogram header");
  }
  std::uint32_t n_mels = get_u32le(hdr);
  std::uint32_t n_frames = get_u32le(hdr + 4);
  if (n_mels == 0 || n_frames == 0 || n_mels > (1u << 20) ||
      n_frames > (1u << 20)) {
    throw std::runtime_error(path + ": implausible spectrogram dimensions");
  }
  std::size_t n = static_cast<std::size_t>(n_mels) * n_frames;
  std::vector<unsigned char> raw(n * 4);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw std::runtime_error(path + ": truncated spectrogram payload");
  }

  LogMelSpectrogram spec;
  spec.n_mels = static_cast<int>(n_mels);
  spec.n_frames = static_cast<int>(n_frames);
  spec.floor_log = std::log(kLogEps);
  spec.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = get_u32le(raw.data() + i * 4);
    float f;
    std::memcpy(&f, &bits, 4);
    spec.values[i] = static_cast<double>(f);
  }
  return spec;
}

}  // namespace geowx

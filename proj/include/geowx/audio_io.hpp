// include/geowx/audio_io.hpp

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

#ifndef GEOWX_AUDIO_IO_HPP_
#define GEOWX_AUDIO_IO_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace geowx {

// A continuous 16-bit mono recording, timestamped at its first sample.
struct Waveform {
  std::vector<std::int16_t> samples;
  int sample_rate = 0;
  std::string site_id;
  std::int64_t start_time = 0;  // unix seconds, UTC
};

// A fixed-length excerpt used as one model input. samples.size() is
// exactly duration_s * sample_rate.
struct AudioClip {
  std::vector<std::int16_t> samples;
  int sample_rate = 0;
  int duration_s = 0;
  std::string site_id;
  std::int64_t start_time = 0;
  double clipped_fraction = 0.0;
};

// Fraction of samples at full scale (32767 or -32768).
double clipping_fraction(const std::vector<std::int16_t>& samples);

// Builds a clip from raw samples, computing duration and clipped
// fraction. sample count must be a whole number of seconds.
AudioClip make_clip(std::vector<std::int16_t> samples, int sample_rate,
                    std::string site_id, std::int64_t start_time);

// Reads a PCM 16-bit WAV file; of multi-channel files only channel 0 is
// kept. Throws std::runtime_error naming the defect on malformed,
// truncated, or non-PCM-16 input. site_id / start_time are left for the
// caller to fill (see parse_clip_filename).
Waveform read_wav(const std::string& path);

// Writes mono PCM 16-bit.
void write_wav(const std::string& path, const std::vector<std::int16_t>& samples,
               int sample_rate);

// Tiles a recording into consecutive non-overlapping clips starting at
// the first sample; a trailing remainder shorter than clip_len_s is
// dropped.
std::vector<AudioClip> segment(const Waveform& wf, int clip_len_s = 10);

// Keeps clips whose clipped_fraction is strictly below max_fraction.
std::vector<AudioClip> filter_clipped(std::vector<AudioClip> clips,
                                      double max_fraction = 0.2);

struct ClipNameInfo {
  std::string site_id;
  std::int64_t start_time = 0;
};

// Filenames follow SITE_YYYYMMDD_HHMMSS.wav where SITE itself may
// contain underscores. Returns nullopt when the name does not match.
std::optional<ClipNameInfo> parse_clip_filename(std::string_view filename);

std::string make_clip_filename(const std::string& site_id,
                               std::int64_t start_time);

}  // namespace geowx

#endif  // GEOWX_AUDIO_IO_HPP_

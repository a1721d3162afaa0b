// src/audio_io.cc

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

#include "geowx/audio_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "geowx/timeutil.hpp"

namespace geowx {

namespace {

std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] |
                                    (static_cast<std::uint16_t>(p[1]) << 8));
}

void put_u32le(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16le(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

double clipping_fraction(const std::vector<std::int16_t>& samples) {
  if (samples.empty()) return 0.0;
  std::size_t clipped = 0;
  for (std::int16_t s : samples) {
    if (s == 32767 || s == -32768) ++clipped;
  }
  return static_cast<double>(clipped) / static_cast<double>(samples.size());
}

AudioClip make_clip(std::vector<std::int16_t> samples, int sample_rate,
                    std::string site_id, std::int64_t start_time) {
  if (sample_rate <= 0) throw std::invalid_argument("sample_rate must be > 0");
  if (samples.empty() ||
      samples.size() % static_cast<std::size_t>(sample_rate) != 0) {
    throw std::invalid_argument(
        "clip length must be a whole number of seconds");
  }
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.duration_s =
      static_cast<int>(samples.size() / static_cast<std::size_t>(sample_rate));
  clip.site_id = std::move(site_id);
  clip.start_time = start_time;
  clip.clipped_fraction = clipping_fraction(samples);
  clip.samples = std::move(samples);
  return clip;
}

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);

  unsigned char hdr[12];
  in.read(reinterpret_cast<char*>(hdr), 12);
  if (in.gcount() != 12 || std::memcmp(hdr, "RIFF", 4) != 0 ||
      std::memcmp(hdr + 8, "WAVE", 4) != 0) {
    throw std::runtime_error(path + ": not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  std::vector<std::int16_t> samples;
  bool have_data = false;

  unsigned char chunk_hdr[8];
  while (in.read(reinterpret_cast<char*>(chunk_hdr), 8)) {
    std::uint32_t chunk_size = read_u32le(chunk_hdr + 4);
    if (std::memcmp(chunk_hdr, "fmt ", 4) == 0) {
      if (chunk_size < 16) {
        throw std::runtime_error(path + ": fmt chunk too small");
      }
      unsigned char fmt[16];
      in.read(reinterpret_cast<char*>(fmt), 16);
      if (in.gcount() != 16) {
        throw std::runtime_error(path + ": truncated fmt chunk");
      }
      format = read_u16le(fmt);
      channels = read_u16le(fmt + 2);
      sample_rate = read_u32le(fmt + 4);
      bits = read_u16le(fmt + 14);
      have_fmt = true;
      in.seekg(chunk_size - 16 + (chunk_size & 1), std::ios::cur);
    } else if (std::memcmp(chunk_hdr, "data", 4) == 0) {
      if (!have_fmt) {
        throw std::runtime_error(path + ": data chunk precedes fmt chunk");
      }
      if (format != 1) {
        throw std::runtime_error(path + ": unsupported WAV encoding " +
                                 std::to_string(format) +
                                 ", want PCM (1)");
      }
      if (bits != 16) {
        throw std::runtime_error(path + ": unsupported bit depth " +
                                 std::to_string(bits) + ", want 16");
      }
      if (channels == 0) {
        throw std::runtime_error(path + ": fmt declares zero channels");
      }
      std::size_t frame_bytes = 2u * channels;
      if (chunk_size % frame_bytes != 0) {
        throw std::runtime_error(path + ": data chunk is not a whole number "
                                        "of frames");
      }
      std::size_t n_frames = chunk_size / frame_bytes;
      std::vector<unsigned char> raw(chunk_size);
      in.read(reinterpret_cast<char*>(raw.data()),
              static_cast<std::streamsize>(chunk_size));
      if (static_cast<std::uint32_t>(in.gcount()) != chunk_size) {
        throw std::runtime_error(path + ": truncated data chunk");
      }
      samples.resize(n_frames);
      for (std::size_t i = 0; i < n_frames; ++i) {
        // channel 0 of each frame
        std::uint16_t u = read_u16le(raw.data() + i * frame_bytes);
        samples[i] = static_cast<std::int16_t>(u);
      }
      have_data = true;
      if (chunk_size & 1) in.seekg(1, std::ios::cur);
    } else {
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
      if (!in) throw std::runtime_error(path + ": truncated chunk");
    }
  }

  if (!have_fmt) throw std::runtime_error(path + ": missing fmt chunk");
  if (!have_data) throw std::runtime_error(path + ": missing data chunk");
  if (sample_rate == 0) {
    throw std::runtime_error(path + ": fmt declares zero sample rate");
  }

  Waveform wf;
  wf.samples = std::move(samples);
  wf.sample_rate = static_cast<int>(sample_rate);
  return wf;
}

void write_wav(const std::string& path,
               const std::vector<std::int16_t>& samples, int sample_rate) {
  if (sample_rate <= 0) throw std::invalid_argument("sample_rate must be > 0");
  std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32le(out, 36 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  put_u32le(out, 16);
  put_u16le(out, 1);  // PCM
  put_u16le(out, 1);  // mono
  put_u32le(out, static_cast<std::uint32_t>(sample_rate));
  put_u32le(out, static_cast<std::uint32_t>(sample_rate) * 2);
  put_u16le(out, 2);
  put_u16le(out, 16);
  out += "data";
  put_u32le(out, data_bytes);
  for (std::int16_t s : samples) {
    put_u16le(out, static_cast<std::uint16_t>(s));
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<AudioClip> segment(const Waveform& wf, int clip_len_s) {
  if (clip_len_s <= 0) throw std::invalid_argument("clip_len_s must be > 0");
  if (wf.sample_rate <= 0) {
    throw std::invalid_argument("waveform has no sample rate");
  }
  std::size_t clip_samples =
      static_cast<std::size_t>(wf.sample_rate) * clip_len_s;
  std::size_t n_clips = wf.samples.size() / clip_samples;
  std::vector<AudioClip> clips;
  clips.reserve(n_clips);
  for (std::size_t i = 0; i < n_clips; ++i) {
    std::vector<std::int16_t> chunk(
        wf.samples.begin() + static_cast<std::ptrdiff_t>(i * clip_samples),
        wf.samples.begin() +
            static_cast<std::ptrdiff_t>((i + 1) * clip_samples));
    clips.push_back(make_clip(std::move(chunk), wf.sample_rate, wf.site_id,
                              wf.start_time +
                                  static_cast<std::int64_t>(i) * clip_len_s));
  }
  return clips;
}

std::vector<AudioClip> filter_clipped(std::vector<AudioClip> clips,
                                      double max_fraction) {
  std::vector<AudioClip> kept;
  kept.reserve(clips.size());
  for (auto& c : clips) {
    if (c.clipped_fraction < max_fraction) kept.push_back(std::move(c));
  }
  return kept;
}

std::optional<ClipNameInfo> parse_clip_filename(std::string_view filename) {
  std::size_t slash = filename.find_last_of('/');
  if (slash != std::string_view::npos) filename.remove_prefix(slash + 1);

  constexpr std::string_view kExt = ".wav";
  if (filename.size() < kExt.size() ||
      filename.substr(filename.size() - kExt.size()) != kExt) {
    return std::nullopt;
  }
  std::string_view stem = filename.substr(0, filename.size() - kExt.size());

  // SITE_YYYYMMDD_HHMMSS, where SITE may itself contain underscores.
  constexpr std::size_t kStampLen = 15;  // YYYYMMDD_HHMMSS
  if (stem.size() < kStampLen + 2) return std::nullopt;
  std::string_view stamp = stem.substr(stem.size() - kStampLen);
  if (stem[stem.size() - kStampLen - 1] != '_') return std::nullopt;
  if (stamp[8] != '_') return std::nullopt;
  for (std::size_t i = 0; i < kStampLen; ++i) {
    if (i == 8) continue;
    if (stamp[i] < '0' || stamp[i] > '9') return std::nullopt;
  }

  auto num = [&](std::size_t pos, std::size_t n) {
    int v = 0;
    for (std::size_t i = 0; i < n; ++i) v = v * 10 + (stamp[pos + i] - '0');
    return v;
  };
  CivilTime ct;
  ct.year = num(0, 4);
  ct.month = num(4, 2);
  ct.day = num(6, 2);
  ct.hour = num(9, 2);
  ct.minute = num(11, 2);
  ct.second = num(13, 2);
  if (ct.month < 1 || ct.month > 12 || ct.day < 1 || ct.day > 31 ||
      ct.hour > 23 || ct.minute > 59 || ct.second > 59) {
    return std::nullopt;
  }
  // Round-trip through the calendar to reject e.g. Feb 30.
  std::int64_t t = civil_to_epoch(ct);
  CivilTime back = epoch_to_civil(t);
  if (back.year != ct.year || back.month != ct.month || back.day != ct.day) {
    return std::nullopt;
  }

  ClipNameInfo info;
  info.site_id = std::string(stem.substr(0, stem.size() - kStampLen - 1));
  info.start_time = t;
  return info;
}

std::string make_clip_filename(const std::string& site_id,
                               std::int64_t start_time) {
  return site_id + "_" + format_compact_utc(start_time) + ".wav";
}

}  // namespace geowx

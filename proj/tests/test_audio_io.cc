// tests/test_audio_io.cc

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

#include <cstdint>
#include <string>
#include <vector>

#include "doctest.h"
#include "geowx/audio_io.hpp"
#include "geowx/timeutil.hpp"
#include "test_util.hpp"

using namespace geowx;
using geowx::testing::TempDir;

namespace {

void put_u32(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

// Hand-built PCM16 WAV, independent of write_wav.
std::string build_wav(int channels, int sample_rate,
                      const std::vector<std::int16_t>& interleaved,
                      std::uint16_t format = 1, int bits = 16) {
  std::string s;
  std::uint32_t data_size =
      static_cast<std::uint32_t>(interleaved.size() * 2);
  s += "RIFF";
  put_u32(s, 36 + data_size);
  s += "WAVEfmt ";
  put_u32(s, 16);
  put_u16(s, format);
  put_u16(s, static_cast<std::uint16_t>(channels));
  put_u32(s, static_cast<std::uint32_t>(sample_rate));
  put_u32(s, static_cast<std::uint32_t>(sample_rate * channels * bits / 8));
  put_u16(s, static_cast<std::uint16_t>(channels * bits / 8));
  put_u16(s, static_cast<std::uint16_t>(bits));
  s += "data";
  put_u32(s, data_size);
  for (std::int16_t v : interleaved) {
    put_u16(s, static_cast<std::uint16_t>(v));
  }
  return s;
}

}  // namespace

TEST_CASE("wav round trip preserves samples and rate") {
  TempDir tmp;
  std::vector<std::int16_t> samples = {0, 100, -100, 32767, -32768, 7};
  write_wav(tmp.file("a.wav"), samples, 8000);
  Waveform wf = read_wav(tmp.file("a.wav"));
  CHECK(wf.sample_rate == 8000);
  CHECK(wf.samples == samples);
}

TEST_CASE("write_wav emits the canonical 44-byte mono header") {
  TempDir tmp;
  std::vector<std::int16_t> samples = {1, -2, 3, -4};
  write_wav(tmp.file("a.wav"), samples, 48000);
  std::string got = geowx::testing::read_bytes(tmp.file("a.wav"));
  std::string want = build_wav(1, 48000, samples);
  CHECK(got.size() == 44 + 8);
  CHECK(got == want);
}

TEST_CASE("read_wav keeps channel 0 of multi-channel files") {
  TempDir tmp;
  // Stereo: L = 10,20,30  R = -1,-2,-3.
  std::vector<std::int16_t> inter = {10, -1, 20, -2, 30, -3};
  geowx::testing::write_bytes(tmp.file("st.wav"), build_wav(2, 22050, inter));
  Waveform wf = read_wav(tmp.file("st.wav"));
  CHECK(wf.sample_rate == 22050);
  CHECK(wf.samples == std::vector<std::int16_t>{10, 20, 30});
}

TEST_CASE("read_wav tolerates extra chunks before data") {
  TempDir tmp;
  std::vector<std::int16_t> samples = {5, 6, 7};
  std::string s;
  s += "RIFF";
  put_u32(s, 0);  // patched below
  s += "WAVEfmt ";
  put_u32(s, 16);
  put_u16(s, 1);
  put_u16(s, 1);
  put_u32(s, 16000);
  put_u32(s, 32000);
  put_u16(s, 2);
  put_u16(s, 16);
  s += "LIST";  // odd-sized stray chunk, padded to even
  put_u32(s, 3);
  s += "abc";
  s.push_back('\0');
  s += "data";
  put_u32(s, 6);
  for (std::int16_t v : samples) put_u16(s, static_cast<std::uint16_t>(v));
  std::string patched = s;
  std::string size_field;
  put_u32(size_field, static_cast<std::uint32_t>(s.size() - 8));
  patched.replace(4, 4, size_field);
  geowx::testing::write_bytes(tmp.file("x.wav"), patched);
  Waveform wf = read_wav(tmp.file("x.wav"));
  CHECK(wf.samples == samples);
}

TEST_CASE("read_wav rejects malformed input with a named defect") {
  TempDir tmp;
  std::vector<std::int16_t> samples = {1, 2, 3, 4};

  geowx::testing::write_bytes(tmp.file("notriff.wav"),
                              "JUNKJUNKJUNKJUNKJUNK");
  CHECK_THROWS_WITH_AS(read_wav(tmp.file("notriff.wav")),
                       doctest::Contains("RIFF"), std::runtime_error);

  geowx::testing::write_bytes(tmp.file("float.wav"),
                              build_wav(1, 8000, samples, 3));
  CHECK_THROWS_WITH_AS(read_wav(tmp.file("float.wav")),
                       doctest::Contains("unsupported WAV encoding"),
                       std::runtime_error);

  geowx::testing::write_bytes(tmp.file("b24.wav"),
                              build_wav(1, 8000, samples, 1, 24));
  CHECK_THROWS_WITH_AS(read_wav(tmp.file("b24.wav")),
                       doctest::Contains("bit depth"), std::runtime_error);

  std::string truncated = build_wav(1, 8000, samples);
  truncated.resize(truncated.size() - 3);
  geowx::testing::write_bytes(tmp.file("trunc.wav"), truncated);
  CHECK_THROWS_AS(read_wav(tmp.file("trunc.wav")), std::runtime_error);

  CHECK_THROWS_AS(read_wav(tmp.file("missing.wav")), std::runtime_error);
}

TEST_CASE("segment tiles a recording and drops the remainder") {
  Waveform wf;
  wf.sample_rate = 1000;
  wf.site_id = "S1";
  wf.start_time = 5000;
  wf.samples.resize(25 * 1000);
  for (std::size_t i = 0; i < wf.samples.size(); ++i) {
    wf.samples[i] = static_cast<std::int16_t>(i % 3000);
  }
  std::vector<AudioClip> clips = segment(wf, 10);
  REQUIRE(clips.size() == 2);
  CHECK(clips[0].start_time == 5000);
  CHECK(clips[1].start_time == 5010);
  CHECK(clips[0].duration_s == 10);
  CHECK(clips[0].samples.size() == 10000);
  CHECK(clips[1].samples[0] == wf.samples[10000]);
  CHECK(clips[0].site_id == "S1");

  wf.samples.resize(9 * 1000);
  CHECK(segment(wf, 10).empty());
}

TEST_CASE("clipping fraction counts only full-scale samples") {
  std::vector<std::int16_t> s = {32767, -32768, 32766, -32767, 0, 1, 2, 3};
  CHECK(clipping_fraction(s) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(clipping_fraction({0, 0}) == 0.0);
}

TEST_CASE("filter_clipped keeps strictly-below-threshold clips") {
  auto make = [](int n_clipped) {
    std::vector<std::int16_t> s(10, 0);
    for (int i = 0; i < n_clipped; ++i) s[i] = 32767;
    return make_clip(std::move(s), 10, "S", 0);
  };
  std::vector<AudioClip> clips;
  clips.push_back(make(1));  // 0.1
  clips.push_back(make(2));  // 0.2, exactly at the limit
  clips.push_back(make(3));  // 0.3
  std::vector<AudioClip> kept = filter_clipped(std::move(clips), 0.2);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].clipped_fraction == doctest::Approx(0.1));
}

TEST_CASE("make_clip wants whole seconds") {
  CHECK_THROWS_AS(make_clip(std::vector<std::int16_t>(1500), 1000, "S", 0),
                  std::invalid_argument);
  AudioClip c = make_clip(std::vector<std::int16_t>(2000), 1000, "S", 9);
  CHECK(c.duration_s == 2);
  CHECK(c.start_time == 9);
}

TEST_CASE("clip filenames round-trip site and timestamp") {
  std::int64_t t = civil_to_epoch({2019, 6, 1, 15, 45, 0});
  std::string name = make_clip_filename("STN04", t);
  CHECK(name == "STN04_20190601_154500.wav");
  auto info = parse_clip_filename(name);
  REQUIRE(info.has_value());
  CHECK(info->site_id == "STN04");
  CHECK(info->start_time == t);

  auto multi = parse_clip_filename("ANWR_A_B_20200229_000000.wav");
  REQUIRE(multi.has_value());
  CHECK(multi->site_id == "ANWR_A_B");
  CHECK(multi->start_time == civil_to_epoch({2020, 2, 29, 0, 0, 0}));
}

TEST_CASE("parse_clip_filename rejects non-matching names") {
  CHECK(!parse_clip_filename("foo.wav"));
  CHECK(!parse_clip_filename("S_2019/601_000000.wav"));
  CHECK(!parse_clip_filename("20190601_000000.wav"));       // no site
  CHECK(!parse_clip_filename("S_20191301_000000.wav"));     // month 13
  CHECK(!parse_clip_filename("S_20190230_000000.wav"));     // Feb 30
  CHECK(!parse_clip_filename("S_20190601_240000.wav"));     // hour 24
  CHECK(!parse_clip_filename("S_20190601_005960.wav"));     // second 60
  CHECK(!parse_clip_filename("S_20190601_0000.wav"));       // short stamp
  CHECK(!parse_clip_filename("S_20190601_000000.WAV"));     // extension case
  CHECK(!parse_clip_filename("S_20190601_000000"));         // no extension
  CHECK(!parse_clip_filename("_20190601_000000.wav"));      // empty site
}

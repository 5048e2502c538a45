// tests/audio_test.cpp
//
// Copyright 2026  DASC Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "dasc/audio.h"

#include <catch2/catch_amalgamated.hpp>
#include <cstdint>
#include <fstream>
#include <vector>

#include "dasc/common.h"
#include "test_util.h"

using namespace dasc;
using dasc_test::TempDir;

namespace {

// Hand-assembled WAV for reader edge cases.
std::vector<unsigned char> raw_wav(uint16_t format, uint16_t channels, uint32_t rate,
                                   uint16_t bits, const std::vector<int16_t>& samples) {
  std::vector<unsigned char> out;
  auto u16 = [&](uint16_t v) { wav_detail::put_u16(out, v); };
  auto u32 = [&](uint32_t v) { wav_detail::put_u32(out, v); };
  const uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 2);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  u32(36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  u32(16);
  u16(format);
  u16(channels);
  u32(rate);
  u32(rate * channels * bits / 8);
  u16(static_cast<uint16_t>(channels * bits / 8));
  u16(bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  u32(data_bytes);
  for (int16_t s : samples) u16(static_cast<uint16_t>(s));
  return out;
}

void dump(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream os(path, std::ios::binary);
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("read_wav: int16 scaling is exact powers of two") {
  TempDir tmp("wav");
  dump(tmp / "a.wav", raw_wav(1, 1, 16000, 16, {16384}));
  CHECK(read_wav(tmp / "a.wav").samples == std::vector<double>{0.5});

  dump(tmp / "b.wav", raw_wav(1, 1, 16000, 16, {0}));
  CHECK(read_wav(tmp / "b.wav").samples == std::vector<double>{0.0});

  dump(tmp / "c.wav", raw_wav(1, 1, 16000, 16, {-32768}));
  CHECK(read_wav(tmp / "c.wav").samples == std::vector<double>{-32768.0 / 32768.0});
  CHECK(read_wav(tmp / "c.wav").samples[0] == -1.0);
}

TEST_CASE("read_wav: header fields") {
  TempDir tmp("wav");
  dump(tmp / "r.wav", raw_wav(1, 1, 8000, 16, {1, 2, 3}));
  const AudioClip clip = read_wav(tmp / "r.wav");
  CHECK(clip.sample_rate == 8000);
  CHECK(clip.size() == 3);
}

TEST_CASE("read_wav: rejects what it cannot represent") {
  TempDir tmp("wav");
  dump(tmp / "stereo.wav", raw_wav(1, 2, 16000, 16, {0, 0}));
  CHECK_THROWS_AS(read_wav(tmp / "stereo.wav"), FormatError);
  CHECK_THROWS_WITH(read_wav(tmp / "stereo.wav"),
                    Catch::Matchers::ContainsSubstring("mono"));

  dump(tmp / "float.wav", raw_wav(3, 1, 16000, 32, {0}));
  CHECK_THROWS_AS(read_wav(tmp / "float.wav"), FormatError);

  dasc_test::write_text(tmp / "junk.wav", "this is not audio");
  CHECK_THROWS_AS(read_wav(tmp / "junk.wav"), FormatError);

  CHECK_THROWS_AS(read_wav(tmp / "missing.wav"), FormatError);

  // Truncated data chunk.
  auto bytes = raw_wav(1, 1, 16000, 16, {1, 2, 3, 4});
  bytes.resize(bytes.size() - 3);
  dump(tmp / "trunc.wav", bytes);
  CHECK_THROWS_AS(read_wav(tmp / "trunc.wav"), FormatError);
}

TEST_CASE("write_wav: range policy") {
  TempDir tmp("wav");
  AudioClip clip;
  clip.samples = {1.5};
  CHECK_THROWS_AS(write_wav(clip, tmp / "out.wav"), DomainError);
  clip.samples = {-1.0000001};
  CHECK_THROWS_AS(write_wav(clip, tmp / "out.wav"), DomainError);
}

TEST_CASE("wav round trip: pinned examples") {
  TempDir tmp("wav");
  AudioClip clip;
  clip.sample_rate = 16000;

  clip.samples = {0.0};
  write_wav(clip, tmp / "z.wav");
  CHECK(read_wav(tmp / "z.wav").samples[0] == 0.0);

  // 1.0 saturates to 32767, one step below.
  clip.samples = {1.0};
  write_wav(clip, tmp / "one.wav");
  CHECK(std::fabs(read_wav(tmp / "one.wav").samples[0] - 1.0) <= 1.0 / 32768.0);

  clip.samples = {0.123456};
  write_wav(clip, tmp / "f.wav");
  CHECK(std::fabs(read_wav(tmp / "f.wav").samples[0] - 0.123456) <= 1.0 / 32768.0);
}

TEST_CASE("wav round trip: property over random clips") {
  TempDir tmp("wav");
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    AudioClip clip;
    clip.sample_rate = 16000;
    clip.samples.resize(1 + rng.uniform_index(999));
    for (auto& s : clip.samples) s = rng.uniform(-1.0, 1.0);
    write_wav(clip, tmp / "p.wav");
    const AudioClip back = read_wav(tmp / "p.wav");
    REQUIRE(back.samples.size() == clip.samples.size());
    REQUIRE(back.sample_rate == clip.sample_rate);
    for (size_t i = 0; i < clip.samples.size(); ++i)
      REQUIRE(std::fabs(back.samples[i] - clip.samples[i]) <= 1.0 / 32768.0);
  }
}

TEST_CASE("wav round trip: quantized values survive exactly") {
  // Samples that already sit on the int16 grid come back bit-identical.
  TempDir tmp("wav");
  AudioClip clip;
  clip.samples = {-32768 / 32768.0, -1234 / 32768.0, 0.0, 777 / 32768.0, 32767 / 32768.0};
  write_wav(clip, tmp / "grid.wav");
  CHECK(read_wav(tmp / "grid.wav").samples == clip.samples);
}

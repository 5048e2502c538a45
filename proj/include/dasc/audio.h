// dasc/audio.h
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

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "dasc/common.h"

namespace dasc {

// Mono waveform in [-1, 1]. Samples are kept as doubles so the companding
// round-trip tolerances hold; 16-bit quantization happens only at the WAV
// boundary. The corpus this toolkit targets is 16 kHz mono, so that is the
// default rate; the rate itself is carried from the file header.
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 16000;

  size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  // Mean squared amplitude.
  double power() const {
    if (samples.empty()) return 0.0;
    double acc = 0.0;
    for (double s : samples) acc += s * s;
    return acc / static_cast<double>(samples.size());
  }
};

namespace wav_detail {

inline uint16_t read_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

inline uint32_t read_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

inline void put_u16(std::vector<unsigned char>& out, uint16_t v) {
  out.push_back(v & 0xFF);
  out.push_back((v >> 8) & 0xFF);
}

inline void put_u32(std::vector<unsigned char>& out, uint32_t v) {
  out.push_back(v & 0xFF);
  out.push_back((v >> 8) & 0xFF);
  out.push_back((v >> 16) & 0xFF);
  out.push_back((v >> 24) & 0xFF);
}

}  // namespace wav_detail

// Reads a RIFF/WAVE file. Only PCM format 1, 16 bits per sample, mono is
// accepted; anything else is rejected rather than converted, since silent
// downmixing or resampling would change augmentation semantics. Samples are
// scaled by 1/32768 so that int16 -32768 maps exactly to -1.0.
inline AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open WAV file: " + path.string());

  unsigned char hdr[12];
  if (!in.read(reinterpret_cast<char*>(hdr), 12))
    throw FormatError(path.string() + ": truncated RIFF header");
  if (std::memcmp(hdr, "RIFF", 4) != 0 || std::memcmp(hdr + 8, "WAVE", 4) != 0)
    throw FormatError(path.string() + ": not a RIFF/WAVE file");

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  std::vector<unsigned char> data;
  bool have_data = false;

  unsigned char chdr[8];
  while (in.read(reinterpret_cast<char*>(chdr), 8)) {
    const uint32_t size = wav_detail::read_u32(chdr + 4);
    if (std::memcmp(chdr, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError(path.string() + ": fmt chunk too small");
      std::vector<unsigned char> fmt(size);
      if (!in.read(reinterpret_cast<char*>(fmt.data()), size))
        throw FormatError(path.string() + ": truncated fmt chunk");
      format = wav_detail::read_u16(fmt.data() + 0);
      channels = wav_detail::read_u16(fmt.data() + 2);
      rate = wav_detail::read_u32(fmt.data() + 4);
      bits = wav_detail::read_u16(fmt.data() + 14);
      have_fmt = true;
    } else if (std::memcmp(chdr, "data", 4) == 0) {
      data.resize(size);
      if (!in.read(reinterpret_cast<char*>(data.data()), size))
        throw FormatError(path.string() + ": truncated data chunk");
      have_data = true;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
      continue;
    }
    if (size & 1) in.seekg(1, std::ios::cur);
  }

  if (!have_fmt) throw FormatError(path.string() + ": missing fmt chunk");
  if (!have_data) throw FormatError(path.string() + ": missing data chunk");
  if (format != 1)
    throw FormatError(path.string() + ": unsupported WAV format code " +
                      std::to_string(format) + " (PCM only)");
  if (channels != 1)
    throw FormatError(path.string() + ": " + std::to_string(channels) +
                      " channels; only mono input is accepted");
  if (bits != 16)
    throw FormatError(path.string() + ": " + std::to_string(bits) +
                      " bits per sample; only 16-bit PCM is accepted");
  if (rate == 0) throw FormatError(path.string() + ": zero sample rate");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  const size_t n = data.size() / 2;
  clip.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const int16_t v = static_cast<int16_t>(wav_detail::read_u16(data.data() + 2 * i));
    clip.samples[i] = static_cast<double>(v) / 32768.0;
  }
  return clip;
}

// Quantizes one sample to int16. The caller guarantees x in [-1, 1];
// x = 1.0 saturates to 32767 (one quantization step below 1.0).
inline int16_t quantize_sample(double x) {
  long v = std::lrint(x * 32768.0);
  if (v > 32767) v = 32767;
  if (v < -32768) v = -32768;
  return static_cast<int16_t>(v);
}

// Writes a 16-bit PCM mono WAV. Samples must already be in [-1, 1]; values
// outside the range raise DomainError so that clipping stays an explicit
// caller decision.
inline void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  for (double s : clip.samples) {
    if (!(s >= -1.0 && s <= 1.0))
      throw DomainError("write_wav: sample " + std::to_string(s) +
                        " outside [-1, 1]; clip explicitly before writing");
  }
  if (clip.sample_rate <= 0) throw DomainError("write_wav: non-positive sample rate");

  const uint32_t data_bytes = static_cast<uint32_t>(clip.samples.size() * 2);
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  wav_detail::put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  wav_detail::put_u32(out, 16);
  wav_detail::put_u16(out, 1);  // PCM
  wav_detail::put_u16(out, 1);  // mono
  wav_detail::put_u32(out, static_cast<uint32_t>(clip.sample_rate));
  wav_detail::put_u32(out, static_cast<uint32_t>(clip.sample_rate) * 2);
  wav_detail::put_u16(out, 2);   // block align
  wav_detail::put_u16(out, 16);  // bits per sample
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  wav_detail::put_u32(out, data_bytes);
  for (double s : clip.samples) {
    wav_detail::put_u16(out, static_cast<uint16_t>(quantize_sample(s)));
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!os) throw FormatError("short write: " + path.string());
}

}  // namespace dasc

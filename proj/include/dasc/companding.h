// dasc/companding.h
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
//
// a-law and mu-law companding in two realizations:
//
//   * continuous   - the closed-form compressor/expander curves on [-1, 1],
//                    exact inverses of each other;
//   * quantized8   - the ITU-T G.711 segmented 8-bit codecs (sign, 3-bit
//                    segment, 4-bit mantissa; even-bit inversion for a-law,
//                    complemented codewords for mu-law).
//
// companding_perturb() runs a clip through compress-then-expand. In
// quantized8 mode this injects real codec quantization noise, which is the
// augmentation signal this toolkit exists to produce.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "dasc/audio.h"
#include "dasc/common.h"

namespace dasc {

enum class Law { alaw, mulaw };
enum class CompandingMode { continuous, quantized8 };

inline const char* law_name(Law law) { return law == Law::alaw ? "alaw" : "mulaw"; }

struct CompandingLaw {
  Law law = Law::alaw;
  double A = 86.5;     // a-law compression parameter (European standard value)
  double mu = 255.0;   // mu-law compression parameter (North American value)
  CompandingMode mode = CompandingMode::quantized8;

  static CompandingLaw alaw(CompandingMode m = CompandingMode::quantized8) {
    return CompandingLaw{Law::alaw, 86.5, 255.0, m};
  }
  static CompandingLaw mulaw(CompandingMode m = CompandingMode::quantized8) {
    return CompandingLaw{Law::mulaw, 86.5, 255.0, m};
  }

  void validate() const {
    // A > 1 keeps ln(A) > 0 so the two a-law branches meet at |x| = 1/A.
    if (!(A > 1.0)) throw DomainError("CompandingLaw: A must exceed 1");
    if (!(mu > 0.0)) throw DomainError("CompandingLaw: mu must be positive");
  }
};

namespace detail {
inline double sgn(double x) { return x < 0.0 ? -1.0 : 1.0; }
}  // namespace detail

// Continuous compressor F(x) on [-1, 1]. Odd, strictly increasing, and maps
// +-1 to +-1 for both laws.
inline double compress(double x, const CompandingLaw& law) {
  law.validate();
  if (!(std::fabs(x) <= 1.0))
    throw DomainError("compress: |x| > 1 (x = " + std::to_string(x) + ")");
  const double ax = std::fabs(x);
  if (law.law == Law::alaw) {
    const double denom = 1.0 + std::log(law.A);
    const double mag = (ax < 1.0 / law.A) ? law.A * ax / denom
                                          : (1.0 + std::log(law.A * ax)) / denom;
    return detail::sgn(x) * mag;
  }
  return detail::sgn(x) * std::log1p(law.mu * ax) / std::log1p(law.mu);
}

// Continuous expander, the exact inverse of compress() on [-1, 1].
inline double expand(double y, const CompandingLaw& law) {
  law.validate();
  if (!(std::fabs(y) <= 1.0))
    throw DomainError("expand: |y| > 1 (y = " + std::to_string(y) + ")");
  const double ay = std::fabs(y);
  if (law.law == Law::alaw) {
    const double denom = 1.0 + std::log(law.A);
    const double mag = (ay < 1.0 / denom) ? ay * denom / law.A
                                          : std::exp(ay * denom - 1.0) / law.A;
    return detail::sgn(y) * mag;
  }
  return detail::sgn(y) * (std::expm1(ay * std::log1p(law.mu)) / law.mu);
}

// ---------------------------------------------------------------------------
// G.711 segmented 8-bit codecs.
//
// Negative magnitudes use the one's-complement form (~x instead of -x), which
// makes the codeword of -x-1 differ from that of x in the sign bit only.
// Decoder outputs are the standard reconstruction values; note two standard
// quirks that tests pin explicitly:
//   * a-law never outputs 0 (its quantizer has no zero level; 0 encodes to
//     0xD5 which decodes to +8),
//   * mu-law has two zero codewords, 0xFF (+0) and 0x7F (-0); the encoder can
//     only ever emit 0xFF for a decoded 0, so 0x7F is the one codeword of the
//     512 that does not survive an encode(decode(c)) round trip.
// ---------------------------------------------------------------------------
namespace g711 {

inline uint8_t alaw_encode(int16_t pcm) {
  int mask, m;
  if (pcm >= 0) {
    mask = 0xD5;  // sign bit set, even bits inverted
    m = pcm >> 3;  // a-law quantizes the top 13 bits
  } else {
    mask = 0x55;
    m = (~pcm) >> 3;
  }
  int seg, q;
  if (m < 32) {
    seg = 0;
    q = m >> 1;
  } else {
    seg = 1;
    for (int top = m >> 6; top != 0; top >>= 1) ++seg;
    q = (m >> seg) & 0xF;
  }
  return static_cast<uint8_t>(((seg << 4) | q) ^ mask);
}

inline int16_t alaw_decode(uint8_t code) {
  const int u = code ^ 0x55;
  const int q = u & 0xF;
  const int seg = (u >> 4) & 0x7;
  int t = (q << 4) + 8;
  if (seg >= 1) t = (t + 0x100) << (seg - 1);
  return static_cast<int16_t>((u & 0x80) ? t : -t);
}

inline uint8_t ulaw_encode(int16_t pcm) {
  int mask, m;
  if (pcm >= 0) {
    mask = 0xFF;  // codewords are transmitted complemented
    m = (pcm >> 2) + 0x21;  // 14-bit magnitude plus bias 33
  } else {
    mask = 0x7F;
    m = ((~pcm) >> 2) + 0x21;
  }
  if (m > 0x1FFF) m = 0x1FFF;
  int seg = 0;
  for (int top = m >> 6; top != 0; top >>= 1) ++seg;
  const int q = (m >> (seg + 1)) & 0xF;
  return static_cast<uint8_t>(((seg << 4) | q) ^ mask);
}

inline int16_t ulaw_decode(uint8_t code) {
  const int u = (~code) & 0xFF;
  const int q = u & 0xF;
  const int seg = (u >> 4) & 0x7;
  const int t = (((q << 3) + 0x84) << seg) - 0x84;
  return static_cast<int16_t>((u & 0x80) ? -t : t);
}

inline uint8_t encode(int16_t pcm, Law law) {
  return law == Law::alaw ? alaw_encode(pcm) : ulaw_encode(pcm);
}

inline int16_t decode(uint8_t code, Law law) {
  return law == Law::alaw ? alaw_decode(code) : ulaw_decode(code);
}

}  // namespace g711

// Compress-then-expand a whole clip.
//
// quantized8 (the default augmentation mode): each sample crosses the int16
// bridge, the G.711 codec, and comes back; the result differs from the input
// by bounded quantization noise. Out-of-range intermediate values are clipped
// at the bridge, never wrapped.
//
// continuous: expand(compress(x)) per sample. Near-identity by construction;
// provided for analysis of the closed-form laws.
inline AudioClip companding_perturb(const AudioClip& clip, const CompandingLaw& law) {
  law.validate();
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.resize(clip.samples.size());
  if (law.mode == CompandingMode::quantized8) {
    for (size_t i = 0; i < clip.samples.size(); ++i) {
      const int16_t pcm = quantize_sample(clip.samples[i]);
      const int16_t rec = g711::decode(g711::encode(pcm, law.law), law.law);
      out.samples[i] = static_cast<double>(rec) / 32768.0;
    }
  } else {
    for (size_t i = 0; i < clip.samples.size(); ++i) {
      out.samples[i] = expand(compress(clip.samples[i], law), law);
    }
  }
  return out;
}

}  // namespace dasc

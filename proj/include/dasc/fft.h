// dasc/fft.h
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

#include <complex>
#include <vector>

#include "dasc/common.h"

namespace dasc {

// In-place iterative radix-2 Cooley-Tukey FFT. Power-of-two sizes only;
// inverse = true applies the conjugate transform and the 1/N scale.
inline void fft(std::vector<std::complex<double>>& a, bool inverse = false) {
  const size_t n = a.size();
  if (n == 0) return;
  if ((n & (n - 1)) != 0) throw DomainError("fft: size must be a power of two");

  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }

  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv;
  }
}

inline size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Averaged periodogram (Bartlett) of a real signal: power per FFT bin,
// averaged over non-overlapping frames of length nfft. Used by tests to
// verify the flatness of generated white noise.
inline std::vector<double> mean_periodogram(const std::vector<double>& x, size_t nfft) {
  if ((nfft & (nfft - 1)) != 0 || nfft == 0)
    throw DomainError("mean_periodogram: nfft must be a power of two");
  const size_t frames = x.size() / nfft;
  if (frames == 0) throw DomainError("mean_periodogram: signal shorter than one frame");
  std::vector<double> psd(nfft / 2 + 1, 0.0);
  std::vector<std::complex<double>> buf(nfft);
  for (size_t f = 0; f < frames; ++f) {
    for (size_t i = 0; i < nfft; ++i) buf[i] = std::complex<double>(x[f * nfft + i], 0.0);
    fft(buf);
    for (size_t k = 0; k <= nfft / 2; ++k) psd[k] += std::norm(buf[k]);
  }
  for (auto& v : psd) v /= static_cast<double>(frames) * static_cast<double>(nfft);
  return psd;
}

}  // namespace dasc

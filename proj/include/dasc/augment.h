// dasc/augment.h
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
// Training-set expansion. A plan is an ordered list of methods, always
// starting with identity (originals are retained); each method contributes
// one derived copy per source record, so the output record count is exactly
// len(methods) times the input count. Derived copies keep the source label:
// a companded bonafide is still bonafide, a companded spoof still spoof.
// That labeling is the whole point of the method.

#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dasc/audio.h"
#include "dasc/common.h"
#include "dasc/companding.h"
#include "dasc/protocol.h"

namespace dasc {

// Zero-mean Gaussian noise, normalized to peak |amplitude| <= 1.
// Deterministic for a fixed seed.
inline AudioClip gen_white_noise(size_t length, uint64_t seed, int sample_rate = 16000) {
  if (length == 0) throw DomainError("gen_white_noise: length must be positive");
  Rng rng(seed);
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.resize(length);
  double peak = 0.0;
  for (auto& s : clip.samples) {
    s = rng.gaussian();
    peak = std::max(peak, std::fabs(s));
  }
  if (peak > 1.0) {
    for (auto& s : clip.samples) s /= peak;
  }
  return clip;
}

struct MixResult {
  AudioClip clip;
  double gain = 0.0;              // applied to the noise
  double clipped_fraction = 0.0;  // fraction of output samples clipped to [-1,1]
};

// Adds a noise segment scaled so that 10*log10(P_signal / P_noise) hits
// snr_db. Powers are full-utterance mean squares (no voice activity
// detection). Noise shorter than the clip is tiled end to end; the segment
// offset is drawn from the seeded RNG. The caller should warn when
// clipped_fraction exceeds 1e-3.
inline MixResult mix_noise_at_snr(const AudioClip& clip, const AudioClip& noise, double snr_db,
                                  uint64_t seed) {
  if (clip.empty()) throw DomainError("mix_noise_at_snr: empty clip");
  if (std::isnan(snr_db)) throw DomainError("mix_noise_at_snr: NaN SNR");

  MixResult result;
  result.clip = clip;
  if (std::isinf(snr_db) && snr_db > 0) return result;  // infinite SNR: no noise

  const double p_sig = clip.power();
  if (p_sig <= 0.0)
    throw DomainError("mix_noise_at_snr: silent clip has undefined SNR");
  if (noise.empty() || noise.power() <= 0.0)
    throw DomainError("mix_noise_at_snr: silent noise");

  // Tile the noise if needed, then pick a random contiguous segment.
  const size_t n = clip.size();
  std::vector<double> tiled;
  const std::vector<double>* src = &noise.samples;
  if (noise.size() < n) {
    tiled.reserve(n + noise.size());
    while (tiled.size() < n) tiled.insert(tiled.end(), noise.samples.begin(), noise.samples.end());
    src = &tiled;
  }
  Rng rng(seed);
  const size_t offset = rng.uniform_index(src->size() - n + 1);

  double p_noise = 0.0;
  for (size_t i = 0; i < n; ++i) p_noise += (*src)[offset + i] * (*src)[offset + i];
  p_noise /= static_cast<double>(n);
  if (p_noise <= 0.0)
    throw DomainError("mix_noise_at_snr: chosen noise segment is silent");

  const double gain = std::sqrt(p_sig / (p_noise * std::pow(10.0, snr_db / 10.0)));
  result.gain = gain;
  size_t clipped = 0;
  for (size_t i = 0; i < n; ++i) {
    double v = clip.samples[i] + gain * (*src)[offset + i];
    if (v > 1.0) {
      v = 1.0;
      ++clipped;
    } else if (v < -1.0) {
      v = -1.0;
      ++clipped;
    }
    result.clip.samples[i] = v;
  }
  result.clipped_fraction = static_cast<double>(clipped) / static_cast<double>(n);
  return result;
}

struct AugmentationMethod {
  enum class Kind { identity, compand, noise };
  Kind kind = Kind::identity;
  CompandingLaw law;          // compand only
  std::string noise_source;   // noise only: "white" or a WAV path
  double snr_db = 20.0;       // noise only

  // Suffix appended to derived utterance ids; empty for identity.
  std::string suffix() const {
    switch (kind) {
      case Kind::identity:
        return "";
      case Kind::compand:
        return std::string("_") + law_name(law.law);
      case Kind::noise: {
        std::string src = noise_source == "white"
                              ? "white"
                              : std::filesystem::path(noise_source).stem().string();
        return "_" + src + "_snr" + std::to_string(static_cast<int>(std::lround(snr_db)));
      }
    }
    return "";
  }

  static AugmentationMethod identity() { return {}; }
  static AugmentationMethod compand(CompandingLaw law) {
    AugmentationMethod m;
    m.kind = Kind::compand;
    m.law = law;
    return m;
  }
  static AugmentationMethod noise(std::string source, double snr_db) {
    AugmentationMethod m;
    m.kind = Kind::noise;
    m.noise_source = std::move(source);
    m.snr_db = snr_db;
    return m;
  }
};

struct AugmentationPlan {
  std::vector<AugmentationMethod> methods;
  std::filesystem::path output_root;
  uint64_t seed = 1;

  void validate() const {
    if (methods.empty() || methods.front().kind != AugmentationMethod::Kind::identity)
      throw DomainError("AugmentationPlan: identity must be the first method");
    for (const auto& m : methods) {
      if (m.kind == AugmentationMethod::Kind::noise && !std::isfinite(m.snr_db))
        throw DomainError("AugmentationPlan: noise SNR must be finite");
    }
  }

  // identity + a-law + mu-law: the 3x expansion.
  static AugmentationPlan dasc(std::filesystem::path output_root, uint64_t seed,
                               CompandingMode mode = CompandingMode::quantized8) {
    AugmentationPlan plan;
    plan.methods = {AugmentationMethod::identity(),
                    AugmentationMethod::compand(CompandingLaw::alaw(mode)),
                    AugmentationMethod::compand(CompandingLaw::mulaw(mode))};
    plan.output_root = std::move(output_root);
    plan.seed = seed;
    return plan;
  }

  static AugmentationPlan noise(std::filesystem::path output_root, uint64_t seed,
                                std::string source, double snr_db) {
    AugmentationPlan plan;
    plan.methods = {AugmentationMethod::identity(),
                    AugmentationMethod::noise(std::move(source), snr_db)};
    plan.output_root = std::move(output_root);
    plan.seed = seed;
    return plan;
  }
};

struct AugmentFailure {
  std::string utt_id;
  std::string message;
};

struct AugmentResult {
  DatasetManifest manifest;  // len(methods) x input records, labels preserved
  std::vector<AugmentFailure> failures;
};

namespace detail {

// Noise clips are loaded once per plan; "white" is synthesized to a fixed
// 10 s buffer whose content depends only on the plan seed.
inline AudioClip load_noise_source(const std::string& source, uint64_t plan_seed,
                                   int sample_rate) {
  if (source == "white")
    return gen_white_noise(static_cast<size_t>(sample_rate) * 10,
                           plan_seed ^ fnv1a64("white-noise-source"), sample_rate);
  return read_wav(source);
}

}  // namespace detail

// Applies every method of the plan to every record of the manifest. Audio for
// every output record (identity included) is written under plan.output_root,
// so the result is a self-contained corpus. Per-record failures (missing or
// malformed audio) are collected and the run continues.
//
// Record processing is order-independent: each derived clip's randomness is
// seeded by plan.seed and the derived utterance id, never by scheduling.
inline AugmentResult run_augmentation(const DatasetManifest& manifest,
                                      const AugmentationPlan& plan, int jobs = 1) {
  plan.validate();
  std::filesystem::create_directories(plan.output_root);

  std::vector<std::optional<AudioClip>> noise_cache(plan.methods.size());
  for (size_t m = 0; m < plan.methods.size(); ++m) {
    if (plan.methods[m].kind == AugmentationMethod::Kind::noise)
      noise_cache[m] = detail::load_noise_source(plan.methods[m].noise_source, plan.seed, 16000);
  }

  const size_t n = manifest.records.size();
  const size_t m_count = plan.methods.size();
  std::vector<std::optional<TrialRecord>> out_records(n * m_count);
  std::vector<std::optional<AugmentFailure>> out_failures(n);

  parallel_for(n, jobs, [&](size_t i) {
    const TrialRecord& rec = manifest.records[i];
    AudioClip clip;
    try {
      clip = read_wav(manifest.audio_path(rec));
    } catch (const Error& e) {
      out_failures[i] = AugmentFailure{rec.utt_id, e.what()};
      return;
    }
    for (size_t m = 0; m < m_count; ++m) {
      const AugmentationMethod& method = plan.methods[m];
      TrialRecord derived = rec;
      derived.utt_id = rec.utt_id + method.suffix();
      AudioClip out;
      switch (method.kind) {
        case AugmentationMethod::Kind::identity:
          out = clip;
          break;
        case AugmentationMethod::Kind::compand:
          out = companding_perturb(clip, method.law);
          break;
        case AugmentationMethod::Kind::noise:
          out = mix_noise_at_snr(clip, *noise_cache[m], method.snr_db,
                                 plan.seed ^ fnv1a64(derived.utt_id))
                    .clip;
          break;
      }
      write_wav(out, plan.output_root / (derived.utt_id + ".wav"));
      out_records[i * m_count + m] = std::move(derived);
    }
  });

  AugmentResult result;
  result.manifest.subset = manifest.subset;
  result.manifest.audio_root = plan.output_root;
  for (auto& r : out_records) {
    if (r) result.manifest.records.push_back(std::move(*r));
  }
  for (auto& f : out_failures) {
    if (f) result.failures.push_back(std::move(*f));
  }
  return result;
}

// The proposed 3x expansion: identity + a-law + mu-law companding.
inline AugmentResult dasc_augment(const DatasetManifest& manifest, const AugmentationPlan& plan,
                                  int jobs = 1) {
  plan.validate();
  bool has_alaw = false, has_mulaw = false;
  for (const auto& m : plan.methods) {
    if (m.kind == AugmentationMethod::Kind::compand) {
      (m.law.law == Law::alaw ? has_alaw : has_mulaw) = true;
    }
  }
  if (plan.methods.size() != 3 || !has_alaw || !has_mulaw)
    throw DomainError("dasc_augment: plan must be identity + a-law + mu-law");
  return run_augmentation(manifest, plan, jobs);
}

}  // namespace dasc

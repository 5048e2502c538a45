// tests/augment_test.cpp
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

#include "dasc/augment.h"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dasc/fft.h"
#include "test_util.h"

using namespace dasc;
using Catch::Approx;
using dasc_test::TempDir;

namespace {

double measured_snr_db(const AudioClip& clean, const AudioClip& mixed) {
  double p_sig = 0.0, p_noise = 0.0;
  for (size_t i = 0; i < clean.size(); ++i) {
    p_sig += clean.samples[i] * clean.samples[i];
    const double d = mixed.samples[i] - clean.samples[i];
    p_noise += d * d;
  }
  return 10.0 * std::log10(p_sig / p_noise);
}

AudioClip tone(double freq, size_t n, double amp, int rate = 16000) {
  AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.resize(n);
  for (size_t i = 0; i < n; ++i)
    clip.samples[i] = amp * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / rate);
  return clip;
}

}  // namespace

TEST_CASE("gen_white_noise: deterministic under a fixed seed") {
  const AudioClip a = gen_white_noise(4096, 42);
  const AudioClip b = gen_white_noise(4096, 42);
  CHECK(a.samples == b.samples);
  const AudioClip c = gen_white_noise(4096, 43);
  CHECK(a.samples != c.samples);
  CHECK_THROWS_AS(gen_white_noise(0, 1), DomainError);
}

TEST_CASE("gen_white_noise: zero mean and bounded peak") {
  const AudioClip noise = gen_white_noise(1000000, 7);
  double mean = 0.0, peak = 0.0;
  for (double s : noise.samples) {
    mean += s;
    peak = std::max(peak, std::fabs(s));
  }
  mean /= static_cast<double>(noise.size());
  CHECK(std::fabs(mean) < 0.01);
  CHECK(peak <= 1.0);
  CHECK(peak > 0.5);  // normalization hit the actual extremum
}

TEST_CASE("gen_white_noise: flat power spectral density across octaves") {
  const AudioClip noise = gen_white_noise(1 << 20, 3);
  const auto psd = mean_periodogram(noise.samples, 1024);
  // Mean PSD over a few octave bands; flat means any two agree within 1 dB.
  auto band_mean = [&](size_t lo, size_t hi) {
    double acc = 0.0;
    for (size_t k = lo; k < hi; ++k) acc += psd[k];
    return acc / static_cast<double>(hi - lo);
  };
  const double bands[4] = {band_mean(16, 32), band_mean(32, 64), band_mean(64, 128),
                           band_mean(128, 256)};
  for (double a : bands)
    for (double b : bands) REQUIRE(std::fabs(10.0 * std::log10(a / b)) < 1.0);
}

TEST_CASE("mix_noise_at_snr: infinite SNR returns the clip untouched") {
  const AudioClip clip = tone(200.0, 2000, 0.4);
  const AudioClip noise = gen_white_noise(2000, 1);
  const MixResult r =
      mix_noise_at_snr(clip, noise, std::numeric_limits<double>::infinity(), 9);
  CHECK(r.clip.samples == clip.samples);
  CHECK(r.gain == 0.0);
}

TEST_CASE("mix_noise_at_snr: equal powers at 0 dB give unit gain") {
  AudioClip clip, noise;
  clip.samples.assign(1024, 0.0);
  noise.samples.assign(1024, 0.0);
  for (size_t i = 0; i < 1024; ++i) {
    clip.samples[i] = (i % 2) ? 0.5 : -0.5;   // power 0.25
    noise.samples[i] = (i % 2) ? -0.5 : 0.5;  // power 0.25
  }
  const MixResult r = mix_noise_at_snr(clip, noise, 0.0, 1);
  CHECK(r.gain == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mix_noise_at_snr: measured SNR lands on target") {
  Rng seeds(1234);
  for (int trial = 0; trial < 10; ++trial) {
    const AudioClip clip = tone(150.0 + 40.0 * trial, 8000, 0.3);
    const AudioClip noise = gen_white_noise(20000, 100 + trial);
    const double target = (trial % 2) ? 20.0 : 5.0;
    const MixResult r = mix_noise_at_snr(clip, noise, target, seeds.next_u64());
    REQUIRE(r.clipped_fraction == 0.0);
    REQUIRE(measured_snr_db(clip, r.clip) == Approx(target).margin(0.1));
  }
}

TEST_CASE("mix_noise_at_snr: tiles noise shorter than the clip") {
  const AudioClip clip = tone(300.0, 9000, 0.3);
  const AudioClip noise = gen_white_noise(1000, 5);
  const MixResult r = mix_noise_at_snr(clip, noise, 20.0, 77);
  CHECK(measured_snr_db(clip, r.clip) == Approx(20.0).margin(0.1));
}

TEST_CASE("mix_noise_at_snr: deterministic for a fixed seed") {
  const AudioClip clip = tone(250.0, 4000, 0.3);
  const AudioClip noise = gen_white_noise(50000, 8);
  const MixResult a = mix_noise_at_snr(clip, noise, 12.0, 5);
  const MixResult b = mix_noise_at_snr(clip, noise, 12.0, 5);
  CHECK(a.clip.samples == b.clip.samples);
}

TEST_CASE("mix_noise_at_snr: error paths") {
  AudioClip silent;
  silent.samples.assign(100, 0.0);
  const AudioClip noise = gen_white_noise(100, 1);
  CHECK_THROWS_AS(mix_noise_at_snr(silent, noise, 20.0, 1), DomainError);

  const AudioClip clip = tone(100.0, 100, 0.2);
  CHECK_THROWS_AS(mix_noise_at_snr(clip, silent, 20.0, 1), DomainError);
  AudioClip empty;
  CHECK_THROWS_AS(mix_noise_at_snr(empty, noise, 20.0, 1), DomainError);
  CHECK_THROWS_AS(mix_noise_at_snr(clip, noise, std::nan(""), 1), DomainError);
}

TEST_CASE("mix_noise_at_snr: reports the clipped fraction") {
  const AudioClip clip = tone(100.0, 4000, 0.95);
  const AudioClip noise = gen_white_noise(4000, 2);
  const MixResult r = mix_noise_at_snr(clip, noise, -3.0, 3);  // very loud noise
  CHECK(r.clipped_fraction > 0.001);
  for (double s : r.clip.samples) REQUIRE((s >= -1.0 && s <= 1.0));
}

namespace {

// Tiny on-disk corpus for augmentation runs.
struct MiniCorpus {
  TempDir tmp{"aug"};
  DatasetManifest manifest;

  explicit MiniCorpus(int n_bona = 2, int n_spoof = 2) {
    std::filesystem::create_directories(tmp / "wav");
    std::ostringstream proto;
    Rng rng(55);
    int idx = 0;
    for (int pass = 0; pass < 2; ++pass) {
      const bool bona = pass == 0;
      for (int i = 0; i < (bona ? n_bona : n_spoof); ++i) {
        const std::string utt = "U_" + std::to_string(++idx);
        AudioClip clip = tone(150.0 + 30.0 * idx, 2000, 0.3);
        for (auto& s : clip.samples) s += 0.01 * rng.gaussian();
        write_wav(clip, tmp.path() / "wav" / (utt + ".wav"));
        proto << "SPK" << idx << ' ' << utt << " - " << (bona ? "-" : "S01") << ' '
              << (bona ? "bonafide" : "spoof") << '\n';
      }
    }
    dasc_test::write_text(tmp / "proto.txt", proto.str());
    manifest = parse_protocol(tmp / "proto.txt", Subset::train, tmp.path() / "wav");
  }
};

}  // namespace

TEST_CASE("dasc_augment: triples the manifest with labels preserved") {
  MiniCorpus corpus(3, 4);
  const auto plan = AugmentationPlan::dasc(corpus.tmp / "out", 11);
  const AugmentResult result = dasc_augment(corpus.manifest, plan);

  REQUIRE(result.failures.empty());
  REQUIRE(result.manifest.records.size() == 3 * corpus.manifest.records.size());
  CHECK(result.manifest.bonafide_count() == 3 * corpus.manifest.bonafide_count());
  CHECK(result.manifest.spoof_count() == 3 * corpus.manifest.spoof_count());

  // Every source record contributes itself plus _alaw and _mulaw copies with
  // identical labels, and the audio exists on disk.
  for (size_t i = 0; i < corpus.manifest.records.size(); ++i) {
    const auto& src = corpus.manifest.records[i];
    const auto* derived = &result.manifest.records[3 * i];
    CHECK(derived[0].utt_id == src.utt_id);
    CHECK(derived[1].utt_id == src.utt_id + "_alaw");
    CHECK(derived[2].utt_id == src.utt_id + "_mulaw");
    for (int m = 0; m < 3; ++m) {
      CHECK(derived[m].key == src.key);
      CHECK(derived[m].attack_id == src.attack_id);
      CHECK(std::filesystem::exists(result.manifest.audio_path(derived[m])));
    }
  }
}

TEST_CASE("dasc_augment: derived audio equals an independent perturbation") {
  MiniCorpus corpus(2, 1);
  const auto plan = AugmentationPlan::dasc(corpus.tmp / "out", 11);
  const AugmentResult result = dasc_augment(corpus.manifest, plan);
  REQUIRE(result.failures.empty());

  for (const auto& src : corpus.manifest.records) {
    const AudioClip original = read_wav(corpus.manifest.audio_path(src));
    for (auto law : {Law::alaw, Law::mulaw}) {
      const CompandingLaw cl =
          law == Law::alaw ? CompandingLaw::alaw() : CompandingLaw::mulaw();
      const AudioClip expect = companding_perturb(original, cl);
      const AudioClip got = read_wav(corpus.tmp.path() / "out" /
                                     (src.utt_id + "_" + law_name(law) + ".wav"));
      REQUIRE(got.samples.size() == expect.samples.size());
      for (size_t i = 0; i < got.samples.size(); ++i)
        REQUIRE(got.samples[i] == Approx(expect.samples[i]).margin(1.0 / 32768.0));
    }
  }
}

TEST_CASE("dasc_augment: empty manifest stays empty") {
  TempDir tmp("aug");
  DatasetManifest empty;
  const auto plan = AugmentationPlan::dasc(tmp / "out", 1);
  const AugmentResult result = dasc_augment(empty, plan);
  CHECK(result.manifest.records.empty());
  CHECK(result.failures.empty());
}

TEST_CASE("dasc_augment: missing audio becomes a collected failure") {
  MiniCorpus corpus(2, 2);
  std::filesystem::remove(corpus.manifest.audio_path(corpus.manifest.records[1]));
  const auto plan = AugmentationPlan::dasc(corpus.tmp / "out", 11);
  const AugmentResult result = dasc_augment(corpus.manifest, plan);
  REQUIRE(result.failures.size() == 1);
  CHECK(result.failures[0].utt_id == corpus.manifest.records[1].utt_id);
  CHECK(result.manifest.records.size() == 3 * (corpus.manifest.records.size() - 1));
}

TEST_CASE("dasc_augment: rejects plans that are not identity + a-law + mu-law") {
  MiniCorpus corpus(1, 1);
  AugmentationPlan plan = AugmentationPlan::noise(corpus.tmp / "out", 1, "white", 20.0);
  CHECK_THROWS_AS(dasc_augment(corpus.manifest, plan), DomainError);

  AugmentationPlan no_identity;
  no_identity.methods = {AugmentationMethod::compand(CompandingLaw::alaw())};
  no_identity.output_root = corpus.tmp / "out";
  CHECK_THROWS_AS(no_identity.validate(), DomainError);
}

TEST_CASE("run_augmentation: noise plan doubles the manifest") {
  MiniCorpus corpus(2, 2);
  const auto plan = AugmentationPlan::noise(corpus.tmp / "out", 3, "white", 20.0);
  const AugmentResult result = run_augmentation(corpus.manifest, plan);
  REQUIRE(result.failures.empty());
  REQUIRE(result.manifest.records.size() == 2 * corpus.manifest.records.size());
  CHECK(result.manifest.records[1].utt_id == corpus.manifest.records[0].utt_id + "_white_snr20");

  // Derived audio sits at the requested SNR.
  const AudioClip original = read_wav(corpus.manifest.audio_path(corpus.manifest.records[0]));
  const AudioClip mixed = read_wav(result.manifest.audio_path(result.manifest.records[1]));
  CHECK(measured_snr_db(original, mixed) == Approx(20.0).margin(0.15));
}

TEST_CASE("run_augmentation: byte-identical across runs and thread counts") {
  MiniCorpus corpus(2, 2);
  const auto plan_a = AugmentationPlan::dasc(corpus.tmp / "out_a", 11);
  const auto plan_b = AugmentationPlan::dasc(corpus.tmp / "out_b", 11);
  dasc_augment(corpus.manifest, plan_a, 1);
  dasc_augment(corpus.manifest, plan_b, 4);

  for (const auto& entry : std::filesystem::directory_iterator(corpus.tmp / "out_a")) {
    const auto name = entry.path().filename();
    std::ifstream fa(entry.path(), std::ios::binary);
    std::ifstream fb(corpus.tmp.path() / "out_b" / name, std::ios::binary);
    REQUIRE(fb.good());
    const std::string ba((std::istreambuf_iterator<char>(fa)), {});
    const std::string bb((std::istreambuf_iterator<char>(fb)), {});
    REQUIRE(ba == bb);
  }
}

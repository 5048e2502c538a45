// dasc/fixture.h
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
// Synthetic fixture corpus, small enough that the whole pipeline runs in CI
// in well under two minutes. "Bonafide" clips are harmonic tone stacks with
// a very low noise floor; "spoof" clips carry two artifacts a cheap vocoder
// would leave behind: a strong low-rate amplitude buzz (robust to any codec)
// and a mildly raised noise floor. The floor gap is placed just below G.711
// quantization noise on purpose: a model trained only on clean data can
// lean on the floor level and is misled when test audio passes through a
// companding channel, while a model trained on companded copies has to use
// the buzz and stays stable. This reproduces, at desk scale, the direction
// of the effect the augmentation exists for.
//
// Alongside the clean eval set, a companded variant of every eval clip is
// written under wav/eval_channel, simulating an unseen transmission channel.

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dasc/audio.h"
#include "dasc/common.h"
#include "dasc/companding.h"
#include "dasc/protocol.h"

namespace dasc {

struct FixtureConfig {
  int train_bonafide = 12, train_spoof = 12;
  int dev_bonafide = 6, dev_spoof = 6;
  int eval_bonafide = 16, eval_spoof = 16;
  double clip_seconds = 0.8;
  int sample_rate = 16000;
  uint64_t seed = 1;
  Law channel_law = Law::alaw;    // applied to the eval_channel copies
  double bona_floor_db = -65.0;   // noise floor of genuine clips, dBFS
  double spoof_floor_db = -58.0;  // center of the spoof floor range, dBFS
  double spoof_tone_db = -23.0;   // vocoder-style carrier whine on spoofs, dBFS
  double spoof_tone_hz_lo = 2900.0;
  double spoof_tone_hz_hi = 3300.0;
};

struct FixturePaths {
  std::filesystem::path root;
  std::filesystem::path train_protocol, dev_protocol, eval_protocol;
  std::filesystem::path train_audio, dev_audio, eval_audio, eval_channel_audio;
  std::filesystem::path asv_operating_point;
  std::filesystem::path pipeline_config;
};

namespace fixture_detail {

// One synthetic utterance: harmonic stack with vibrato and fades. Spoofs add
// the vocoder buzz (amplitude modulation) and a raised Gaussian floor.
inline AudioClip synth_utterance(Rng& rng, bool bonafide, const FixtureConfig& cfg) {
  const size_t n = static_cast<size_t>(cfg.clip_seconds * cfg.sample_rate);
  AudioClip clip;
  clip.sample_rate = cfg.sample_rate;
  clip.samples.assign(n, 0.0);

  const double f0 = rng.uniform(120.0, 260.0);
  const int harmonics = 4 + static_cast<int>(rng.uniform_index(3));
  const double rms_target = std::pow(10.0, rng.uniform(-18.0, -14.0) / 20.0);
  double inv_sq = 0.0;
  for (int h = 1; h <= harmonics; ++h) inv_sq += 1.0 / (h * h);
  const double a1 = rms_target * std::sqrt(2.0 / inv_sq);

  std::vector<double> phases(harmonics);
  for (auto& p : phases) p = rng.uniform(0.0, 2.0 * M_PI);
  const double vibrato_phase = rng.uniform(0.0, 2.0 * M_PI);
  const double am_phase = rng.uniform(0.0, 2.0 * M_PI);

  const double floor_db = bonafide
                              ? cfg.bona_floor_db
                              : rng.uniform(cfg.spoof_floor_db - 1.5, cfg.spoof_floor_db + 1.5);
  const double floor_sigma = std::pow(10.0, floor_db / 20.0);

  const double fade = 0.05 * cfg.sample_rate;
  double phase = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / cfg.sample_rate;
    const double f_inst = f0 * (1.0 + 0.01 * std::sin(2.0 * M_PI * 5.0 * t + vibrato_phase));
    phase += 2.0 * M_PI * f_inst / cfg.sample_rate;
    double v = 0.0;
    for (int h = 1; h <= harmonics; ++h)
      v += a1 / h * std::sin(h * phase + phases[h - 1]);
    if (!bonafide)
      v *= 1.0 + cfg.spoof_am_depth * std::sin(2.0 * M_PI * cfg.spoof_am_hz * t + am_phase);
    double env = 1.0;
    if (i < fade) env = 0.5 - 0.5 * std::cos(M_PI * i / fade);
    const size_t from_end = n - 1 - i;
    if (from_end < fade) env = std::min(env, 0.5 - 0.5 * std::cos(M_PI * from_end / fade));
    clip.samples[i] = v * env + floor_sigma * rng.gaussian();
  }
  return clip;
}

struct SubsetPlan {
  std::string tag;  // T, D, E
  int bonafide = 0;
  int spoof = 0;
  std::filesystem::path audio_dir;
  std::filesystem::path protocol_path;
};

inline void write_subset(const SubsetPlan& plan, Subset subset, const FixtureConfig& cfg,
                         DatasetManifest* out_manifest) {
  std::filesystem::create_directories(plan.audio_dir);
  DatasetManifest manifest;
  manifest.subset = subset;
  manifest.audio_root = plan.audio_dir;
  int counter = 0;
  for (int pass = 0; pass < 2; ++pass) {
    const bool bonafide = pass == 0;
    const int count = bonafide ? plan.bonafide : plan.spoof;
    for (int i = 0; i < count; ++i) {
      TrialRecord rec;
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%04d", ++counter);
      rec.utt_id = "FX_" + plan.tag + "_" + buf;
      rec.speaker_id = "FS_" + std::to_string(1 + (counter % 7));
      rec.field3 = "-";
      rec.key = bonafide ? Key::bonafide : Key::spoof;
      rec.attack_id = bonafide ? "-" : ((i % 2) ? "S02" : "S01");
      Rng rng(cfg.seed ^ fnv1a64(rec.utt_id));
      const AudioClip clip = synth_utterance(rng, bonafide, cfg);
      write_wav(clip, manifest.audio_path(rec));
      manifest.records.push_back(std::move(rec));
    }
  }
  write_protocol(manifest, plan.protocol_path);
  if (out_manifest) *out_manifest = std::move(manifest);
}

}  // namespace fixture_detail

// Builds the corpus under root and returns the paths. Deterministic for a
// fixed FixtureConfig.
inline FixturePaths make_fixture(const std::filesystem::path& root, const FixtureConfig& cfg = {}) {
  namespace fs = std::filesystem;
  FixturePaths paths;
  paths.root = root;
  paths.train_protocol = root / "protocols" / "train.txt";
  paths.dev_protocol = root / "protocols" / "dev.txt";
  paths.eval_protocol = root / "protocols" / "eval.txt";
  paths.train_audio = root / "wav" / "train";
  paths.dev_audio = root / "wav" / "dev";
  paths.eval_audio = root / "wav" / "eval";
  paths.eval_channel_audio = root / "wav" / "eval_channel";
  paths.asv_operating_point = root / "asv_op.txt";
  paths.pipeline_config = root / "pipeline.ini";
  fs::create_directories(root / "protocols");

  fixture_detail::write_subset(
      {"T", cfg.train_bonafide, cfg.train_spoof, paths.train_audio, paths.train_protocol},
      Subset::train, cfg, nullptr);
  fixture_detail::write_subset(
      {"D", cfg.dev_bonafide, cfg.dev_spoof, paths.dev_audio, paths.dev_protocol},
      Subset::development, cfg, nullptr);
  DatasetManifest eval_manifest;
  fixture_detail::write_subset(
      {"E", cfg.eval_bonafide, cfg.eval_spoof, paths.eval_audio, paths.eval_protocol},
      Subset::evaluation, cfg, &eval_manifest);

  // Companded copy of the eval set: same protocol, different audio root.
  fs::create_directories(paths.eval_channel_audio);
  const CompandingLaw channel = cfg.channel_law == Law::alaw ? CompandingLaw::alaw()
                                                             : CompandingLaw::mulaw();
  for (const auto& rec : eval_manifest.records) {
    const AudioClip clip = read_wav(eval_manifest.audio_path(rec));
    write_wav(companding_perturb(clip, channel), paths.eval_channel_audio / (rec.utt_id + ".wav"));
  }

  {
    std::ofstream out(paths.asv_operating_point);
    out << "# fixed ASV operating point for the fixture corpus\n";
    out << "p_miss_asv 0.05\n";
    out << "p_fa_asv 0.05\n";
    out << "p_miss_spoof_asv 0.5\n";
  }

  {
    std::ofstream out(paths.pipeline_config);
    out << "[pipeline]\n"
        << "seed = " << cfg.seed << "\n"
        << "jobs = 1\n"
        << "output_dir = out\n\n"
        << "[dataset]\n"
        << "train_protocol = protocols/train.txt\n"
        << "train_audio = wav/train\n"
        << "dev_protocol = protocols/dev.txt\n"
        << "dev_audio = wav/dev\n"
        << "eval_protocol = protocols/eval.txt\n"
        << "eval_audio = wav/eval\n"
        << "sample_rate = " << cfg.sample_rate << "\n\n"
        << "[augment]\n"
        << "plan = dasc\n"
        << "mode = quantized8\n\n"
        << "[cqt]\n"
        << "hop = 128\n"
        << "frames = 550\n\n"
        << "[model]\n"
        << "arch = bn conv:8:3:2 mfm pool:2 bn conv:16:3:2 mfm pool:2 flatten dense:32 mfm dense:2\n\n"
        << "[train]\n"
        << "batch_size = 16\n"
        << "epochs = 12\n"
        << "learning_rate = 0.003\n"
        << "optimizer = adam\n\n"
        << "[tdcf]\n"
        << "asv_operating_point = asv_op.txt\n";
  }
  return paths;
}

}  // namespace dasc

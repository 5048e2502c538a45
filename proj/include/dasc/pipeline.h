// dasc/pipeline.h
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
// Pipeline stages behind the CLI: augment -> featurize -> train -> score ->
// evaluate. Stages communicate only through files under the configured
// output directory, so they compose and rerun cleanly:
//
//   <out>/augment/           derived WAVs + train.txt + failures.txt
//   <out>/features/<set>/    one .cqt file per utterance
//   <out>/model.ckpt         best checkpoint + train_log.txt
//   <out>/scores.txt         UTT_ID SCORE per eval trial
//   <out>/eval_result.txt    EER / min t-DCF summary + det.csv

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "dasc/augment.h"
#include "dasc/common.h"
#include "dasc/config.h"
#include "dasc/cqt.h"
#include "dasc/lcnn.h"
#include "dasc/metrics.h"
#include "dasc/protocol.h"
#include "dasc/train.h"

namespace dasc {

struct StageSummary {
  size_t processed = 0;
  size_t skipped = 0;
  std::vector<std::string> failures;  // human-readable, also written to a report file
  bool ok() const { return failures.empty(); }
};

namespace pipeline_detail {

inline std::filesystem::path augment_dir(const PipelineConfig& cfg) {
  return cfg.output_dir / "augment";
}
inline std::filesystem::path augmented_protocol(const PipelineConfig& cfg) {
  return augment_dir(cfg) / "train.txt";
}
inline std::filesystem::path features_dir(const PipelineConfig& cfg, const std::string& set) {
  return cfg.output_dir / "features" / set;
}

// The training manifest is the augmented one when the augment stage has run.
inline DatasetManifest train_manifest(const PipelineConfig& cfg) {
  if (std::filesystem::exists(augmented_protocol(cfg)))
    return parse_protocol(augmented_protocol(cfg), Subset::train, augment_dir(cfg));
  return parse_protocol(cfg.train_protocol, Subset::train, cfg.train_audio);
}

inline void write_failures(const std::vector<std::string>& failures,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  for (const auto& f : failures) out << f << '\n';
}

}  // namespace pipeline_detail

// Expands the training set per the configured plan and writes the derived
// corpus under <out>/augment. Per-record failures are reported, not fatal.
inline StageSummary cmd_augment(const PipelineConfig& cfg) {
  cfg.validate_inputs();
  StageSummary summary;
  const DatasetManifest train = parse_protocol(cfg.train_protocol, Subset::train, cfg.train_audio);

  AugmentationPlan plan;
  plan.output_root = pipeline_detail::augment_dir(cfg);
  plan.seed = cfg.seed;
  switch (cfg.augment_plan) {
    case AugmentPlanKind::none: {
      // Nothing to derive; later stages fall back to the original manifest.
      summary.processed = 0;
      return summary;
    }
    case AugmentPlanKind::dasc:
      plan.methods = {AugmentationMethod::identity(),
                      AugmentationMethod::compand(cfg.make_law(Law::alaw)),
                      AugmentationMethod::compand(cfg.make_law(Law::mulaw))};
      break;
    case AugmentPlanKind::noise:
      plan.methods = {AugmentationMethod::identity(),
                      AugmentationMethod::noise(cfg.noise_source, cfg.snr_db)};
      break;
  }

  AugmentResult result = cfg.augment_plan == AugmentPlanKind::dasc
                             ? dasc_augment(train, plan, cfg.jobs)
                             : run_augmentation(train, plan, cfg.jobs);
  write_protocol(result.manifest, pipeline_detail::augmented_protocol(cfg));
  summary.processed = result.manifest.records.size();
  for (const auto& f : result.failures) summary.failures.push_back(f.utt_id + ": " + f.message);
  pipeline_detail::write_failures(summary.failures,
                                  pipeline_detail::augment_dir(cfg) / "failures.txt");
  return summary;
}

// Extracts one fixed-size feature file per utterance for train (augmented
// when present), development and evaluation sets. Existing files are skipped
// when skip_existing is set, making the stage idempotent.
inline StageSummary cmd_featurize(const PipelineConfig& cfg) {
  cfg.validate_inputs();
  StageSummary summary;
  const CqtKernelBank bank(cfg.cqt, cfg.sample_rate);

  struct Job {
    std::string set;
    DatasetManifest manifest;
  };
  std::vector<Job> jobs;
  jobs.push_back({"train", pipeline_detail::train_manifest(cfg)});
  jobs.push_back({"dev", parse_protocol(cfg.dev_protocol, Subset::development, cfg.dev_audio)});
  jobs.push_back({"eval", parse_protocol(cfg.eval_protocol, Subset::evaluation, cfg.eval_audio)});

  for (const auto& job : jobs) {
    const auto dir = pipeline_detail::features_dir(cfg, job.set);
    std::filesystem::create_directories(dir);
    const size_t n = job.manifest.records.size();
    std::vector<std::string> failures(n);
    std::vector<uint8_t> skipped(n, 0);
    parallel_for(n, cfg.jobs, [&](size_t i) {
      const auto& rec = job.manifest.records[i];
      const auto out_path = dir / (rec.utt_id + ".cqt");
      if (cfg.featurize_skip_existing && std::filesystem::exists(out_path)) {
        skipped[i] = 1;
        return;
      }
      try {
        const AudioClip clip = read_wav(job.manifest.audio_path(rec));
        if (clip.sample_rate != cfg.sample_rate)
          throw FormatError(rec.utt_id + ": sample rate " + std::to_string(clip.sample_rate) +
                            " does not match configured " + std::to_string(cfg.sample_rate));
        FeatureMatrix lps = bank.lps(clip, cfg.cqt_use_fft);
        FeatureMatrix fixed = fix_length(lps, cfg.cqt.target_frames, cfg.cqt.pad_mode);
        fixed.utt_id = rec.utt_id;
        write_feature_file(fixed, out_path);
      } catch (const Error& e) {
        failures[i] = std::string(e.what());
      }
    });
    for (size_t i = 0; i < n; ++i) {
      if (!failures[i].empty())
        summary.failures.push_back(job.set + "/" + job.manifest.records[i].utt_id + ": " +
                                   failures[i]);
      else if (skipped[i])
        ++summary.skipped;
      else
        ++summary.processed;
    }
  }
  pipeline_detail::write_failures(summary.failures, cfg.output_dir / "featurize_failures.txt");
  return summary;
}

namespace pipeline_detail {

inline std::vector<LabeledExample> load_examples(const DatasetManifest& manifest,
                                                 const std::filesystem::path& feature_dir,
                                                 std::vector<std::string>* failures) {
  std::vector<LabeledExample> examples;
  for (const auto& rec : manifest.records) {
    try {
      LabeledExample ex;
      ex.features = read_feature_file(feature_dir / (rec.utt_id + ".cqt"));
      ex.label = rec.key == Key::bonafide ? kLabelBonafide : kLabelSpoof;
      ex.utt_id = rec.utt_id;
      examples.push_back(std::move(ex));
    } catch (const Error& e) {
      if (failures) failures->push_back(rec.utt_id + ": " + e.what());
    }
  }
  return examples;
}

}  // namespace pipeline_detail

// Trains on the (augmented) training features, selects the best epoch by
// development EER and writes model.ckpt plus train_log.txt.
inline TrainResult cmd_train(const PipelineConfig& cfg) {
  cfg.validate_inputs();
  const DatasetManifest train_m = pipeline_detail::train_manifest(cfg);
  const DatasetManifest dev_m = parse_protocol(cfg.dev_protocol, Subset::development, cfg.dev_audio);

  std::vector<std::string> missing;
  auto train_set =
      pipeline_detail::load_examples(train_m, pipeline_detail::features_dir(cfg, "train"), &missing);
  auto dev_set =
      pipeline_detail::load_examples(dev_m, pipeline_detail::features_dir(cfg, "dev"), &missing);
  if (!missing.empty())
    throw DataError("cmd_train: missing features (run the featurize stage first); first: " +
                    missing.front());

  TrainResult result = train(cfg.model_spec(), train_set, dev_set, cfg.train);
  std::filesystem::create_directories(cfg.output_dir);
  result.model.save(cfg.output_dir / "model.ckpt");
  write_train_log(result.log, result.best_epoch, cfg.output_dir / "train_log.txt");
  return result;
}

// Scores the evaluation set with the trained checkpoint.
inline StageSummary cmd_score(const PipelineConfig& cfg) {
  cfg.validate_inputs();
  const auto ckpt = cfg.output_dir / "model.ckpt";
  if (!std::filesystem::exists(ckpt))
    throw DataError("cmd_score: " + ckpt.string() + " not found (run the train stage first)");
  const Model model = Model::load(ckpt);
  const DatasetManifest eval_m =
      parse_protocol(cfg.eval_protocol, Subset::evaluation, cfg.eval_audio);

  ScoreSetResult scored =
      score_set(model, eval_m, pipeline_detail::features_dir(cfg, "eval"), cfg.jobs);
  write_score_file(scored.scores, cfg.output_dir / "scores.txt");
  StageSummary summary;
  summary.processed = scored.scores.size();
  for (const auto& f : scored.failures) summary.failures.push_back(f.utt_id + ": " + f.message);
  pipeline_detail::write_failures(summary.failures, cfg.output_dir / "score_failures.txt");
  return summary;
}

// Joins scores with ground truth; writes eval_result.txt and det.csv.
inline EvalResult cmd_evaluate(const PipelineConfig& cfg) {
  cfg.validate_inputs();
  const auto score_path = cfg.output_dir / "scores.txt";
  if (!std::filesystem::exists(score_path))
    throw DataError("cmd_evaluate: " + score_path.string() +
                    " not found (run the score stage first)");
  const auto scores = read_score_file(score_path);
  const DatasetManifest eval_m =
      parse_protocol(cfg.eval_protocol, Subset::evaluation, cfg.eval_audio);
  const EvalResult result = evaluate_scores(scores, eval_m, cfg.tdcf);

  std::ofstream out(cfg.output_dir / "eval_result.txt");
  out.precision(9);
  out << "eer " << result.eer << '\n';
  out << "eer_percent " << result.eer * 100.0 << '\n';
  out << "min_tdcf " << result.min_tdcf << '\n';
  out << "eer_threshold " << result.eer_threshold << '\n';
  write_det_csv(result.det_points, cfg.output_dir / "det.csv");
  return result;
}

}  // namespace dasc

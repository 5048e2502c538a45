// tests/pipeline_test.cpp
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

#include "dasc/pipeline.h"

#include <catch2/catch_amalgamated.hpp>
#include <fstream>

#include "dasc/fixture.h"
#include "test_util.h"

using namespace dasc;
using dasc_test::TempDir;
using dasc_test::write_text;

namespace {

// Small fixture + short training so the whole file stays fast.
FixtureConfig tiny_fixture() {
  FixtureConfig cfg;
  cfg.train_bonafide = 4;
  cfg.train_spoof = 4;
  cfg.dev_bonafide = 2;
  cfg.dev_spoof = 2;
  cfg.eval_bonafide = 3;
  cfg.eval_spoof = 3;
  cfg.clip_seconds = 0.3;
  cfg.seed = 9;
  return cfg;
}

PipelineConfig tiny_pipeline(const FixturePaths& paths, int epochs = 2) {
  PipelineConfig cfg = PipelineConfig::load(paths.pipeline_config);
  cfg.train.epochs = epochs;
  cfg.train.batch_size = 4;
  return cfg;
}

}  // namespace

TEST_CASE("config file: sections, comments and whitespace") {
  TempDir tmp("cfg");
  write_text(tmp / "c.ini",
             "# comment\n"
             "[pipeline]\n"
             "seed = 42\n"
             "; another comment\n"
             "[model]\n"
             "arch = conv:8:3 mfm pool:2 flatten dense:2\n"
             "[flags]\n"
             "on = true\n"
             "off = no\n");
  const ConfigFile f = ConfigFile::load(tmp / "c.ini");
  CHECK(f.get_int("pipeline", "seed", 0) == 42);
  CHECK(f.get("model", "arch", "") == "conv:8:3 mfm pool:2 flatten dense:2");
  CHECK(f.get_bool("flags", "on", false));
  CHECK(!f.get_bool("flags", "off", true));
  CHECK(f.get("missing", "key", "fallback") == "fallback");

  write_text(tmp / "bad.ini", "[pipeline\nseed = 1\n");
  CHECK_THROWS_AS(ConfigFile::load(tmp / "bad.ini"), ParseError);
  write_text(tmp / "noeq.ini", "[p]\njust words\n");
  CHECK_THROWS_AS(ConfigFile::load(tmp / "noeq.ini"), ParseError);
  write_text(tmp / "badnum.ini", "[pipeline]\nseed = abc\n");
  const ConfigFile g = ConfigFile::load(tmp / "badnum.ini");
  CHECK_THROWS_AS(g.get_int("pipeline", "seed", 0), ParseError);
}

TEST_CASE("pipeline config: defaults and validation") {
  TempDir tmp("cfg");
  write_text(tmp / "p.ini", "[pipeline]\nseed = 7\n");
  const PipelineConfig cfg = PipelineConfig::load(tmp / "p.ini");
  CHECK(cfg.seed == 7);
  CHECK(cfg.cqt.num_bins() == 84);
  CHECK(cfg.cqt.target_frames == 550);
  CHECK(cfg.tdcf.pi_tar == 0.9405);
  CHECK(cfg.augment_plan == AugmentPlanKind::dasc);
  // Inputs do not exist, so stage validation must fail loudly.
  CHECK_THROWS_AS(cfg.validate_inputs(), DataError);

  write_text(tmp / "badplan.ini", "[augment]\nplan = wat\n");
  CHECK_THROWS_AS(PipelineConfig::load(tmp / "badplan.ini"), ParseError);
}

TEST_CASE("fixture: generates a coherent corpus") {
  TempDir tmp("fx");
  const FixtureConfig fcfg = tiny_fixture();
  const FixturePaths paths = make_fixture(tmp.path(), fcfg);

  const auto train = parse_protocol(paths.train_protocol, Subset::train, paths.train_audio);
  const auto dev = parse_protocol(paths.dev_protocol, Subset::development, paths.dev_audio);
  const auto eval = parse_protocol(paths.eval_protocol, Subset::evaluation, paths.eval_audio);
  CHECK(train.bonafide_count() == 4);
  CHECK(train.spoof_count() == 4);
  CHECK(dev.records.size() == 4);
  CHECK(eval.records.size() == 6);
  CHECK_NOTHROW(check_disjoint({&train, &dev, &eval}));

  for (const auto& rec : train.records) {
    const AudioClip clip = read_wav(train.audio_path(rec));
    CHECK(clip.sample_rate == 16000);
    CHECK(clip.size() == static_cast<size_t>(0.3 * 16000));
  }
  // Channel copies exist for every eval utterance and differ from the clean ones.
  for (const auto& rec : eval.records) {
    const auto channel_path = paths.eval_channel_audio / (rec.utt_id + ".wav");
    REQUIRE(std::filesystem::exists(channel_path));
    const AudioClip clean = read_wav(eval.audio_path(rec));
    const AudioClip chan = read_wav(channel_path);
    REQUIRE(chan.size() == clean.size());
    CHECK(chan.samples != clean.samples);
  }

  // Determinism: regenerating yields byte-identical audio.
  TempDir tmp2("fx2");
  const FixturePaths paths2 = make_fixture(tmp2.path(), fcfg);
  const auto& rec = train.records.front();
  std::ifstream a(paths.train_audio / (rec.utt_id + ".wav"), std::ios::binary);
  std::ifstream b(paths2.train_audio / (rec.utt_id + ".wav"), std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(a)), {});
  const std::string bb((std::istreambuf_iterator<char>(b)), {});
  CHECK(ba == bb);
}

TEST_CASE("pipeline: augment -> featurize -> train -> score -> evaluate") {
  TempDir tmp("pipe");
  const FixturePaths paths = make_fixture(tmp.path(), tiny_fixture());
  PipelineConfig cfg = tiny_pipeline(paths);

  // augment: 3x the 8 train records.
  const StageSummary aug = cmd_augment(cfg);
  CHECK(aug.ok());
  CHECK(aug.processed == 24);
  const auto aug_manifest =
      parse_protocol(tmp.path() / "out" / "augment" / "train.txt", Subset::train);
  CHECK(aug_manifest.records.size() == 24);
  CHECK(aug_manifest.bonafide_count() == 12);

  // featurize: all three subsets, fixed 84x550 shape.
  const StageSummary feat = cmd_featurize(cfg);
  CHECK(feat.ok());
  CHECK(feat.processed == 24 + 4 + 6);
  const FeatureMatrix f = read_feature_file(tmp.path() / "out" / "features" / "train" /
                                            (aug_manifest.records[1].utt_id + ".cqt"));
  CHECK(f.rows == 84);
  CHECK(f.cols == 550);

  // featurize again: skip-if-exists makes it a no-op.
  const StageSummary feat2 = cmd_featurize(cfg);
  CHECK(feat2.processed == 0);
  CHECK(feat2.skipped == 34);

  // train / score / evaluate.
  const TrainResult tr = cmd_train(cfg);
  CHECK(std::filesystem::exists(tmp.path() / "out" / "model.ckpt"));
  CHECK(std::filesystem::exists(tmp.path() / "out" / "train_log.txt"));
  CHECK(static_cast<int>(tr.log.size()) <= cfg.train.epochs);

  const StageSummary sc = cmd_score(cfg);
  CHECK(sc.ok());
  CHECK(sc.processed == 6);
  const auto scores = read_score_file(tmp.path() / "out" / "scores.txt");
  CHECK(scores.size() == 6);

  const EvalResult ev = cmd_evaluate(cfg);
  CHECK(std::isfinite(ev.eer));
  CHECK(std::isfinite(ev.min_tdcf));
  CHECK(std::filesystem::exists(tmp.path() / "out" / "eval_result.txt"));
  CHECK(std::filesystem::exists(tmp.path() / "out" / "det.csv"));
}

TEST_CASE("pipeline: stages demand their upstream artifacts") {
  TempDir tmp("pipe");
  const FixturePaths paths = make_fixture(tmp.path(), tiny_fixture());
  PipelineConfig cfg = tiny_pipeline(paths);
  CHECK_THROWS_AS(cmd_score(cfg), DataError);     // no checkpoint yet
  CHECK_THROWS_AS(cmd_evaluate(cfg), DataError);  // no scores yet
  CHECK_THROWS_AS(cmd_train(cfg), DataError);     // no features yet
}

TEST_CASE("pipeline: scoring is deterministic across reruns") {
  TempDir tmp("pipe");
  const FixturePaths paths = make_fixture(tmp.path(), tiny_fixture());
  PipelineConfig cfg = tiny_pipeline(paths);
  cmd_augment(cfg);
  cmd_featurize(cfg);
  cmd_train(cfg);
  cmd_score(cfg);
  std::ifstream s1(tmp.path() / "out" / "scores.txt");
  const std::string first((std::istreambuf_iterator<char>(s1)), {});
  cmd_score(cfg);
  std::ifstream s2(tmp.path() / "out" / "scores.txt");
  const std::string second((std::istreambuf_iterator<char>(s2)), {});
  CHECK(first == second);
  CHECK(!first.empty());
}

TEST_CASE("pipeline: augment plan none leaves later stages on the originals") {
  TempDir tmp("pipe");
  const FixturePaths paths = make_fixture(tmp.path(), tiny_fixture());
  PipelineConfig cfg = tiny_pipeline(paths);
  cfg.augment_plan = AugmentPlanKind::none;
  const StageSummary aug = cmd_augment(cfg);
  CHECK(aug.processed == 0);
  const StageSummary feat = cmd_featurize(cfg);
  CHECK(feat.processed == 8 + 4 + 6);  // un-augmented train set
}

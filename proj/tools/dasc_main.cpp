// tools/dasc_main.cpp
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
// Command-line front end. Exit codes: 0 success, 1 usage error, 2 data error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dasc/config.h"
#include "dasc/fixture.h"
#include "dasc/pipeline.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct CommonArgs {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<int> jobs;
};

dasc::PipelineConfig load_config(const CommonArgs& args) {
  dasc::PipelineConfig cfg = dasc::PipelineConfig::load(args.config_path);
  if (args.seed) {
    cfg.seed = *args.seed;
    cfg.train.seed = *args.seed;
  }
  if (args.jobs) cfg.jobs = *args.jobs;
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path, "pipeline config file")->required();
  cmd->add_option("--seed", args->seed, "override the global seed");
  cmd->add_option("--jobs", args->jobs, "worker threads for per-record stages");
}

int report(const dasc::StageSummary& summary, const char* verb) {
  std::printf("%s %zu records (%zu skipped)\n", verb, summary.processed, summary.skipped);
  if (!summary.ok()) {
    std::fprintf(stderr, "%zu failures:\n", summary.failures.size());
    for (const auto& f : summary.failures) std::fprintf(stderr, "  %s\n", f.c_str());
    return kExitData;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"signal-companding data augmentation pipeline for synthetic-speech detection"};
  app.require_subcommand(1);

  CommonArgs args;
  auto* augment = app.add_subcommand("augment", "expand the training set per the configured plan");
  add_common(augment, &args);
  auto* featurize = app.add_subcommand("featurize", "extract fixed-size CQT log-power features");
  add_common(featurize, &args);
  auto* train = app.add_subcommand("train", "train the LCNN classifier");
  add_common(train, &args);
  auto* score = app.add_subcommand("score", "score the evaluation set with the checkpoint");
  add_common(score, &args);
  auto* evaluate = app.add_subcommand("evaluate", "compute EER and min t-DCF from scores");
  add_common(evaluate, &args);

  std::string fixture_out;
  uint64_t fixture_seed = 1;
  auto* fixture = app.add_subcommand("fixture", "generate the synthetic demo corpus");
  fixture->add_option("--out", fixture_out, "output directory")->required();
  fixture->add_option("--seed", fixture_seed, "corpus seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (fixture->parsed()) {
      dasc::FixtureConfig fcfg;
      fcfg.seed = fixture_seed;
      const auto paths = dasc::make_fixture(fixture_out, fcfg);
      std::printf("fixture corpus written to %s\n", paths.root.string().c_str());
      std::printf("pipeline config: %s\n", paths.pipeline_config.string().c_str());
      return kExitOk;
    }

    const dasc::PipelineConfig cfg = load_config(args);
    if (augment->parsed()) return report(dasc::cmd_augment(cfg), "augmented");
    if (featurize->parsed()) return report(dasc::cmd_featurize(cfg), "featurized");
    if (train->parsed()) {
      const auto result = dasc::cmd_train(cfg);
      std::printf("trained %d epochs; final loss %.6f; best epoch %d\n",
                  result.log.empty() ? 0 : result.log.back().epoch,
                  result.log.empty() ? 0.0 : result.log.back().train_loss, result.best_epoch);
      std::printf("checkpoint: %s\n", (cfg.output_dir / "model.ckpt").string().c_str());
      return kExitOk;
    }
    if (score->parsed()) return report(dasc::cmd_score(cfg), "scored");
    if (evaluate->parsed()) {
      const auto result = dasc::cmd_evaluate(cfg);
      std::printf("EER (%%) = %.4f\n", result.eer * 100.0);
      std::printf("min t-DCF = %.6f\n", result.min_tdcf);
      std::printf("report: %s\n", (cfg.output_dir / "eval_result.txt").string().c_str());
      return kExitOk;
    }
  } catch (const dasc::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}

// dasc/config.h
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
// Pipeline configuration: one INI-style file with sections. Every
// hyperparameter the underlying experiment leaves open surfaces here, so a
// run is fully described by (config file, seed).

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "dasc/augment.h"
#include "dasc/common.h"
#include "dasc/companding.h"
#include "dasc/cqt.h"
#include "dasc/lcnn.h"
#include "dasc/metrics.h"
#include "dasc/train.h"

namespace dasc {

// Minimal INI reader: [section], key = value, full-line comments with # or ;.
// Values run to end of line so architecture strings may contain spaces.
class ConfigFile {
 public:
  static ConfigFile load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config file: " + path.string());
    ConfigFile cfg;
    cfg.path_ = path;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#' || t[0] == ';') continue;
      if (t.front() == '[') {
        if (t.back() != ']')
          throw ParseError(path.string() + ": malformed section header", lineno);
        section = trim(t.substr(1, t.size() - 2));
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ParseError(path.string() + ": expected 'key = value'", lineno);
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty()) throw ParseError(path.string() + ": empty key", lineno);
      cfg.values_[section][key] = value;
    }
    return cfg;
  }

  std::optional<std::string> find(const std::string& section, const std::string& key) const {
    auto s = values_.find(section);
    if (s == values_.end()) return std::nullopt;
    auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    return k->second;
  }

  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const {
    auto v = find(section, key);
    return v ? *v : fallback;
  }

  double get_double(const std::string& section, const std::string& key, double fallback) const {
    auto v = find(section, key);
    if (!v) return fallback;
    try {
      size_t pos = 0;
      const double d = std::stod(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("");
      return d;
    } catch (...) {
      throw ParseError(path_.string() + ": [" + section + "] " + key + " = '" + *v +
                       "' is not a number");
    }
  }

  long get_int(const std::string& section, const std::string& key, long fallback) const {
    auto v = find(section, key);
    if (!v) return fallback;
    try {
      size_t pos = 0;
      const long n = std::stol(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("");
      return n;
    } catch (...) {
      throw ParseError(path_.string() + ": [" + section + "] " + key + " = '" + *v +
                       "' is not an integer");
    }
  }

  bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
    auto v = find(section, key);
    if (!v) return fallback;
    if (*v == "true" || *v == "yes" || *v == "1") return true;
    if (*v == "false" || *v == "no" || *v == "0") return false;
    throw ParseError(path_.string() + ": [" + section + "] " + key + " = '" + *v +
                     "' is not a boolean");
  }

  const std::filesystem::path& path() const { return path_; }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

 private:
  std::filesystem::path path_;
  std::map<std::string, std::map<std::string, std::string>> values_;
};

enum class AugmentPlanKind { none, dasc, noise };

struct PipelineConfig {
  // [pipeline]
  uint64_t seed = 1;
  int jobs = 1;
  std::filesystem::path output_dir = "out";

  // [dataset]
  std::filesystem::path train_protocol, train_audio;
  std::filesystem::path dev_protocol, dev_audio;
  std::filesystem::path eval_protocol, eval_audio;
  int sample_rate = 16000;

  // [augment]
  AugmentPlanKind augment_plan = AugmentPlanKind::dasc;
  CompandingMode companding_mode = CompandingMode::quantized8;
  double alaw_A = 86.5;
  double mulaw_mu = 255.0;
  std::string noise_source = "white";
  double snr_db = 20.0;

  // [cqt]
  CqtConfig cqt;
  bool cqt_use_fft = false;
  bool featurize_skip_existing = true;

  // [model]
  std::string arch;  // empty = built-in default

  // [train]
  TrainConfig train;

  // [tdcf]
  TdcfCostModel tdcf;
  std::filesystem::path asv_operating_point;  // optional key-value file

  std::filesystem::path config_dir;  // directory of the config file

  // Paths in the file are taken relative to the config file location.
  std::filesystem::path resolve(const std::string& p) const {
    if (p.empty()) return {};
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : config_dir / fp;
  }

  static PipelineConfig load(const std::filesystem::path& path) {
    const ConfigFile f = ConfigFile::load(path);
    PipelineConfig c;
    c.config_dir = std::filesystem::absolute(path).parent_path();

    c.seed = static_cast<uint64_t>(f.get_int("pipeline", "seed", 1));
    c.jobs = static_cast<int>(f.get_int("pipeline", "jobs", 1));
    c.output_dir = c.resolve(f.get("pipeline", "output_dir", "out"));

    c.train_protocol = c.resolve(f.get("dataset", "train_protocol", ""));
    c.train_audio = c.resolve(f.get("dataset", "train_audio", ""));
    c.dev_protocol = c.resolve(f.get("dataset", "dev_protocol", ""));
    c.dev_audio = c.resolve(f.get("dataset", "dev_audio", ""));
    c.eval_protocol = c.resolve(f.get("dataset", "eval_protocol", ""));
    c.eval_audio = c.resolve(f.get("dataset", "eval_audio", ""));
    c.sample_rate = static_cast<int>(f.get_int("dataset", "sample_rate", 16000));

    const std::string plan = f.get("augment", "plan", "dasc");
    if (plan == "dasc") {
      c.augment_plan = AugmentPlanKind::dasc;
    } else if (plan == "noise") {
      c.augment_plan = AugmentPlanKind::noise;
    } else if (plan == "none") {
      c.augment_plan = AugmentPlanKind::none;
    } else {
      throw ParseError(path.string() + ": unknown augment plan '" + plan + "'");
    }
    const std::string mode = f.get("augment", "mode", "quantized8");
    if (mode == "quantized8") {
      c.companding_mode = CompandingMode::quantized8;
    } else if (mode == "continuous") {
      c.companding_mode = CompandingMode::continuous;
    } else {
      throw ParseError(path.string() + ": unknown companding mode '" + mode + "'");
    }
    c.alaw_A = f.get_double("augment", "alaw_A", 86.5);
    c.mulaw_mu = f.get_double("augment", "mulaw_mu", 255.0);
    c.noise_source = f.get("augment", "noise_source", "white");
    if (c.noise_source != "white") c.noise_source = c.resolve(c.noise_source).string();
    c.snr_db = f.get_double("augment", "snr_db", 20.0);

    c.cqt.f_min = f.get_double("cqt", "f_min", 62.5);
    c.cqt.bins_per_octave = static_cast<int>(f.get_int("cqt", "bins_per_octave", 12));
    c.cqt.n_octaves = static_cast<int>(f.get_int("cqt", "n_octaves", 7));
    c.cqt.hop_samples = static_cast<int>(f.get_int("cqt", "hop", 128));
    c.cqt.target_frames = static_cast<int>(f.get_int("cqt", "frames", 550));
    const std::string pad = f.get("cqt", "pad", "tile");
    if (pad == "tile") {
      c.cqt.pad_mode = PadMode::tile;
    } else if (pad == "zero") {
      c.cqt.pad_mode = PadMode::zero;
    } else {
      throw ParseError(path.string() + ": unknown pad mode '" + pad + "'");
    }
    c.cqt.log_floor = f.get_double("cqt", "log_floor", 1e-10);
    c.cqt_use_fft = f.get_bool("cqt", "use_fft", false);
    c.featurize_skip_existing = f.get_bool("cqt", "skip_existing", true);

    c.arch = f.get("model", "arch", "");

    c.train.batch_size = static_cast<int>(f.get_int("train", "batch_size", 32));
    c.train.epochs = static_cast<int>(f.get_int("train", "epochs", 20));
    c.train.learning_rate = f.get_double("train", "learning_rate", 1e-4);
    c.train.patience = static_cast<int>(f.get_int("train", "patience", 0));
    c.train.momentum = f.get_double("train", "momentum", 0.9);
    const std::string opt = f.get("train", "optimizer", "adam");
    if (opt == "adam") {
      c.train.optimizer = OptimizerKind::adam;
    } else if (opt == "sgd") {
      c.train.optimizer = OptimizerKind::sgd_momentum;
    } else {
      throw ParseError(path.string() + ": unknown optimizer '" + opt + "'");
    }
    c.train.seed = c.seed;

    c.tdcf.c_miss_cm = f.get_double("tdcf", "c_miss_cm", 1.0);
    c.tdcf.c_fa_cm = f.get_double("tdcf", "c_fa_cm", 10.0);
    c.tdcf.c_miss_asv = f.get_double("tdcf", "c_miss_asv", 1.0);
    c.tdcf.c_fa_asv = f.get_double("tdcf", "c_fa_asv", 10.0);
    c.tdcf.pi_tar = f.get_double("tdcf", "pi_tar", 0.9405);
    c.tdcf.pi_non = f.get_double("tdcf", "pi_non", 0.0095);
    c.tdcf.pi_spoof = f.get_double("tdcf", "pi_spoof", 0.05);
    const std::string asv = f.get("tdcf", "asv_operating_point", "");
    if (!asv.empty()) {
      c.asv_operating_point = c.resolve(asv);
      read_asv_operating_point(c.asv_operating_point, &c.tdcf);
    }

    return c;
  }

  LcnnSpec model_spec() const {
    LcnnSpec spec = arch.empty() ? LcnnSpec::default_arch() : LcnnSpec::parse(arch);
    spec.input_rows = cqt.num_bins();
    spec.input_cols = cqt.target_frames;
    spec.output_shape();
    return spec;
  }

  CompandingLaw make_law(Law law) const {
    CompandingLaw l = law == Law::alaw ? CompandingLaw::alaw(companding_mode)
                                       : CompandingLaw::mulaw(companding_mode);
    l.A = alaw_A;
    l.mu = mulaw_mu;
    return l;
  }

  // Referenced input paths must exist before a stage runs.
  void validate_inputs() const {
    auto need = [](const std::filesystem::path& p, const char* what) {
      if (p.empty() || !std::filesystem::exists(p))
        throw DataError(std::string("config: ") + what + " does not exist: " + p.string());
    };
    need(train_protocol, "train_protocol");
    need(train_audio, "train_audio");
    need(dev_protocol, "dev_protocol");
    need(dev_audio, "dev_audio");
    need(eval_protocol, "eval_protocol");
    need(eval_audio, "eval_audio");
    if (noise_source != "white") need(noise_source, "noise_source");
    if (!asv_operating_point.empty()) need(asv_operating_point, "asv_operating_point");
    cqt.validate(sample_rate);
    train.validate();
    tdcf.validate();
  }
};

}  // namespace dasc

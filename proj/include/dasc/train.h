// dasc/train.h
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
// Training loop for the LCNN classifier. Single-threaded by contract:
// with a fixed seed two runs produce bit-identical logs and weights. The
// checkpoint kept is the epoch with the best development-set EER (the final
// epoch when no development set is given).

#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dasc/common.h"
#include "dasc/cqt.h"
#include "dasc/lcnn.h"
#include "dasc/metrics.h"
#include "dasc/protocol.h"

namespace dasc {

struct LabeledExample {
  FeatureMatrix features;
  int label = kLabelSpoof;  // kLabelBonafide or kLabelSpoof
  std::string utt_id;
};

enum class OptimizerKind { adam, sgd_momentum };

struct TrainConfig {
  int batch_size = 32;
  int epochs = 20;
  double learning_rate = 1e-4;
  uint64_t seed = 1;
  OptimizerKind optimizer = OptimizerKind::adam;
  double momentum = 0.9;    // sgd only
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int patience = 0;  // early stop after this many epochs without dev improvement; 0 = off

  void validate() const {
    if (batch_size <= 0 || epochs <= 0) throw DomainError("TrainConfig: non-positive sizes");
    if (learning_rate < 0) throw DomainError("TrainConfig: negative learning rate");
  }
};

// Adam and SGD-momentum over a fixed parameter ordering.
class Optimizer {
 public:
  Optimizer(std::vector<ParamRef> params, const TrainConfig& cfg)
      : params_(std::move(params)), cfg_(cfg) {
    if (cfg.optimizer == OptimizerKind::adam) {
      m_.resize(params_.size());
      v_.resize(params_.size());
      for (size_t i = 0; i < params_.size(); ++i) {
        m_[i].assign(params_[i].value->size(), 0.0);
        v_[i].assign(params_[i].value->size(), 0.0);
      }
    } else {
      m_.resize(params_.size());
      for (size_t i = 0; i < params_.size(); ++i) m_[i].assign(params_[i].value->size(), 0.0);
    }
  }

  void step() {
    ++t_;
    if (cfg_.optimizer == OptimizerKind::adam) {
      const double bc1 = 1.0 - std::pow(cfg_.adam_beta1, t_);
      const double bc2 = 1.0 - std::pow(cfg_.adam_beta2, t_);
      for (size_t i = 0; i < params_.size(); ++i) {
        auto& value = *params_[i].value;
        const auto& grad = *params_[i].grad;
        for (size_t j = 0; j < value.size(); ++j) {
          m_[i][j] = cfg_.adam_beta1 * m_[i][j] + (1.0 - cfg_.adam_beta1) * grad[j];
          v_[i][j] = cfg_.adam_beta2 * v_[i][j] + (1.0 - cfg_.adam_beta2) * grad[j] * grad[j];
          const double mhat = m_[i][j] / bc1;
          const double vhat = v_[i][j] / bc2;
          value[j] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.adam_eps);
        }
      }
    } else {
      for (size_t i = 0; i < params_.size(); ++i) {
        auto& value = *params_[i].value;
        const auto& grad = *params_[i].grad;
        for (size_t j = 0; j < value.size(); ++j) {
          m_[i][j] = cfg_.momentum * m_[i][j] + grad[j];
          value[j] -= cfg_.learning_rate * m_[i][j];
        }
      }
    }
  }

 private:
  std::vector<ParamRef> params_;
  TrainConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_eer = std::numeric_limits<double>::quiet_NaN();  // NaN when no dev set
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_dev_eer = std::numeric_limits<double>::quiet_NaN();
};

namespace train_detail {

inline void fisher_yates(std::vector<size_t>& idx, Rng& rng) {
  for (size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
}

inline Tensor make_batch(const std::vector<LabeledExample>& examples,
                         const std::vector<size_t>& order, size_t begin, size_t end,
                         std::vector<int>* labels) {
  const auto& first = examples[order[begin]].features;
  Tensor batch(static_cast<int>(end - begin), 1, first.rows, first.cols);
  labels->clear();
  for (size_t i = begin; i < end; ++i) {
    const auto& ex = examples[order[i]];
    if (ex.features.rows != first.rows || ex.features.cols != first.cols)
      throw DomainError("train: inconsistent feature shapes in batch");
    std::copy(ex.features.values.begin(), ex.features.values.end(),
              batch.sample(static_cast<int>(i - begin)));
    labels->push_back(ex.label);
  }
  return batch;
}

inline double dev_eer(const Model& model, const std::vector<LabeledExample>& dev) {
  std::vector<double> bona, spoof;
  for (const auto& ex : dev)
    (ex.label == kLabelBonafide ? bona : spoof).push_back(model.score(ex.features));
  if (bona.empty() || spoof.empty()) return std::numeric_limits<double>::quiet_NaN();
  return compute_eer(bona, spoof).eer;
}

}  // namespace train_detail

// Trains a fresh model on the labeled examples. `dev` may be empty; when it
// holds both classes the returned model is the epoch with the lowest dev EER
// (ties keep the earlier epoch).
inline TrainResult train(const LcnnSpec& spec, const std::vector<LabeledExample>& train_set,
                         const std::vector<LabeledExample>& dev_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw DataError("train: empty training set");
  size_t n_bona = 0, n_spoof = 0;
  for (const auto& ex : train_set) (ex.label == kLabelBonafide ? n_bona : n_spoof) += 1;
  if (n_bona == 0 || n_spoof == 0)
    throw DataError("train: degenerate training set (single class; bonafide = " +
                    std::to_string(n_bona) + ", spoof = " + std::to_string(n_spoof) + ")");

  TrainResult result{Model(spec, cfg.seed), {}, 0,
                     std::numeric_limits<double>::quiet_NaN()};
  Model& model = result.model;
  Optimizer opt(model.params(), cfg);
  Rng shuffle_rng(cfg.seed ^ fnv1a64("shuffle"));
  Rng dropout_rng(cfg.seed ^ fnv1a64("dropout"));

  std::vector<size_t> order(train_set.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<std::vector<double>> best_weights;
  double best_eer = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    train_detail::fisher_yates(order, shuffle_rng);
    double loss_sum = 0.0;
    for (size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::vector<int> labels;
      Tensor batch = train_detail::make_batch(train_set, order, begin, end, &labels);
      std::vector<LayerCache> caches;
      model.zero_grads();
      Tensor logits = model.train_forward(batch, caches, dropout_rng);
      LossResult loss = softmax_cross_entropy(logits, labels);
      model.backward(loss.grad, caches);
      opt.step();
      loss_sum += loss.loss * static_cast<double>(end - begin);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(train_set.size());
    if (!dev_set.empty()) log.dev_eer = train_detail::dev_eer(model, dev_set);
    result.log.push_back(log);

    // Checkpoint the latest epoch among the equal-best (more training at the
    // same dev EER); patience counts strict improvements only.
    if (!std::isnan(log.dev_eer) && log.dev_eer <= best_eer) {
      if (log.dev_eer < best_eer)
        since_best = 0;
      else
        ++since_best;
      best_eer = log.dev_eer;
      best_epoch = epoch;
      best_weights = model.snapshot();
    } else {
      ++since_best;
    }
    if (cfg.patience > 0 && !best_weights.empty() && since_best >= cfg.patience) break;
  }

  if (!best_weights.empty()) {
    model.restore(best_weights);
    result.best_epoch = best_epoch;
    result.best_dev_eer = best_eer;
  } else {
    result.best_epoch = result.log.empty() ? 0 : result.log.back().epoch;
  }
  return result;
}

struct ScoreFailure {
  std::string utt_id;
  std::string message;
};

struct ScoreSetResult {
  std::vector<ScoreRecord> scores;
  std::vector<ScoreFailure> failures;
};

// Scores every manifest record from its feature file under feature_dir.
// Missing or unreadable features become per-record failures; scoring
// continues. Output order follows the manifest.
inline ScoreSetResult score_set(const Model& model, const DatasetManifest& manifest,
                                const std::filesystem::path& feature_dir, int jobs = 1) {
  const size_t n = manifest.records.size();
  std::vector<std::optional<ScoreRecord>> scores(n);
  std::vector<std::optional<ScoreFailure>> failures(n);
  parallel_for(n, jobs, [&](size_t i) {
    const auto& rec = manifest.records[i];
    try {
      FeatureMatrix f = read_feature_file(feature_dir / (rec.utt_id + ".cqt"));
      scores[i] = ScoreRecord{rec.utt_id, model.score(f)};
    } catch (const Error& e) {
      failures[i] = ScoreFailure{rec.utt_id, e.what()};
    }
  });
  ScoreSetResult result;
  for (auto& s : scores)
    if (s) result.scores.push_back(std::move(*s));
  for (auto& f : failures)
    if (f) result.failures.push_back(std::move(*f));
  return result;
}

// Training log as text: one line per epoch.
inline void write_train_log(const std::vector<EpochLog>& log, int best_epoch,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out.precision(9);
  for (const auto& e : log) {
    out << "epoch " << e.epoch << " loss " << e.train_loss << " dev_eer ";
    if (std::isnan(e.dev_eer))
      out << "-";
    else
      out << e.dev_eer;
    out << '\n';
  }
  out << "best_epoch " << best_epoch << '\n';
}

}  // namespace dasc

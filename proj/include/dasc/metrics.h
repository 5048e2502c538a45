// dasc/metrics.h
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
// Detection metrics over countermeasure scores (higher = more bonafide-like).
//
// Conventions, fixed here because they differ across toolkits:
//   * a trial is accepted as bonafide when score >= threshold;
//   * candidate thresholds are the distinct score values plus +-infinity;
//   * FAR(t) = fraction of spoof scores >= t, FRR(t) = fraction of bonafide
//     scores < t;
//   * EER is reported as (FAR+FRR)/2 at the threshold minimizing |FAR-FRR|
//     (midpoint convention for the step-function crossing).
//
// The tandem cost follows the two-constant form used with a fixed ASV
// operating point: t-DCF(s) = C1 * Pmiss_cm(s) + C2 * Pfa_cm(s) with
//   C1 = pi_tar * (c_miss_cm - c_miss_asv * p_miss_asv)
//           - pi_non * c_fa_asv * p_fa_asv,
//   C2 = c_fa_cm * pi_spoof * (1 - p_miss_spoof_asv),
// reported as min over s of t-DCF(s) / min(C1, C2).

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dasc/common.h"
#include "dasc/protocol.h"

namespace dasc {

struct ScoreRecord {
  std::string utt_id;
  double score = 0.0;
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

struct DetPoint {
  double threshold = 0.0;
  double p_fa = 0.0;
  double p_miss = 0.0;
};

namespace metric_detail {

// Candidate thresholds: distinct scores plus the two infinities.
inline std::vector<double> candidate_thresholds(const std::vector<double>& bonafide,
                                                const std::vector<double>& spoof) {
  std::vector<double> t;
  t.reserve(bonafide.size() + spoof.size() + 2);
  t.push_back(-std::numeric_limits<double>::infinity());
  t.insert(t.end(), bonafide.begin(), bonafide.end());
  t.insert(t.end(), spoof.begin(), spoof.end());
  t.push_back(std::numeric_limits<double>::infinity());
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

struct ErrorRates {
  std::vector<double> thresholds;
  std::vector<double> far;  // fraction of spoof >= t
  std::vector<double> frr;  // fraction of bonafide < t
};

inline ErrorRates sweep(const std::vector<double>& bonafide, const std::vector<double>& spoof) {
  if (bonafide.empty()) throw DomainError("metrics: no bonafide scores");
  if (spoof.empty()) throw DomainError("metrics: no spoof scores");
  std::vector<double> b = bonafide, s = spoof;
  std::sort(b.begin(), b.end());
  std::sort(s.begin(), s.end());
  ErrorRates rates;
  rates.thresholds = candidate_thresholds(bonafide, spoof);
  rates.far.reserve(rates.thresholds.size());
  rates.frr.reserve(rates.thresholds.size());
  for (double t : rates.thresholds) {
    const auto ge_spoof = s.end() - std::lower_bound(s.begin(), s.end(), t);
    const auto lt_bona = std::lower_bound(b.begin(), b.end(), t) - b.begin();
    rates.far.push_back(static_cast<double>(ge_spoof) / static_cast<double>(s.size()));
    rates.frr.push_back(static_cast<double>(lt_bona) / static_cast<double>(b.size()));
  }
  return rates;
}

}  // namespace metric_detail

inline EerResult compute_eer(const std::vector<double>& bonafide,
                             const std::vector<double>& spoof) {
  const auto rates = metric_detail::sweep(bonafide, spoof);
  size_t best = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < rates.thresholds.size(); ++i) {
    const double gap = std::fabs(rates.far[i] - rates.frr[i]);
    if (gap < best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return {(rates.far[best] + rates.frr[best]) / 2.0, rates.thresholds[best]};
}

struct TdcfCostModel {
  double c_miss_cm = 1.0;
  double c_fa_cm = 10.0;
  double c_miss_asv = 1.0;
  double c_fa_asv = 10.0;
  double p_miss_asv = 0.0;        // ASV miss rate at its fixed operating point
  double p_fa_asv = 0.0;          // ASV false-accept rate (zero-effort impostors)
  double p_miss_spoof_asv = 0.0;  // ASV miss rate on spoof trials
  double pi_tar = 0.9405;
  double pi_non = 0.0095;
  double pi_spoof = 0.05;

  void validate() const {
    if (c_miss_cm <= 0 || c_fa_cm <= 0 || c_miss_asv <= 0 || c_fa_asv <= 0)
      throw DomainError("TdcfCostModel: costs must be positive");
    for (double p : {p_miss_asv, p_fa_asv, p_miss_spoof_asv})
      if (p < 0.0 || p > 1.0) throw DomainError("TdcfCostModel: ASV rates must be in [0,1]");
    for (double p : {pi_tar, pi_non, pi_spoof})
      if (p < 0.0 || p > 1.0) throw DomainError("TdcfCostModel: priors must be in [0,1]");
    if (std::fabs(pi_tar + pi_non + pi_spoof - 1.0) > 1e-9)
      throw DomainError("TdcfCostModel: priors must sum to 1");
  }

  double c1() const { return pi_tar * (c_miss_cm - c_miss_asv * p_miss_asv) - pi_non * c_fa_asv * p_fa_asv; }
  double c2() const { return c_fa_cm * pi_spoof * (1.0 - p_miss_spoof_asv); }
};

struct TdcfResult {
  double min_tdcf = 0.0;
  double threshold = 0.0;
};

inline double tdcf_at(double p_miss_cm, double p_fa_cm, const TdcfCostModel& cost) {
  return (cost.c1() * p_miss_cm + cost.c2() * p_fa_cm) / std::min(cost.c1(), cost.c2());
}

inline TdcfResult compute_min_tdcf(const std::vector<double>& bonafide,
                                   const std::vector<double>& spoof,
                                   const TdcfCostModel& cost) {
  cost.validate();
  if (cost.c1() <= 0.0 || cost.c2() <= 0.0)
    throw DomainError("compute_min_tdcf: degenerate cost model (C1 = " +
                      std::to_string(cost.c1()) + ", C2 = " + std::to_string(cost.c2()) + ")");
  const auto rates = metric_detail::sweep(bonafide, spoof);
  size_t best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < rates.thresholds.size(); ++i) {
    // P_miss_cm = FRR, P_fa_cm = FAR.
    const double c = tdcf_at(rates.frr[i], rates.far[i], cost);
    if (c < best_cost) {
      best_cost = c;
      best = i;
    }
  }
  return {best_cost, rates.thresholds[best]};
}

// Step-function-exact DET curve: one point per distinct threshold, with
// consecutive duplicate points collapsed. Endpoints are (1,0) and (0,1).
inline std::vector<DetPoint> det_curve(const std::vector<double>& bonafide,
                                       const std::vector<double>& spoof) {
  const auto rates = metric_detail::sweep(bonafide, spoof);
  std::vector<DetPoint> points;
  for (size_t i = 0; i < rates.thresholds.size(); ++i) {
    if (!points.empty() && points.back().p_fa == rates.far[i] &&
        points.back().p_miss == rates.frr[i])
      continue;
    points.push_back({rates.thresholds[i], rates.far[i], rates.frr[i]});
  }
  return points;
}

struct EvalResult {
  double eer = 0.0;
  double min_tdcf = 0.0;
  double eer_threshold = 0.0;
  double tdcf_threshold = 0.0;
  std::vector<DetPoint> det_points;
};

// Joins scores against manifest ground truth and computes everything.
inline EvalResult evaluate_scores(const std::vector<ScoreRecord>& scores,
                                  const DatasetManifest& manifest, const TdcfCostModel& cost) {
  std::map<std::string, Key> truth;
  for (const auto& r : manifest.records) truth[r.utt_id] = r.key;
  std::vector<double> bonafide, spoof;
  for (const auto& s : scores) {
    auto it = truth.find(s.utt_id);
    if (it == truth.end())
      throw DataError("evaluate_scores: utt_id '" + s.utt_id + "' not in manifest");
    (it->second == Key::bonafide ? bonafide : spoof).push_back(s.score);
  }
  EvalResult result;
  const auto eer = compute_eer(bonafide, spoof);
  result.eer = eer.eer;
  result.eer_threshold = eer.threshold;
  const auto tdcf = compute_min_tdcf(bonafide, spoof, cost);
  result.min_tdcf = tdcf.min_tdcf;
  result.tdcf_threshold = tdcf.threshold;
  result.det_points = det_curve(bonafide, spoof);
  return result;
}

// ---------------------------------------------------------------------------
// File formats.
// ---------------------------------------------------------------------------

// Score files: "UTT_ID SCORE" per line.
inline std::vector<ScoreRecord> read_score_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open score file: " + path.string());
  std::vector<ScoreRecord> scores;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    ScoreRecord rec;
    if (!(ss >> rec.utt_id)) continue;  // blank line
    if (!(ss >> rec.score))
      throw ParseError(path.string() + ": expected 'UTT_ID SCORE'", lineno);
    std::string extra;
    if (ss >> extra) throw ParseError(path.string() + ": trailing fields", lineno);
    if (!std::isfinite(rec.score))
      throw ParseError(path.string() + ": non-finite score", lineno);
    scores.push_back(std::move(rec));
  }
  return scores;
}

inline void write_score_file(const std::vector<ScoreRecord>& scores,
                             const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out.precision(9);
  for (const auto& s : scores) out << s.utt_id << ' ' << s.score << '\n';
  if (!out) throw FormatError("short write: " + path.string());
}

// ASV operating point: "key value" text with keys p_miss_asv, p_fa_asv,
// p_miss_spoof_asv. '#' starts a comment.
inline void read_asv_operating_point(const std::filesystem::path& path, TdcfCostModel* cost) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open ASV operating-point file: " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key)) continue;
    double value;
    if (!(ss >> value))
      throw ParseError(path.string() + ": expected 'key value'", lineno);
    if (key == "p_miss_asv") {
      cost->p_miss_asv = value;
    } else if (key == "p_fa_asv") {
      cost->p_fa_asv = value;
    } else if (key == "p_miss_spoof_asv") {
      cost->p_miss_spoof_asv = value;
    } else {
      throw ParseError(path.string() + ": unknown key '" + key + "'", lineno);
    }
  }
}

inline void write_det_csv(const std::vector<DetPoint>& points, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << "threshold,p_fa,p_miss\n";
  out.precision(9);
  for (const auto& p : points) out << p.threshold << ',' << p.p_fa << ',' << p.p_miss << '\n';
}

}  // namespace dasc

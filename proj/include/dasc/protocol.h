// dasc/protocol.h
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
// Trial protocol files: UTF-8 text, one trial per line, five
// whitespace-separated fields:
//
//   SPEAKER_ID  UTT_ID  FIELD3  ATTACK_ID  KEY
//
// KEY is "bonafide" or "spoof"; ATTACK_ID is "-" exactly when the trial is
// bonafide. FIELD3 is preserved verbatim but carries no semantics here.

#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "dasc/common.h"

namespace dasc {

enum class Subset { train, development, evaluation };
enum class Key { bonafide, spoof };

inline const char* subset_name(Subset s) {
  switch (s) {
    case Subset::train: return "train";
    case Subset::development: return "development";
    default: return "evaluation";
  }
}

inline const char* key_name(Key k) { return k == Key::bonafide ? "bonafide" : "spoof"; }

struct TrialRecord {
  std::string speaker_id;
  std::string utt_id;
  std::string field3;     // unused third column, kept to round-trip the format
  std::string attack_id;  // "-" for bonafide
  Key key = Key::bonafide;
};

struct DatasetManifest {
  Subset subset = Subset::train;
  std::vector<TrialRecord> records;
  std::filesystem::path audio_root;

  size_t count(Key k) const {
    size_t n = 0;
    for (const auto& r : records)
      if (r.key == k) ++n;
    return n;
  }
  size_t bonafide_count() const { return count(Key::bonafide); }
  size_t spoof_count() const { return count(Key::spoof); }

  std::filesystem::path audio_path(const TrialRecord& r) const {
    return audio_root / (r.utt_id + ".wav");
  }
};

// Parses one protocol file. Rejects lines with the wrong field count, unknown
// keys, bonafide/attack mismatches (all ParseError with the line number) and
// duplicate utterance ids (DataError).
inline DatasetManifest parse_protocol(const std::filesystem::path& path, Subset subset,
                                      std::filesystem::path audio_root = {}) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open protocol file: " + path.string());

  DatasetManifest manifest;
  manifest.subset = subset;
  manifest.audio_root = std::move(audio_root);

  std::unordered_set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::vector<std::string> fields;
    std::string tok;
    while (ss >> tok) fields.push_back(tok);
    if (fields.empty()) continue;  // blank line
    if (fields.size() != 5)
      throw ParseError(path.string() + ": expected 5 fields, got " +
                           std::to_string(fields.size()),
                       lineno);

    TrialRecord rec;
    rec.speaker_id = fields[0];
    rec.utt_id = fields[1];
    rec.field3 = fields[2];
    rec.attack_id = fields[3];
    if (fields[4] == "bonafide") {
      rec.key = Key::bonafide;
    } else if (fields[4] == "spoof") {
      rec.key = Key::spoof;
    } else {
      throw ParseError(path.string() + ": unknown key '" + fields[4] + "'", lineno);
    }
    if ((rec.key == Key::bonafide) != (rec.attack_id == "-"))
      throw ParseError(path.string() + ": key '" + fields[4] +
                           "' inconsistent with attack id '" + rec.attack_id + "'",
                       lineno);
    if (!seen.insert(rec.utt_id).second)
      throw DataError(path.string() + ": duplicate utt_id '" + rec.utt_id + "' at line " +
                      std::to_string(lineno));
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

// Writes a manifest back in the same five-field format.
inline void write_protocol(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  for (const auto& r : manifest.records) {
    out << r.speaker_id << ' ' << r.utt_id << ' ' << r.field3 << ' ' << r.attack_id << ' '
        << key_name(r.key) << '\n';
  }
  if (!out) throw FormatError("short write: " + path.string());
}

// Verifies that no utterance id occurs in more than one subset.
inline void check_disjoint(const std::vector<const DatasetManifest*>& manifests) {
  std::set<std::string> seen;
  for (const auto* m : manifests) {
    for (const auto& r : m->records) {
      if (!seen.insert(r.utt_id).second)
        throw DataError("utt_id '" + r.utt_id + "' appears in more than one subset");
    }
  }
}

}  // namespace dasc

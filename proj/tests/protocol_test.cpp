// tests/protocol_test.cpp
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

#include "dasc/protocol.h"

#include <catch2/catch_amalgamated.hpp>
#include <sstream>
#include <string>

#include "test_util.h"

using namespace dasc;
using dasc_test::TempDir;
using dasc_test::write_text;

TEST_CASE("parse_protocol: single line fields") {
  TempDir tmp("proto");
  write_text(tmp / "p.txt", "LA_0001 LA_T_1 - - bonafide\n");
  const auto m = parse_protocol(tmp / "p.txt", Subset::train);
  REQUIRE(m.records.size() == 1);
  CHECK(m.records[0].speaker_id == "LA_0001");
  CHECK(m.records[0].utt_id == "LA_T_1");
  CHECK(m.records[0].field3 == "-");
  CHECK(m.records[0].attack_id == "-");
  CHECK(m.records[0].key == Key::bonafide);
}

TEST_CASE("parse_protocol: counts queryable by key") {
  TempDir tmp("proto");
  std::ostringstream ss;
  for (int i = 0; i < 6; ++i) ss << "S1 B_" << i << " - - bonafide\n";
  for (int i = 0; i < 9; ++i) ss << "S2 A_" << i << " - A0" << (i % 3 + 1) << " spoof\n";
  write_text(tmp / "p.txt", ss.str());
  const auto m = parse_protocol(tmp / "p.txt", Subset::development);
  CHECK(m.records.size() == 15);
  CHECK(m.bonafide_count() == 6);
  CHECK(m.spoof_count() == 9);
  CHECK(m.subset == Subset::development);
}

TEST_CASE("parse_protocol: empty file gives empty manifest") {
  TempDir tmp("proto");
  write_text(tmp / "p.txt", "");
  CHECK(parse_protocol(tmp / "p.txt", Subset::train).records.empty());
}

TEST_CASE("parse_protocol: records count equals non-blank line count") {
  TempDir tmp("proto");
  write_text(tmp / "p.txt", "A u1 x - bonafide\n\nB u2 y A01 spoof\n");
  CHECK(parse_protocol(tmp / "p.txt", Subset::train).records.size() == 2);
}

TEST_CASE("parse_protocol: error paths carry line numbers") {
  TempDir tmp("proto");

  write_text(tmp / "short.txt", "A u1 x - bonafide\nA u2 x -\n");
  CHECK_THROWS_MATCHES(parse_protocol(tmp / "short.txt", Subset::train), ParseError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("line 2")));

  write_text(tmp / "key.txt", "A u1 x - genuine\n");
  CHECK_THROWS_AS(parse_protocol(tmp / "key.txt", Subset::train), ParseError);

  write_text(tmp / "dup.txt", "A u1 x - bonafide\nB u1 y - bonafide\n");
  CHECK_THROWS_AS(parse_protocol(tmp / "dup.txt", Subset::train), DataError);

  CHECK_THROWS_AS(parse_protocol(tmp / "missing.txt", Subset::train), FormatError);
}

TEST_CASE("parse_protocol: bonafide iff attack is '-'") {
  TempDir tmp("proto");
  write_text(tmp / "bad1.txt", "A u1 x A01 bonafide\n");
  CHECK_THROWS_AS(parse_protocol(tmp / "bad1.txt", Subset::train), ParseError);
  write_text(tmp / "bad2.txt", "A u1 x - spoof\n");
  CHECK_THROWS_AS(parse_protocol(tmp / "bad2.txt", Subset::train), ParseError);

  write_text(tmp / "ok.txt", "A u1 x - bonafide\nA u2 x A19 spoof\n");
  for (const auto& r : parse_protocol(tmp / "ok.txt", Subset::train).records)
    CHECK((r.key == Key::bonafide) == (r.attack_id == "-"));
}

TEST_CASE("write_protocol round-trips through parse_protocol") {
  TempDir tmp("proto");
  write_text(tmp / "p.txt", "A u1 z - bonafide\nB u2 q A05 spoof\n");
  const auto m = parse_protocol(tmp / "p.txt", Subset::evaluation);
  write_protocol(m, tmp / "copy.txt");
  const auto back = parse_protocol(tmp / "copy.txt", Subset::evaluation);
  REQUIRE(back.records.size() == m.records.size());
  for (size_t i = 0; i < m.records.size(); ++i) {
    CHECK(back.records[i].speaker_id == m.records[i].speaker_id);
    CHECK(back.records[i].utt_id == m.records[i].utt_id);
    CHECK(back.records[i].field3 == m.records[i].field3);
    CHECK(back.records[i].attack_id == m.records[i].attack_id);
    CHECK(back.records[i].key == m.records[i].key);
  }
}

TEST_CASE("check_disjoint flags shared utt_ids across subsets") {
  TempDir tmp("proto");
  write_text(tmp / "a.txt", "A u1 x - bonafide\n");
  write_text(tmp / "b.txt", "A u2 x - bonafide\n");
  write_text(tmp / "c.txt", "A u1 x A01 spoof\n");
  const auto a = parse_protocol(tmp / "a.txt", Subset::train);
  const auto b = parse_protocol(tmp / "b.txt", Subset::development);
  const auto c = parse_protocol(tmp / "c.txt", Subset::evaluation);
  CHECK_NOTHROW(check_disjoint({&a, &b}));
  CHECK_THROWS_AS(check_disjoint({&a, &b, &c}), DataError);
}

TEST_CASE("manifest audio_path composes root and utt id") {
  DatasetManifest m;
  m.audio_root = "/data/wav";
  TrialRecord r;
  r.utt_id = "LA_E_99";
  CHECK(m.audio_path(r) == std::filesystem::path("/data/wav/LA_E_99.wav"));
}

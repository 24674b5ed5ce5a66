// Copyright (c) 2026 vqvc authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "vqvc/index_codec.h"
#include "vqvc/rng.h"

using namespace vqvc;

namespace {

IndexSeq random_seq(Rng& rng, int groups, int vocab, Index frames, double repeat_prob = 0.5) {
  IndexSeq s;
  s.groups = groups;
  s.vocab = vocab;
  for (Index t = 0; t < frames; ++t) {
    if (t > 0 && rng.uniform() < repeat_prob) {
      for (int g = 0; g < groups; ++g) s.tuples.push_back(s.tuples[static_cast<size_t>((t - 1) * groups + g)]);
    } else {
      for (int g = 0; g < groups; ++g) s.tuples.push_back(static_cast<int>(rng.uniform_int(vocab)));
    }
  }
  return s;
}

}  // namespace

TEST_CASE("combine merges whole tuples and records run lengths") {
  IndexSeq s;
  s.groups = 2;
  s.vocab = 8;
  s.tuples = {3, 7, 3, 7, 3, 7};
  const IndexSeq c = combine(s);
  CHECK(c.frames() == 1);
  CHECK(c.tuples == std::vector<int>{3, 7});
  CHECK(c.run_lengths == std::vector<int>{3});
  CHECK(expand(c) == s);
}

TEST_CASE("combine is identity on sequences without adjacent repeats") {
  IndexSeq s;
  s.groups = 2;
  s.vocab = 4;
  s.tuples = {0, 0, 0, 1, 1, 0, 0, 0};
  const IndexSeq c = combine(s);
  CHECK(c.frames() == s.frames());
  CHECK(c.tuples == s.tuples);
  for (int r : c.run_lengths) CHECK(r == 1);
}

TEST_CASE("combine uses joint equality, not per-group runs") {
  // group 0 repeats but group 1 changes, so nothing merges
  IndexSeq s;
  s.groups = 2;
  s.vocab = 4;
  s.tuples = {2, 0, 2, 1, 2, 2};
  CHECK(combine(s).frames() == 3);
}

TEST_CASE("combine/expand round-trip is exact on 1000 random sequences") {
  Rng rng(20260101);
  for (int trial = 0; trial < 1000; ++trial) {
    const IndexSeq s = random_seq(rng, 2, 8, 1 + rng.uniform_int(40));
    const IndexSeq c = combine(s);
    CHECK(expand(c) == s);
    CHECK(c.frames() <= s.frames());
    // idempotence on the combined domain
    const IndexSeq c2 = combine(expand(c));
    CHECK(c2.tuples == c.tuples);
    CHECK(c2.run_lengths == c.run_lengths);
    // no adjacent joint repeats after combining
    for (Index t = 1; t < c.frames(); ++t) {
      bool equal = true;
      for (int g = 0; g < c.groups; ++g) {
        if (c.tuples[static_cast<size_t>(t * c.groups + g)] !=
            c.tuples[static_cast<size_t>((t - 1) * c.groups + g)]) {
          equal = false;
        }
      }
      CHECK_FALSE(equal);
    }
  }
}

TEST_CASE("combine rejects already-combined input; expand needs run lengths") {
  IndexSeq s;
  s.groups = 1;
  s.vocab = 2;
  s.tuples = {0, 1};
  IndexSeq c = combine(s);
  CHECK_THROWS_AS(combine(c), ContractError);
  c.run_lengths.clear();
  CHECK_THROWS_AS(expand(c), ContractError);
}

TEST_CASE("separate maps components into disjoint per-group blocks") {
  const std::vector<int> t0 = {0, 0};
  CHECK(separate_ids(t0, 320) == std::vector<int>{0, 320});
  // paper-scale arithmetic: factorized 640 rows vs 102,400 joint
  CHECK(2 * 320 == 640);
  CHECK(joint_id(std::vector<int>{319, 319}, 320) == 102399);

  // exhaustive injectivity for V=8, G=2
  std::set<std::vector<int>> seen;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      const std::vector<int> ids = separate_ids(std::vector<int>{i, j}, 8);
      CHECK(ids[0] >= 0);
      CHECK(ids[0] < 8);
      CHECK(ids[1] >= 8);
      CHECK(ids[1] < 16);
      CHECK(seen.insert(ids).second);
    }
  }
  CHECK_THROWS_AS(separate_ids(std::vector<int>{8, 0}, 8), ContractError);
}

TEST_CASE("joint_id is a bijection, exhaustively for V=8 G=3") {
  CHECK(joint_id(std::vector<int>{0, 0, 0}, 8) == 0);
  std::set<std::int64_t> seen;
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b)
      for (int c = 0; c < 8; ++c) {
        const std::vector<int> tuple = {a, b, c};
        const std::int64_t id = joint_id(tuple, 8);
        CHECK(id >= 0);
        CHECK(id < 512);
        CHECK(seen.insert(id).second);
        CHECK(joint_tuple(id, 3, 8) == tuple);
      }
  CHECK(seen.size() == 512);
  CHECK_THROWS_AS(joint_tuple(512, 3, 8), ContractError);
}

TEST_CASE("vocab_stats on a constant utterance") {
  IndexSeq s;
  s.groups = 2;
  s.vocab = 8;
  for (int t = 0; t < 10; ++t) {
    s.tuples.push_back(4);
    s.tuples.push_back(2);
  }
  const VocabStats stats = vocab_stats(std::vector<IndexSeq>{s});
  CHECK(stats.unique_combinations == 1);
  CHECK(stats.reduction_ratio == doctest::Approx(0.9));
  CHECK(stats.group_perplexity[0] == doctest::Approx(1.0));
}

TEST_CASE("vocab_stats: no repeats means no reduction") {
  IndexSeq s;
  s.groups = 1;
  s.vocab = 8;
  s.tuples = {0, 1, 2, 3, 4, 5};
  const VocabStats stats = vocab_stats(std::vector<IndexSeq>{s});
  CHECK(stats.reduction_ratio == doctest::Approx(0.0));
  CHECK(stats.unique_combinations == 6);
}

TEST_CASE("vocab_stats rejects mixed G/V") {
  IndexSeq a, b;
  a.groups = 2;
  a.vocab = 8;
  a.tuples = {0, 0};
  b.groups = 1;
  b.vocab = 8;
  b.tuples = {0};
  CHECK_THROWS_AS(vocab_stats(std::vector<IndexSeq>{a, b}), ContractError);
}

TEST_CASE("index dumps round-trip through the text format") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "vqvc_idx_test";
  fs::create_directories(dir);
  Rng rng(88);

  std::vector<NamedIndexSeq> seqs;
  seqs.push_back({"utt_a", random_seq(rng, 2, 8, 15)});
  seqs.push_back({"utt_b", combine(random_seq(rng, 2, 8, 20))});
  write_index_file(dir / "dump.idx", seqs);
  const std::vector<NamedIndexSeq> back = read_index_file(dir / "dump.idx");
  REQUIRE(back.size() == 2);
  CHECK(back[0].utt_id == "utt_a");
  CHECK(back[0].seq == seqs[0].seq);
  CHECK(back[1].seq == seqs[1].seq);

  std::ofstream bad(dir / "bad.idx");
  bad << "#utt u G=2 V=8\n1 2 3\n";
  bad.close();
  CHECK_THROWS_AS(read_index_file(dir / "bad.idx"), DataError);
  fs::remove_all(dir);
}

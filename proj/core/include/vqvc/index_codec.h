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

#ifndef VQVC_INDEX_CODEC_H_
#define VQVC_INDEX_CODEC_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vqvc/tensor.h"

namespace vqvc {

// Per-frame G-tuples of codeword indices, optionally run-length combined.
// Tuples are stored flat, row-major: frame t occupies [t*G, (t+1)*G).
struct IndexSeq {
  int groups = 0;
  int vocab = 0;
  bool combined = false;
  std::vector<int> tuples;
  std::vector<int> run_lengths;  // one per tuple when combined

  Index frames() const {
    return groups == 0 ? 0 : static_cast<Index>(tuples.size()) / groups;
  }
  std::span<const int> tuple(Index t) const {
    return {tuples.data() + t * groups, static_cast<size_t>(groups)};
  }
  void push_tuple(std::span<const int> tu) { tuples.insert(tuples.end(), tu.begin(), tu.end()); }
  bool operator==(const IndexSeq&) const = default;
};

// Run-length merge of adjacent tuples equal under joint equality (all G
// components). Order preserved; expanding by run_lengths reproduces the
// input exactly.
IndexSeq combine(const IndexSeq& seq);
// Exact inverse of combine.
IndexSeq expand(const IndexSeq& seq);

// Factorized lookup ids: component g of a tuple maps to row g*V + i_g in a
// flat block of G*V embedding rows (vs V^G joint rows).
std::vector<int> separate_ids(std::span<const int> tuple, int vocab);

// Bijection between tuples and the joint vocabulary [0, V^G).
std::int64_t joint_id(std::span<const int> tuple, int vocab);
std::vector<int> joint_tuple(std::int64_t id, int groups, int vocab);

struct VocabStats {
  std::int64_t total_frames = 0;
  std::int64_t combined_frames = 0;
  std::int64_t unique_combinations = 0;
  double reduction_ratio = 0.0;  // 1 - combined/original, averaged per utterance
  std::vector<std::vector<std::int64_t>> group_histograms;
  std::vector<double> group_perplexity;
};

// Exact usage statistics over a corpus with uniform G and V. Combined
// sequences are measured through their run_lengths; uncombined ones are
// combined on the fly for the reduction ratio.
VocabStats vocab_stats(std::span<const IndexSeq> corpus);

// ---- text dump format ------------------------------------------------------
// One utterance per block: header "#utt <id> G=<G> V=<V>[ combined=1]",
// then one line per frame with G space-separated integers, plus an optional
// trailing ":<run_length>" on combined dumps.

struct NamedIndexSeq {
  std::string utt_id;
  IndexSeq seq;
};

void write_index_file(const std::filesystem::path& path, std::span<const NamedIndexSeq> seqs);
std::vector<NamedIndexSeq> read_index_file(const std::filesystem::path& path);

}  // namespace vqvc

#endif  // VQVC_INDEX_CODEC_H_

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

#include "vqvc/index_codec.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace vqvc {

namespace {

bool tuples_equal(const IndexSeq& s, Index a, Index b) {
  for (int g = 0; g < s.groups; ++g) {
    if (s.tuples[static_cast<size_t>(a * s.groups + g)] !=
        s.tuples[static_cast<size_t>(b * s.groups + g)]) {
      return false;
    }
  }
  return true;
}

void check_range(const IndexSeq& s) {
  VQVC_CHECK(s.groups > 0 && s.vocab > 0, "index sequence needs positive G and V");
  for (int v : s.tuples) {
    VQVC_CHECK(v >= 0 && v < s.vocab, "index " << v << " out of range [0, " << s.vocab << ")");
  }
}

}  // namespace

IndexSeq combine(const IndexSeq& seq) {
  if (seq.combined) throw ContractError("combine: sequence is already combined");
  check_range(seq);
  IndexSeq out;
  out.groups = seq.groups;
  out.vocab = seq.vocab;
  out.combined = true;
  const Index n = seq.frames();
  Index t = 0;
  while (t < n) {
    Index run = 1;
    while (t + run < n && tuples_equal(seq, t, t + run)) ++run;
    out.push_tuple(seq.tuple(t));
    out.run_lengths.push_back(static_cast<int>(run));
    t += run;
  }
  return out;
}

IndexSeq expand(const IndexSeq& seq) {
  if (!seq.combined || seq.run_lengths.size() != static_cast<size_t>(seq.frames())) {
    throw ContractError("expand: run_lengths missing");
  }
  check_range(seq);
  IndexSeq out;
  out.groups = seq.groups;
  out.vocab = seq.vocab;
  out.combined = false;
  for (Index t = 0; t < seq.frames(); ++t) {
    const int run = seq.run_lengths[static_cast<size_t>(t)];
    VQVC_CHECK(run >= 1, "run length must be >= 1, got " << run);
    for (int r = 0; r < run; ++r) out.push_tuple(seq.tuple(t));
  }
  return out;
}

std::vector<int> separate_ids(std::span<const int> tuple, int vocab) {
  std::vector<int> ids(tuple.size());
  for (size_t g = 0; g < tuple.size(); ++g) {
    VQVC_CHECK(tuple[g] >= 0 && tuple[g] < vocab,
               "tuple component " << tuple[g] << " out of range [0, " << vocab << ")");
    ids[g] = static_cast<int>(g) * vocab + tuple[g];
  }
  return ids;
}

std::int64_t joint_id(std::span<const int> tuple, int vocab) {
  std::int64_t id = 0;
  for (size_t g = 0; g < tuple.size(); ++g) {
    VQVC_CHECK(tuple[g] >= 0 && tuple[g] < vocab,
               "tuple component " << tuple[g] << " out of range [0, " << vocab << ")");
    id = id * vocab + tuple[g];
  }
  return id;
}

std::vector<int> joint_tuple(std::int64_t id, int groups, int vocab) {
  std::int64_t total = 1;
  for (int g = 0; g < groups; ++g) total *= vocab;
  VQVC_CHECK(id >= 0 && id < total, "joint id " << id << " out of range [0, " << total << ")");
  std::vector<int> tuple(static_cast<size_t>(groups));
  for (int g = groups - 1; g >= 0; --g) {
    tuple[static_cast<size_t>(g)] = static_cast<int>(id % vocab);
    id /= vocab;
  }
  return tuple;
}

VocabStats vocab_stats(std::span<const IndexSeq> corpus) {
  VQVC_CHECK(!corpus.empty(), "vocab_stats needs a nonempty corpus");
  const int groups = corpus[0].groups;
  const int vocab = corpus[0].vocab;
  VocabStats stats;
  stats.group_histograms.assign(static_cast<size_t>(groups),
                                std::vector<std::int64_t>(static_cast<size_t>(vocab), 0));
  std::set<std::vector<int>> combos;
  double ratio_sum = 0.0;
  for (const IndexSeq& seq : corpus) {
    if (seq.groups != groups || seq.vocab != vocab) {
      throw ContractError("vocab_stats: mixed G/V across corpus");
    }
    Index original = 0, merged = 0;
    if (seq.combined) {
      merged = seq.frames();
      for (int r : seq.run_lengths) original += r;
      for (Index t = 0; t < seq.frames(); ++t) {
        const int run = seq.run_lengths[static_cast<size_t>(t)];
        for (int g = 0; g < groups; ++g) {
          stats.group_histograms[static_cast<size_t>(g)]
                                [static_cast<size_t>(seq.tuples[static_cast<size_t>(t * groups + g)])] += run;
        }
        combos.emplace(seq.tuple(t).begin(), seq.tuple(t).end());
      }
    } else {
      original = seq.frames();
      IndexSeq c = combine(seq);
      merged = c.frames();
      for (Index t = 0; t < seq.frames(); ++t) {
        for (int g = 0; g < groups; ++g) {
          stats.group_histograms[static_cast<size_t>(g)]
                                [static_cast<size_t>(seq.tuples[static_cast<size_t>(t * groups + g)])] += 1;
        }
        combos.emplace(seq.tuple(t).begin(), seq.tuple(t).end());
      }
    }
    stats.total_frames += original;
    stats.combined_frames += merged;
    if (original > 0) ratio_sum += 1.0 - static_cast<double>(merged) / static_cast<double>(original);
  }
  stats.unique_combinations = static_cast<std::int64_t>(combos.size());
  stats.reduction_ratio = ratio_sum / static_cast<double>(corpus.size());
  stats.group_perplexity.resize(static_cast<size_t>(groups));
  for (int g = 0; g < groups; ++g) {
    std::int64_t total = 0;
    for (std::int64_t c : stats.group_histograms[static_cast<size_t>(g)]) total += c;
    double entropy = 0.0;
    for (std::int64_t c : stats.group_histograms[static_cast<size_t>(g)]) {
      if (c == 0) continue;
      const double p = static_cast<double>(c) / static_cast<double>(total);
      entropy -= p * std::log(p);
    }
    stats.group_perplexity[static_cast<size_t>(g)] = std::exp(entropy);
  }
  return stats;
}

void write_index_file(const std::filesystem::path& path, std::span<const NamedIndexSeq> seqs) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open index file for writing: " + path.string());
  for (const NamedIndexSeq& named : seqs) {
    const IndexSeq& s = named.seq;
    os << "#utt " << named.utt_id << " G=" << s.groups << " V=" << s.vocab;
    if (s.combined) os << " combined=1";
    os << "\n";
    for (Index t = 0; t < s.frames(); ++t) {
      for (int g = 0; g < s.groups; ++g) {
        if (g) os << ' ';
        os << s.tuples[static_cast<size_t>(t * s.groups + g)];
      }
      if (s.combined) os << ':' << s.run_lengths[static_cast<size_t>(t)];
      os << "\n";
    }
  }
  if (!os) throw DataError("write failed: " + path.string());
}

std::vector<NamedIndexSeq> read_index_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open index file: " + path.string());
  std::vector<NamedIndexSeq> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.rfind("#utt ", 0) == 0) {
      NamedIndexSeq named;
      std::istringstream hs(line.substr(5));
      hs >> named.utt_id;
      std::string field;
      while (hs >> field) {
        if (field.rfind("G=", 0) == 0) named.seq.groups = std::stoi(field.substr(2));
        else if (field.rfind("V=", 0) == 0) named.seq.vocab = std::stoi(field.substr(2));
        else if (field == "combined=1") named.seq.combined = true;
        else throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad header field " + field);
      }
      if (named.utt_id.empty() || named.seq.groups <= 0 || named.seq.vocab <= 0) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed header");
      }
      out.push_back(std::move(named));
      continue;
    }
    if (out.empty()) throw DataError(path.string() + ": frame line before any #utt header");
    IndexSeq& s = out.back().seq;
    std::string frame_part = line;
    int run = 1;
    if (const size_t colon = line.find(':'); colon != std::string::npos) {
      if (!s.combined) {
        throw DataError(path.string() + ":" + std::to_string(lineno) +
                        ": run length on uncombined dump");
      }
      frame_part = line.substr(0, colon);
      run = std::stoi(line.substr(colon + 1));
    }
    std::istringstream fs(frame_part);
    int v, count = 0;
    while (fs >> v) {
      VQVC_CHECK(v >= 0 && v < s.vocab, path.string() << ":" << lineno << ": index out of range");
      s.tuples.push_back(v);
      ++count;
    }
    if (count != s.groups) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(s.groups) + " indices, got " + std::to_string(count));
    }
    if (s.combined) s.run_lengths.push_back(run);
  }
  return out;
}

}  // namespace vqvc

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

#include "vqvc/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace vqvc {

namespace {
constexpr double kMcdScale = 10.0 / 2.302585092994045684;  // 10 / ln 10
constexpr double kPi = 3.14159265358979323846;
}  // namespace

Tensor dct2_cepstra(const Tensor& feats) {
  VQVC_CHECK(feats.rank() == 2, "dct2 expects [frames×dim]");
  const Index t = feats.dim(0), n = feats.dim(1);
  Tensor out({t, n});
  for (Index r = 0; r < t; ++r) {
    for (Index k = 0; k < n; ++k) {
      double acc = 0.0;
      for (Index i = 0; i < n; ++i) {
        acc += static_cast<double>(feats.at(r, i)) *
               std::cos(kPi * static_cast<double>(k) * (static_cast<double>(i) + 0.5) / static_cast<double>(n));
      }
      const double scale = (k == 0) ? std::sqrt(1.0 / static_cast<double>(n))
                                    : std::sqrt(2.0 / static_cast<double>(n));
      out.at(r, k) = static_cast<float>(scale * acc);
    }
  }
  return out;
}

Tensor idct2(const Tensor& cepstra) {
  VQVC_CHECK(cepstra.rank() == 2, "idct2 expects [frames×dim]");
  const Index t = cepstra.dim(0), n = cepstra.dim(1);
  Tensor out({t, n});
  for (Index r = 0; r < t; ++r) {
    for (Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (Index k = 0; k < n; ++k) {
        const double scale = (k == 0) ? std::sqrt(1.0 / static_cast<double>(n))
                                      : std::sqrt(2.0 / static_cast<double>(n));
        acc += scale * static_cast<double>(cepstra.at(r, k)) *
               std::cos(kPi * static_cast<double>(k) * (static_cast<double>(i) + 0.5) / static_cast<double>(n));
      }
      out.at(r, i) = static_cast<float>(acc);
    }
  }
  return out;
}

double dtw_cost(const std::vector<std::vector<double>>& local, Index* path_length) {
  const Index m = static_cast<Index>(local.size());
  VQVC_CHECK(m > 0 && !local[0].empty(), "dtw needs a nonempty grid");
  const Index n = static_cast<Index>(local[0].size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> acc(static_cast<size_t>(m), std::vector<double>(static_cast<size_t>(n), kInf));
  std::vector<std::vector<Index>> len(static_cast<size_t>(m), std::vector<Index>(static_cast<size_t>(n), 0));
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) {
      const double c = local[static_cast<size_t>(i)][static_cast<size_t>(j)];
      if (i == 0 && j == 0) {
        acc[0][0] = c;
        len[0][0] = 1;
        continue;
      }
      // symmetric steps {(1,1), (1,0), (0,1)}; diagonal preferred on ties
      double best = kInf;
      Index best_len = 0;
      if (i > 0 && j > 0 && acc[static_cast<size_t>(i - 1)][static_cast<size_t>(j - 1)] <= best) {
        best = acc[static_cast<size_t>(i - 1)][static_cast<size_t>(j - 1)];
        best_len = len[static_cast<size_t>(i - 1)][static_cast<size_t>(j - 1)];
      }
      if (i > 0 && acc[static_cast<size_t>(i - 1)][static_cast<size_t>(j)] < best) {
        best = acc[static_cast<size_t>(i - 1)][static_cast<size_t>(j)];
        best_len = len[static_cast<size_t>(i - 1)][static_cast<size_t>(j)];
      }
      if (j > 0 && acc[static_cast<size_t>(i)][static_cast<size_t>(j - 1)] < best) {
        best = acc[static_cast<size_t>(i)][static_cast<size_t>(j - 1)];
        best_len = len[static_cast<size_t>(i)][static_cast<size_t>(j - 1)];
      }
      acc[static_cast<size_t>(i)][static_cast<size_t>(j)] = best + c;
      len[static_cast<size_t>(i)][static_cast<size_t>(j)] = best_len + 1;
    }
  }
  if (path_length) *path_length = len[static_cast<size_t>(m - 1)][static_cast<size_t>(n - 1)];
  return acc[static_cast<size_t>(m - 1)][static_cast<size_t>(n - 1)];
}

namespace {

// Euclidean distance over cepstral dims 1..D-1 (0th excluded).
double cep_distance(const Tensor& a, Index ra, const Tensor& b, Index rb) {
  double acc = 0.0;
  const Index d = a.dim(1);
  for (Index k = 1; k < d; ++k) {
    const double diff = static_cast<double>(a.at(ra, k)) - static_cast<double>(b.at(rb, k));
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

}  // namespace

McdResult mcd_full(const Tensor& a, const Tensor& b, bool align) {
  VQVC_CHECK(a.rank() == 2 && b.rank() == 2, "mcd expects [frames×dim]");
  VQVC_CHECK(a.dim(1) == b.dim(1), "mcd feature dims differ: " << a.dim(1) << " vs " << b.dim(1));
  VQVC_CHECK(a.dim(0) > 0 && b.dim(0) > 0, "mcd needs nonempty sequences");
  const Tensor ca = dct2_cepstra(a);
  const Tensor cb = dct2_cepstra(b);
  McdResult result;
  if (!align) {
    VQVC_CHECK(a.dim(0) == b.dim(0),
               "mcd without alignment needs equal lengths: " << a.dim(0) << " vs " << b.dim(0));
    double acc = 0.0;
    for (Index t = 0; t < ca.dim(0); ++t) acc += cep_distance(ca, t, cb, t);
    result.path_length = ca.dim(0);
    result.mcd = kMcdScale * std::sqrt(2.0) * acc / static_cast<double>(ca.dim(0));
    return result;
  }
  std::vector<std::vector<double>> local(static_cast<size_t>(ca.dim(0)),
                                         std::vector<double>(static_cast<size_t>(cb.dim(0))));
  for (Index i = 0; i < ca.dim(0); ++i)
    for (Index j = 0; j < cb.dim(0); ++j)
      local[static_cast<size_t>(i)][static_cast<size_t>(j)] = cep_distance(ca, i, cb, j);
  Index path_len = 0;
  const double cost = dtw_cost(local, &path_len);
  result.path_length = path_len;
  result.mcd = kMcdScale * std::sqrt(2.0) * cost / static_cast<double>(path_len);
  return result;
}

double mcd(const Tensor& a, const Tensor& b, bool align) { return mcd_full(a, b, align).mcd; }

Index levenshtein(std::span<const int> hyp, std::span<const int> ref) {
  const size_t m = hyp.size(), n = ref.size();
  std::vector<Index> prev(n + 1), cur(n + 1);
  for (size_t j = 0; j <= n; ++j) prev[j] = static_cast<Index>(j);
  for (size_t i = 1; i <= m; ++i) {
    cur[0] = static_cast<Index>(i);
    for (size_t j = 1; j <= n; ++j) {
      const Index sub = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

double error_rate(std::span<const int> hyp, std::span<const int> ref) {
  if (ref.empty()) throw ContractError("error_rate: empty reference");
  return static_cast<double>(levenshtein(hyp, ref)) / static_cast<double>(ref.size());
}

QuantStats quantizer_stats(std::span<const IndexSeq> corpus) {
  QuantStats stats;
  if (corpus.empty()) return stats;
  const int groups = corpus[0].groups;
  const int vocab = corpus[0].vocab;
  std::vector<std::vector<std::int64_t>> hist(static_cast<size_t>(groups),
                                              std::vector<std::int64_t>(static_cast<size_t>(vocab), 0));
  std::set<std::vector<int>> combos;
  for (const IndexSeq& seq : corpus) {
    VQVC_CHECK(seq.groups == groups && seq.vocab == vocab, "mixed G/V in quantizer_stats corpus");
    for (Index t = 0; t < seq.frames(); ++t) {
      for (int g = 0; g < groups; ++g) {
        hist[static_cast<size_t>(g)][static_cast<size_t>(seq.tuples[static_cast<size_t>(t * groups + g)])]++;
      }
      combos.emplace(seq.tuple(t).begin(), seq.tuple(t).end());
    }
  }
  stats.unique_combinations = static_cast<std::int64_t>(combos.size());
  for (int g = 0; g < groups; ++g) {
    std::int64_t total = 0;
    for (std::int64_t c : hist[static_cast<size_t>(g)]) total += c;
    double entropy = 0.0;
    for (std::int64_t c : hist[static_cast<size_t>(g)]) {
      if (c == 0 || total == 0) continue;
      const double p = static_cast<double>(c) / static_cast<double>(total);
      entropy -= p * std::log(p);
    }
    stats.group_perplexity.push_back(std::exp(entropy));
  }
  return stats;
}

ConversionScore conversion_score(const Tensor& converted, const Tensor& oracle_target,
                                 const Tensor& source_feats) {
  ConversionScore score;
  score.mcd_conv = mcd(converted, oracle_target, /*align=*/true);
  score.mcd_copy = mcd(source_feats, oracle_target, /*align=*/true);
  return score;
}

Tensor build_symbol_templates(std::span<const Tensor> feats,
                              std::span<const std::vector<int>> frame_symbols, int alphabet) {
  VQVC_CHECK(feats.size() == frame_symbols.size(), "feats/labels size mismatch");
  VQVC_CHECK(!feats.empty(), "no template data");
  const Index dim = feats[0].dim(1);
  std::vector<std::vector<double>> sums(static_cast<size_t>(alphabet),
                                        std::vector<double>(static_cast<size_t>(dim), 0.0));
  std::vector<std::int64_t> counts(static_cast<size_t>(alphabet), 0);
  for (size_t u = 0; u < feats.size(); ++u) {
    VQVC_CHECK(feats[u].dim(0) == static_cast<Index>(frame_symbols[u].size()),
               "frame label count mismatch for utterance " << u);
    for (Index t = 0; t < feats[u].dim(0); ++t) {
      const int s = frame_symbols[u][static_cast<size_t>(t)];
      VQVC_CHECK(s >= 0 && s < alphabet, "bad frame label " << s);
      counts[static_cast<size_t>(s)]++;
      for (Index d = 0; d < dim; ++d) sums[static_cast<size_t>(s)][static_cast<size_t>(d)] += feats[u].at(t, d);
    }
  }
  Tensor templates({static_cast<Index>(alphabet), dim});
  for (int s = 0; s < alphabet; ++s) {
    for (Index d = 0; d < dim; ++d) {
      // unseen symbols get a huge sentinel so they are never decoded
      templates.at(s, d) = counts[static_cast<size_t>(s)] == 0
                               ? 1e9f
                               : static_cast<float>(sums[static_cast<size_t>(s)][static_cast<size_t>(d)] /
                                                    static_cast<double>(counts[static_cast<size_t>(s)]));
    }
  }
  return templates;
}

std::vector<int> template_decode(const Tensor& feats, const Tensor& templates) {
  VQVC_CHECK(feats.rank() == 2 && templates.rank() == 2 && feats.dim(1) == templates.dim(1),
             "template_decode dim mismatch");
  const Index dim = feats.dim(1);
  // loudness-invariant matching: per-vector mean removal, the same effect as
  // dropping the 0th cepstral coefficient
  auto mean_of = [&](const Tensor& t, Index row) {
    double m = 0.0;
    for (Index d = 0; d < dim; ++d) m += t.at(row, d);
    return m / static_cast<double>(dim);
  };
  std::vector<double> template_means(static_cast<size_t>(templates.dim(0)));
  for (Index s = 0; s < templates.dim(0); ++s) template_means[static_cast<size_t>(s)] = mean_of(templates, s);

  std::vector<int> out;
  int prev = -1;
  for (Index t = 0; t < feats.dim(0); ++t) {
    const double fm = mean_of(feats, t);
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index s = 0; s < templates.dim(0); ++s) {
      double d2 = 0.0;
      for (Index d = 0; d < dim; ++d) {
        const double diff = (static_cast<double>(feats.at(t, d)) - fm) -
                            (static_cast<double>(templates.at(s, d)) - template_means[static_cast<size_t>(s)]);
        d2 += diff * diff;
      }
      if (d2 < best_d) {
        best_d = d2;
        best = static_cast<int>(s);
      }
    }
    if (best != prev) {
      out.push_back(best);
      prev = best;
    }
  }
  return out;
}

}  // namespace vqvc

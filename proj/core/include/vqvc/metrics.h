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

#ifndef VQVC_METRICS_H_
#define VQVC_METRICS_H_

#include <span>
#include <vector>

#include "vqvc/index_codec.h"
#include "vqvc/tensor.h"

namespace vqvc {

// Orthonormal DCT-II along rows; feature frames -> cepstra.
Tensor dct2_cepstra(const Tensor& feats);
Tensor idct2(const Tensor& cepstra);

struct McdResult {
  double mcd = 0.0;      // (10/ln 10)*sqrt(2*sum_d>=1 (c_d-c'_d)^2), path mean
  Index path_length = 0; // aligned pair count (equals frame count unaligned)
};

// Mel-cepstral-distortion analogue. Cepstra via DCT-II, 0th coefficient
// excluded. align=true warps with symmetric DTW steps {(1,0),(0,1),(1,1)}
// and Euclidean local cost; align=false requires equal lengths.
McdResult mcd_full(const Tensor& a, const Tensor& b, bool align);
double mcd(const Tensor& a, const Tensor& b, bool align);

// Minimal DTW cost (sum of local costs over the optimal path) on a
// precomputed local-cost grid; exposed for oracle comparison.
double dtw_cost(const std::vector<std::vector<double>>& local, Index* path_length = nullptr);

// Levenshtein(hyp, ref) / len(ref), unit costs. ref must be nonempty.
double error_rate(std::span<const int> hyp, std::span<const int> ref);
Index levenshtein(std::span<const int> hyp, std::span<const int> ref);

struct QuantStats {
  std::vector<double> group_perplexity;  // exp(entropy) of per-group usage
  std::int64_t unique_combinations = 0;
};

QuantStats quantizer_stats(std::span<const IndexSeq> corpus);

struct ConversionScore {
  double mcd_conv = 0.0;  // converted vs oracle target rendering
  double mcd_copy = 0.0;  // unconverted source vs oracle target rendering
};

// Success when mcd_conv < mcd_copy: the conversion moved the utterance
// closer to the target's own rendering than the raw source was.
ConversionScore conversion_score(const Tensor& converted, const Tensor& oracle_target,
                                 const Tensor& source_feats);

// Nearest-template frame decoder used as the intelligibility proxy:
// templates are per-symbol mean feature vectors of the target speaker's
// training data; adjacent repeats collapse to one symbol.
std::vector<int> template_decode(const Tensor& feats, const Tensor& templates);
// templates[s] row is the mean of frames labeled s; rows for unseen symbols
// are poisoned so they never win.
Tensor build_symbol_templates(std::span<const Tensor> feats,
                              std::span<const std::vector<int>> frame_symbols, int alphabet);

}  // namespace vqvc

#endif  // VQVC_METRICS_H_

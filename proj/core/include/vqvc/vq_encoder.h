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

#ifndef VQVC_VQ_ENCODER_H_
#define VQVC_VQ_ENCODER_H_

#include <optional>
#include <span>
#include <vector>

#include "vqvc/graph.h"
#include "vqvc/index_codec.h"
#include "vqvc/param_store.h"
#include "vqvc/rng.h"
#include "vqvc/synth.h"

namespace vqvc {

// Self-supervised representation learner: convolutional encoder f mapping
// raw samples to latents z, a grouped Gumbel-softmax quantizer q with a
// single codebook shared across groups, a causal convolutional aggregator g
// yielding context c, and a future-prediction contrastive objective.

struct ConvLayerSpec {
  int channels = 16;
  int kernel = 2;
  int stride = 1;
};

struct EncoderConfig {
  // Receptive field 30 samples, total stride 10: one latent frame per
  // feature-extractor hop. The wide first kernel does the spectral
  // analysis; everything after the rectified second layer is pointwise, so
  // latents are band-energy mixtures with no sub-frame time structure.
  std::vector<ConvLayerSpec> layers = {{16, 20, 5}, {16, 3, 2}, {16, 1, 1}, {16, 1, 1}};

  int total_stride() const;
  int receptive_field() const;
  Index output_frames(Index signal_len) const;
};

struct QuantizerConfig {
  int dim = 16;    // latent dim d; must be divisible by groups
  int groups = 2;  // G
  int vocab = 8;   // V codewords per group

  int group_dim() const;
};

struct AggregatorConfig {
  int layers = 2;
  int kernel = 3;
};

struct ContrastiveConfig {
  int steps = 3;                // K, max prediction offset
  int n_negatives = 10;         // samples estimating the expectation term
  float lambda_weight = 1.0f;   // weight on the mean negative term
  float tau_start = 2.0f;
  float tau_end = 0.5f;
  int tau_anneal_steps = 1500;  // linear anneal, then hold

  float tau_at(int step) const;
};

enum class QuantizeMode {
  kTrainHard,  // hard forward (argmax), Gumbel-softmax gradient backward
  kTrainSoft,  // soft mixture forward; same backward formulas, finite-diff checkable
  kEval,       // no noise, pure argmax over logits
};

struct QuantizeTrace {
  // Gumbel draws per group, row-major [t*V + j]; lets an oracle recompute
  // the probabilities exactly.
  std::vector<std::vector<float>> gumbel_per_group;
};

struct ContrastiveTrace {
  // Sampled negative frame ids per step k (flattened (T-k) x n_negatives).
  std::vector<std::vector<int>> negatives_per_k;
};

class VqEncoderModel {
 public:
  VqEncoderModel(EncoderConfig enc, QuantizerConfig quant, AggregatorConfig agg,
                 ContrastiveConfig contrast);

  void init_params(ParamStore& store, Rng& rng) const;

  // Raw samples -> latent frames z [T×d]; T = floor((len-RF)/stride)+1.
  Var encode(Graph& g, ParamStore& store, std::span<const float> signal) const;

  struct QuantizeResult {
    Var zhat;                    // [T×d] reconstruction from chosen codewords
    std::vector<int> indices;    // flat T*G, argmax per group
    std::vector<Var> soft_probs; // per group [T×V]; empty in eval mode
  };
  QuantizeResult quantize(Graph& g, ParamStore& store, Var z, float tau, QuantizeMode mode,
                          Rng* noise_rng, QuantizeTrace* trace = nullptr) const;

  // Causal context c over zhat; same frame count, c_t depends on zhat_{<=t}.
  Var aggregate(Graph& g, ParamStore& store, Var zhat) const;

  // Eqized future-prediction loss, summed over k = 1..K:
  //   L_k = -sum_i [ log s(z_{i+k}^T W_k c_i)
  //                  + lambda * mean_neg log s(-z~^T W_k c_i) ]
  // Negatives are uniform over the utterance's frames excluding i+k.
  Var contrastive_loss(Graph& g, ParamStore& store, Var c, Var z, Rng& neg_rng,
                       ContrastiveTrace* trace = nullptr) const;
  // Number of (i, k) positive terms for a length-T sequence; loss scale.
  Index contrastive_terms(Index t) const;

  // Eval-mode indices for a signal (RMS-normalized first); the aggregator
  // is not used.
  IndexSeq extract_indices(ParamStore& store, std::span<const float> signal) const;

  const EncoderConfig& encoder_config() const { return enc_; }
  const QuantizerConfig& quantizer_config() const { return quant_; }
  const ContrastiveConfig& contrastive_config() const { return contrast_; }

 private:
  EncoderConfig enc_;
  QuantizerConfig quant_;
  AggregatorConfig agg_;
  ContrastiveConfig contrast_;
};

struct VqTrainConfig {
  int steps = 3000;
  int batch = 4;
  int crop_frames = 48;  // max latent frames per training crop
  int eval_interval = 100;
  AdamConfig adam{.lr = 2e-3f};
  std::uint64_t seed = 1;
};

struct VqEvalRow {
  int step = 0;
  double mean_loss = 0.0;               // over the last interval
  std::vector<double> group_perplexity; // probe-set codeword usage
  std::int64_t unique_combinations = 0;
};

struct VqTrainResult {
  std::vector<double> step_loss;  // per-term-normalized loss, one per step
  std::vector<VqEvalRow> evals;
};

// Per-utterance loudness equalization in front of the encoder; keeps the
// quantizer from spending codes on the speaker's amplitude scale.
std::vector<float> normalize_signal_rms(std::span<const float> signal);

// Trains encoder/quantizer/aggregator/W_k on the manifest's "quantizer"
// split. Initializes params into the (empty) store. Aborts with
// NumericError on divergence.
VqTrainResult pretrain_quantizer(const Manifest& manifest, const VqEncoderModel& model,
                                 const VqTrainConfig& cfg, ParamStore& store);

}  // namespace vqvc

#endif  // VQVC_VQ_ENCODER_H_

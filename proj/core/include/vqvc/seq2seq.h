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

#ifndef VQVC_SEQ2SEQ_H_
#define VQVC_SEQ2SEQ_H_

#include <optional>
#include <span>
#include <vector>

#include "vqvc/graph.h"
#include "vqvc/index_codec.h"
#include "vqvc/param_store.h"
#include "vqvc/rng.h"

namespace vqvc {

// Transformer encoder-decoder mapping postprocessed index sequences to
// acoustic feature sequences. Teacher-forced training with an L1 loss plus
// a weighted binary cross-entropy on the stop token; autoregressive
// inference with a key/value cache.

struct Seq2SeqConfig {
  int groups = 2;
  int vocab = 8;
  // Front-end: separate per-group tables (G*V rows, embeddings concatenated)
  // or one joint table (V^G rows).
  bool separate_tables = true;
  int embed_dim = 8;  // per group; concatenated dim is G*embed_dim
  bool project_after_concat = true;

  int model_dim = 32;
  int heads = 2;
  // decoder prenet bottleneck: acoustic -> prenet_dim -> model_dim with a
  // relu in between; starves the acoustic path so pacing must come from the
  // encoder. 0 = plain linear input.
  int prenet_dim = 8;
  int enc_layers = 2;
  int dec_layers = 2;
  int ffn_dim = 64;
  int acoustic_dim = 16;

  float stop_pos_weight = 5.0f;  // the single positive stop frame is rare
  float stop_threshold = 0.5f;
  int max_len_factor = 10;       // inference cap: factor * input tokens
  // Teacher-input corruption: keeps the decoder leaning on the encoder
  // alignment instead of copying its acoustic input, which is what makes
  // free-running decoding track. Dropped frames are zeroed (the same
  // "unknown" value as the start frame). Scheduled sampling replaces input
  // frames with the model's own first-pass predictions (detached) at the
  // given probability, at the cost of a second decoder pass.
  float teacher_noise_std = 0.1f;
  float teacher_frame_dropout = 0.25f;
  float scheduled_sampling_prob = 0.0f;
  // Optional monotonic cross-attention window during free-running decoding
  // (attention limited to [p - back, p + forward] around the tracked
  // alignment position). Disabled by default; kept as a decoding knob.
  int att_window_back = -1;
  int att_window_forward = 0;

  int concat_dim() const { return groups * embed_dim; }
  Index joint_rows() const;
  void validate() const;
};

class Seq2SeqModel {
 public:
  explicit Seq2SeqModel(Seq2SeqConfig cfg);

  const Seq2SeqConfig& config() const { return cfg_; }

  void init_params(ParamStore& store, Rng& rng) const;
  // Feature normalization buffers; stats from the training corpus.
  void set_feature_norm(ParamStore& store, const Tensor& mean, const Tensor& stddev) const;
  Tensor normalize(const ParamStore& store, const Tensor& feats) const;
  Tensor denormalize(const ParamStore& store, const Tensor& feats_norm) const;

  // Token embeddings (front-end lookups + optional projection + positional
  // encoding). Rejects sequences whose vocab/groups disagree with the config.
  Var embed_front_end(Graph& g, ParamStore& store, const IndexSeq& seq) const;
  // Self-attention encoder; length preserved. Collects attention maps into
  // attn_trace when given.
  Var encode_tokens(Graph& g, ParamStore& store, Var embeddings,
                    std::vector<Tensor>* attn_trace = nullptr) const;

  struct TrainOut {
    Var loss;         // l1 + weighted stop BCE
    Var l1;           // teacher-forced L1 (normalized space)
    Var pred;         // [m×acoustic_dim]
    Var stop_logits;  // [m×1]
  };
  // Teacher forcing: decoder input is target shifted right with a zero start
  // frame (plus optional corruption during training) under a causal
  // self-attention mask. target_norm is in normalized space.
  TrainOut decode_train(Graph& g, ParamStore& store, Var enc_states, const Tensor& target_norm,
                        Rng* teacher_noise_rng, std::vector<Tensor>* attn_trace = nullptr) const;

  struct InferOut {
    Tensor frames;  // de-normalized [m×acoustic_dim]
    bool truncated = false;
  };
  // Autoregressive generation; stops when sigmoid(stop) > stop_threshold or
  // max_len is reached. Deterministic, graph-free, key/value-cached.
  InferOut decode_infer(ParamStore& store, const IndexSeq& seq) const;

  // Step-by-step decoder with forced inputs (normalized); matches the
  // teacher-forced graph path and exists so that equivalence is testable.
  Tensor decode_forced(ParamStore& store, const IndexSeq& seq, const Tensor& forced_inputs_norm) const;

  // Mean teacher-forced L1 per element, normalized space; no noise.
  double teacher_forced_l1(ParamStore& store, const IndexSeq& seq, const Tensor& target_raw) const;

  // Direct (graph-free) loss recomputation, usable as an oracle.
  static double reference_loss(const Tensor& pred, const Tensor& stop_logits, const Tensor& target,
                               float stop_pos_weight);

  std::vector<int> front_end_ids(const IndexSeq& seq) const;  // flat lookup ids

 private:
  Var attention_block(Graph& g, ParamStore& store, const std::string& prefix, Var q_in, Var kv_in,
                      const Var* mask, std::vector<Tensor>* attn_trace) const;
  Var ffn_block(Graph& g, ParamStore& store, const std::string& prefix, Var x) const;
  Var decoder_stack(Graph& g, ParamStore& store, Var x, Var enc_states,
                    std::vector<Tensor>* attn_trace) const;

  Seq2SeqConfig cfg_;
};

// Sinusoidal positional encoding [len×dim].
Tensor positional_encoding(Index len, int dim);

// Per-dimension mean and std (floored) over a set of feature tensors.
void feature_norm_stats(std::span<const Tensor> feats, Tensor* mean, Tensor* stddev);

}  // namespace vqvc

#endif  // VQVC_SEQ2SEQ_H_

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

#include "vqvc/seq2seq.h"

#include <algorithm>
#include <cmath>

#include "kernels.h"

namespace vqvc {

namespace {
constexpr float kMaskValue = -1e9f;
}

Index Seq2SeqConfig::joint_rows() const {
  Index rows = 1;
  for (int g = 0; g < groups; ++g) rows *= vocab;
  return rows;
}

void Seq2SeqConfig::validate() const {
  VQVC_CHECK(model_dim % heads == 0, "model dim " << model_dim << " not divisible by heads " << heads);
  VQVC_CHECK(groups >= 1 && vocab >= 2, "need G >= 1 and V >= 2");
  VQVC_CHECK(embed_dim >= 1 && model_dim >= 1 && ffn_dim >= 1 && acoustic_dim >= 1, "bad dims");
  if (!project_after_concat) {
    VQVC_CHECK(concat_dim() == model_dim,
               "without a projection the concatenated embedding dim " << concat_dim()
                                                                      << " must equal model dim "
                                                                      << model_dim);
  }
}

Seq2SeqModel::Seq2SeqModel(Seq2SeqConfig cfg) : cfg_(cfg) { cfg_.validate(); }

Tensor positional_encoding(Index len, int dim) {
  Tensor pe({len, dim});
  for (Index t = 0; t < len; ++t) {
    for (int i = 0; i < dim; i += 2) {
      const double angle = static_cast<double>(t) /
                           std::pow(10000.0, static_cast<double>(i) / static_cast<double>(dim));
      pe.at(t, i) = static_cast<float>(std::sin(angle));
      if (i + 1 < dim) pe.at(t, i + 1) = static_cast<float>(std::cos(angle));
    }
  }
  return pe;
}

void feature_norm_stats(std::span<const Tensor> feats, Tensor* mean, Tensor* stddev) {
  VQVC_CHECK(!feats.empty(), "feature_norm_stats needs data");
  const Index dim = feats[0].dim(1);
  std::vector<double> sum(static_cast<size_t>(dim), 0.0), sum2(static_cast<size_t>(dim), 0.0);
  std::int64_t count = 0;
  for (const Tensor& f : feats) {
    VQVC_CHECK(f.dim(1) == dim, "mixed feature dims");
    for (Index t = 0; t < f.dim(0); ++t) {
      for (Index d = 0; d < dim; ++d) {
        sum[static_cast<size_t>(d)] += f.at(t, d);
        sum2[static_cast<size_t>(d)] += static_cast<double>(f.at(t, d)) * f.at(t, d);
      }
      ++count;
    }
  }
  *mean = Tensor({dim});
  *stddev = Tensor({dim});
  for (Index d = 0; d < dim; ++d) {
    const double mu = sum[static_cast<size_t>(d)] / static_cast<double>(count);
    const double var = std::max(0.0, sum2[static_cast<size_t>(d)] / static_cast<double>(count) - mu * mu);
    mean->at(d) = static_cast<float>(mu);
    stddev->at(d) = static_cast<float>(std::max(std::sqrt(var), 1e-3));
  }
}

void Seq2SeqModel::init_params(ParamStore& store, Rng& rng) const {
  if (cfg_.separate_tables) {
    store.create_gaussian("fe.table", {static_cast<Index>(cfg_.groups) * cfg_.vocab, cfg_.embed_dim},
                          0.02f, rng);
  } else {
    store.create_gaussian("fe.joint", {cfg_.joint_rows(), cfg_.concat_dim()}, 0.02f, rng);
  }
  if (cfg_.project_after_concat) {
    store.create_uniform("fe.proj.w", {cfg_.concat_dim(), cfg_.model_dim}, cfg_.concat_dim(), rng);
    store.create_zeros("fe.proj.b", {cfg_.model_dim});
  }
  const Index d = cfg_.model_dim;
  auto make_ln = [&](const std::string& name) {
    store.create_ones(name + ".g", {d});
    store.create_zeros(name + ".b", {d});
  };
  auto make_linear = [&](const std::string& name, Index in, Index out) {
    store.create_uniform(name + ".w", {in, out}, in, rng);
    store.create_zeros(name + ".b", {out});
  };
  auto make_attn = [&](const std::string& prefix) {
    make_linear(prefix + ".wq", d, d);
    make_linear(prefix + ".wk", d, d);
    make_linear(prefix + ".wv", d, d);
    make_linear(prefix + ".wo", d, d);
  };
  for (int i = 0; i < cfg_.enc_layers; ++i) {
    const std::string p = "enc" + std::to_string(i);
    make_ln(p + ".ln1");
    make_attn(p + ".self");
    make_ln(p + ".ln2");
    make_linear(p + ".ff1", d, cfg_.ffn_dim);
    make_linear(p + ".ff2", cfg_.ffn_dim, d);
  }
  make_ln("enc.ln");
  if (cfg_.prenet_dim > 0) {
    make_linear("dec.in1", cfg_.acoustic_dim, cfg_.prenet_dim);
    make_linear("dec.in2", cfg_.prenet_dim, d);
  } else {
    make_linear("dec.in", cfg_.acoustic_dim, d);
  }
  for (int i = 0; i < cfg_.dec_layers; ++i) {
    const std::string p = "dec" + std::to_string(i);
    make_ln(p + ".ln1");
    make_attn(p + ".self");
    make_ln(p + ".ln2");
    make_attn(p + ".cross");
    make_ln(p + ".ln3");
    make_linear(p + ".ff1", d, cfg_.ffn_dim);
    make_linear(p + ".ff2", cfg_.ffn_dim, d);
  }
  make_ln("dec.ln");
  make_linear("out.frame", d, cfg_.acoustic_dim);
  make_linear("out.stop", d, 1);
}

void Seq2SeqModel::set_feature_norm(ParamStore& store, const Tensor& mean, const Tensor& stddev) const {
  VQVC_CHECK(mean.size() == cfg_.acoustic_dim && stddev.size() == cfg_.acoustic_dim,
             "feature norm stats must be [acoustic_dim]");
  if (store.has("norm.mean")) {
    store.value("norm.mean") = mean;
    store.value("norm.std") = stddev;
  } else {
    store.create_buffer("norm.mean", mean);
    store.create_buffer("norm.std", stddev);
  }
}

Tensor Seq2SeqModel::normalize(const ParamStore& store, const Tensor& feats) const {
  const Tensor& mean = store.value("norm.mean");
  const Tensor& stddev = store.value("norm.std");
  Tensor out = feats.clone_values();
  for (Index t = 0; t < out.dim(0); ++t)
    for (Index d = 0; d < out.dim(1); ++d) out.at(t, d) = (out.at(t, d) - mean.at(d)) / stddev.at(d);
  return out;
}

Tensor Seq2SeqModel::denormalize(const ParamStore& store, const Tensor& feats_norm) const {
  const Tensor& mean = store.value("norm.mean");
  const Tensor& stddev = store.value("norm.std");
  Tensor out = feats_norm.clone_values();
  for (Index t = 0; t < out.dim(0); ++t)
    for (Index d = 0; d < out.dim(1); ++d) out.at(t, d) = out.at(t, d) * stddev.at(d) + mean.at(d);
  return out;
}

std::vector<int> Seq2SeqModel::front_end_ids(const IndexSeq& seq) const {
  VQVC_CHECK(seq.groups == cfg_.groups && seq.vocab == cfg_.vocab,
             "vocabulary mismatch: sequence G=" << seq.groups << " V=" << seq.vocab
                                                << " vs model G=" << cfg_.groups
                                                << " V=" << cfg_.vocab);
  const Index n = seq.frames();
  std::vector<int> ids;
  if (cfg_.separate_tables) {
    ids.resize(static_cast<size_t>(n) * cfg_.groups);
    for (Index t = 0; t < n; ++t) {
      const std::vector<int> sep = separate_ids(seq.tuple(t), cfg_.vocab);
      for (int g = 0; g < cfg_.groups; ++g) ids[static_cast<size_t>(t) * cfg_.groups + g] = sep[static_cast<size_t>(g)];
    }
  } else {
    ids.resize(static_cast<size_t>(n));
    for (Index t = 0; t < n; ++t) ids[static_cast<size_t>(t)] = static_cast<int>(joint_id(seq.tuple(t), cfg_.vocab));
  }
  return ids;
}

Var Seq2SeqModel::embed_front_end(Graph& g, ParamStore& store, const IndexSeq& seq) const {
  const Index n = seq.frames();
  VQVC_CHECK(n > 0, "empty index sequence");
  const std::vector<int> ids = front_end_ids(seq);
  Var x;
  if (cfg_.separate_tables) {
    Var table = store.var(g, "fe.table");
    for (int grp = 0; grp < cfg_.groups; ++grp) {
      std::vector<int> group_ids(static_cast<size_t>(n));
      for (Index t = 0; t < n; ++t) group_ids[static_cast<size_t>(t)] = ids[static_cast<size_t>(t) * cfg_.groups + grp];
      Var e = embedding(table, group_ids);
      x = grp == 0 ? e : concat(x, e, 1);
    }
  } else {
    x = embedding(store.var(g, "fe.joint"), ids);
  }
  if (cfg_.project_after_concat) {
    x = add(matmul(x, store.var(g, "fe.proj.w")), store.var(g, "fe.proj.b"));
  }
  return add(x, g.constant(positional_encoding(n, cfg_.model_dim)));
}

Var Seq2SeqModel::attention_block(Graph& g, ParamStore& store, const std::string& prefix, Var q_in,
                                  Var kv_in, const Var* mask, std::vector<Tensor>* attn_trace) const {
  const int dh = cfg_.model_dim / cfg_.heads;
  const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(dh));
  Var q = add(matmul(q_in, store.var(g, prefix + ".wq.w")), store.var(g, prefix + ".wq.b"));
  Var k = add(matmul(kv_in, store.var(g, prefix + ".wk.w")), store.var(g, prefix + ".wk.b"));
  Var v = add(matmul(kv_in, store.var(g, prefix + ".wv.w")), store.var(g, prefix + ".wv.b"));
  Var heads_out;
  for (int h = 0; h < cfg_.heads; ++h) {
    Var qh = slice(q, 1, static_cast<Index>(h) * dh, dh);
    Var kh = slice(k, 1, static_cast<Index>(h) * dh, dh);
    Var vh = slice(v, 1, static_cast<Index>(h) * dh, dh);
    Var scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    if (mask) scores = add(scores, *mask);
    Var attn = softmax(scores);
    if (attn_trace) attn_trace->push_back(attn.value());
    Var oh = matmul(attn, vh);
    heads_out = h == 0 ? oh : concat(heads_out, oh, 1);
  }
  return add(matmul(heads_out, store.var(g, prefix + ".wo.w")), store.var(g, prefix + ".wo.b"));
}

Var Seq2SeqModel::ffn_block(Graph& g, ParamStore& store, const std::string& prefix, Var x) const {
  Var h = relu(add(matmul(x, store.var(g, prefix + ".ff1.w")), store.var(g, prefix + ".ff1.b")));
  return add(matmul(h, store.var(g, prefix + ".ff2.w")), store.var(g, prefix + ".ff2.b"));
}

Var Seq2SeqModel::encode_tokens(Graph& g, ParamStore& store, Var embeddings,
                                std::vector<Tensor>* attn_trace) const {
  VQVC_CHECK(embeddings.value().dim(0) >= 1, "encode_tokens needs a nonempty input");
  Var x = embeddings;
  for (int i = 0; i < cfg_.enc_layers; ++i) {
    const std::string p = "enc" + std::to_string(i);
    Var h = layer_norm(x, store.var(g, p + ".ln1.g"), store.var(g, p + ".ln1.b"));
    x = add(x, attention_block(g, store, p + ".self", h, h, nullptr, attn_trace));
    Var h2 = layer_norm(x, store.var(g, p + ".ln2.g"), store.var(g, p + ".ln2.b"));
    x = add(x, ffn_block(g, store, p, h2));
  }
  return layer_norm(x, store.var(g, "enc.ln.g"), store.var(g, "enc.ln.b"));
}

Var Seq2SeqModel::decoder_stack(Graph& g, ParamStore& store, Var x, Var enc_states,
                                std::vector<Tensor>* attn_trace) const {
  const Index m = x.value().dim(0);
  Tensor mask_t({m, m});
  for (Index i = 0; i < m; ++i)
    for (Index j = i + 1; j < m; ++j) mask_t.at(i, j) = kMaskValue;
  Var mask = g.constant(std::move(mask_t));
  for (int i = 0; i < cfg_.dec_layers; ++i) {
    const std::string p = "dec" + std::to_string(i);
    Var h = layer_norm(x, store.var(g, p + ".ln1.g"), store.var(g, p + ".ln1.b"));
    x = add(x, attention_block(g, store, p + ".self", h, h, &mask, attn_trace));
    Var h2 = layer_norm(x, store.var(g, p + ".ln2.g"), store.var(g, p + ".ln2.b"));
    x = add(x, attention_block(g, store, p + ".cross", h2, enc_states, nullptr, attn_trace));
    Var h3 = layer_norm(x, store.var(g, p + ".ln3.g"), store.var(g, p + ".ln3.b"));
    x = add(x, ffn_block(g, store, p, h3));
  }
  return layer_norm(x, store.var(g, "dec.ln.g"), store.var(g, "dec.ln.b"));
}

namespace {

// shifted teacher inputs: zero start frame, then target frames
Tensor shift_right(const Tensor& target, Index acoustic_dim) {
  const Index m = target.dim(0);
  Tensor shifted({m, acoustic_dim});
  for (Index t = 1; t < m; ++t)
    for (Index d = 0; d < acoustic_dim; ++d) shifted.at(t, d) = target.at(t - 1, d);
  return shifted;
}

}  // namespace

Seq2SeqModel::TrainOut Seq2SeqModel::decode_train(Graph& g, ParamStore& store, Var enc_states,
                                                  const Tensor& target_norm,
                                                  Rng* teacher_noise_rng,
                                                  std::vector<Tensor>* attn_trace) const {
  VQVC_CHECK(target_norm.rank() == 2 && target_norm.dim(1) == cfg_.acoustic_dim,
             "target must be [m×" << cfg_.acoustic_dim << "]");
  const Index m = target_norm.dim(0);
  VQVC_CHECK(m >= 1, "empty target");

  Tensor shifted = shift_right(target_norm, cfg_.acoustic_dim);
  if (teacher_noise_rng) {
    if (cfg_.scheduled_sampling_prob > 0.0f) {
      // first pass: plain teacher forcing; its detached predictions stand in
      // for the model's own outputs on a sampled subset of input frames
      Var x1;
      if (cfg_.prenet_dim > 0) {
        Var h1 = relu(add(matmul(g.constant(shifted.clone_values()), store.var(g, "dec.in1.w")),
                          store.var(g, "dec.in1.b")));
        x1 = add(matmul(h1, store.var(g, "dec.in2.w")), store.var(g, "dec.in2.b"));
      } else {
        x1 = add(matmul(g.constant(shifted.clone_values()), store.var(g, "dec.in.w")),
                 store.var(g, "dec.in.b"));
      }
      x1 = add(x1, g.constant(positional_encoding(m, cfg_.model_dim)));
      x1 = decoder_stack(g, store, x1, enc_states, nullptr);
      Var pred1 = add(matmul(x1, store.var(g, "out.frame.w")), store.var(g, "out.frame.b"));
      const Tensor& p1 = pred1.value();
      for (Index t = 1; t < m; ++t) {
        if (teacher_noise_rng->uniform() < cfg_.scheduled_sampling_prob) {
          for (Index d = 0; d < cfg_.acoustic_dim; ++d) shifted.at(t, d) = p1.at(t - 1, d);
        }
      }
    }
    if (cfg_.teacher_frame_dropout > 0.0f) {
      for (Index t = 1; t < m; ++t) {
        if (teacher_noise_rng->uniform() < cfg_.teacher_frame_dropout) {
          for (Index d = 0; d < cfg_.acoustic_dim; ++d) shifted.at(t, d) = 0.0f;
        }
      }
    }
    if (cfg_.teacher_noise_std > 0.0f) {
      for (Index i = 0; i < shifted.size(); ++i) {
        shifted.at(i) += static_cast<float>(teacher_noise_rng->gaussian(0.0, cfg_.teacher_noise_std));
      }
    }
  }

  Var x;
  if (cfg_.prenet_dim > 0) {
    Var h = relu(add(matmul(g.constant(std::move(shifted)), store.var(g, "dec.in1.w")),
                     store.var(g, "dec.in1.b")));
    x = add(matmul(h, store.var(g, "dec.in2.w")), store.var(g, "dec.in2.b"));
  } else {
    x = add(matmul(g.constant(std::move(shifted)), store.var(g, "dec.in.w")),
            store.var(g, "dec.in.b"));
  }
  x = add(x, g.constant(positional_encoding(m, cfg_.model_dim)));
  x = decoder_stack(g, store, x, enc_states, attn_trace);

  TrainOut out;
  out.pred = add(matmul(x, store.var(g, "out.frame.w")), store.var(g, "out.frame.b"));
  out.stop_logits = add(matmul(x, store.var(g, "out.stop.w")), store.var(g, "out.stop.b"));

  Var diff = add(out.pred, scale(g.constant(target_norm.clone_values()), -1.0f));
  out.l1 = mean(abs(diff));

  // weighted stop BCE: exactly one positive label, at the final frame
  Tensor w_pos({m, 1}), w_neg({m, 1});
  for (Index t = 0; t < m; ++t) {
    w_pos.at(t, 0) = (t == m - 1) ? cfg_.stop_pos_weight : 0.0f;
    w_neg.at(t, 0) = (t == m - 1) ? 0.0f : 1.0f;
  }
  Var pos_part = sum(mul(log_sigmoid(out.stop_logits), g.constant(std::move(w_pos))));
  Var neg_part = sum(mul(log_sigmoid(scale(out.stop_logits, -1.0f)), g.constant(std::move(w_neg))));
  Var stop_loss = scale(add(pos_part, neg_part), -1.0f / static_cast<float>(m));
  out.loss = add(out.l1, stop_loss);
  return out;
}

double Seq2SeqModel::reference_loss(const Tensor& pred, const Tensor& stop_logits,
                                    const Tensor& target, float stop_pos_weight) {
  VQVC_CHECK(pred.shape() == target.shape(), "pred/target shape mismatch");
  const Index m = pred.dim(0);
  double l1 = 0.0;
  for (Index i = 0; i < pred.size(); ++i) l1 += std::fabs(static_cast<double>(pred.at(i)) - target.at(i));
  l1 /= static_cast<double>(pred.size());
  double bce = 0.0;
  for (Index t = 0; t < m; ++t) {
    const float s = stop_logits.at(t, 0);
    if (t == m - 1) bce += -static_cast<double>(stop_pos_weight) * kern::log_sigmoidf(s);
    else bce += -static_cast<double>(kern::log_sigmoidf(-s));
  }
  return l1 + bce / static_cast<double>(m);
}

// ---- graph-free decoding ---------------------------------------------------

namespace {

// Row-level decoder sharing the float kernels with the graph path, so the
// step-by-step output matches the teacher-forced matrix computation.
class DecoderRunner {
 public:
  DecoderRunner(ParamStore& store, const Seq2SeqConfig& cfg, const Tensor& enc_out)
      : store_(store), cfg_(cfg), enc_out_(enc_out), d_(cfg.model_dim), dh_(cfg.model_dim / cfg.heads) {
    const Index n = enc_out_.dim(0);
    cross_k_.resize(static_cast<size_t>(cfg_.dec_layers));
    cross_v_.resize(static_cast<size_t>(cfg_.dec_layers));
    for (int l = 0; l < cfg_.dec_layers; ++l) {
      const std::string p = "dec" + std::to_string(l) + ".cross";
      cross_k_[static_cast<size_t>(l)] = linear_all(enc_out_, p + ".wk");
      cross_v_[static_cast<size_t>(l)] = linear_all(enc_out_, p + ".wv");
    }
    self_k_.assign(static_cast<size_t>(cfg_.dec_layers), {});
    self_v_.assign(static_cast<size_t>(cfg_.dec_layers), {});
    (void)n;
  }

  void enable_attention_window(int back, int forward) {
    window_back_ = back;
    window_forward_ = forward;
    align_pos_ = 0;
  }

  // One decoder step at position t; y_prev is the previous (normalized)
  // output frame, zeros at t = 0.
  void step(const std::vector<float>& y_prev, Index t, std::vector<float>* frame_out,
            float* stop_out) {
    std::vector<float> x(static_cast<size_t>(d_));
    if (cfg_.prenet_dim > 0) {
      std::vector<float> pre(static_cast<size_t>(cfg_.prenet_dim));
      linear_row_dim(y_prev.data(), "dec.in1", cfg_.acoustic_dim, cfg_.prenet_dim, pre.data());
      for (float& v : pre) v = v > 0.0f ? v : 0.0f;
      linear_row_dim(pre.data(), "dec.in2", cfg_.prenet_dim, d_, x.data());
    } else {
      linear_row(y_prev.data(), "dec.in", x.data());
    }
    if (pe_.empty() || static_cast<Index>(pe_.size()) <= t * d_) grow_pe(t + 1);
    for (Index j = 0; j < d_; ++j) x[static_cast<size_t>(j)] += pe_[static_cast<size_t>(t * d_ + j)];

    std::vector<float> h(static_cast<size_t>(d_)), tmp(static_cast<size_t>(d_));
    for (int l = 0; l < cfg_.dec_layers; ++l) {
      const std::string p = "dec" + std::to_string(l);
      // self attention over the cached prefix
      ln_row(x.data(), p + ".ln1", h.data());
      std::vector<float> q(static_cast<size_t>(d_)), k(static_cast<size_t>(d_)), v(static_cast<size_t>(d_));
      linear_row(h.data(), p + ".self.wq", q.data());
      linear_row(h.data(), p + ".self.wk", k.data());
      linear_row(h.data(), p + ".self.wv", v.data());
      std::vector<float>& ck = self_k_[static_cast<size_t>(l)];
      std::vector<float>& cv = self_v_[static_cast<size_t>(l)];
      ck.insert(ck.end(), k.begin(), k.end());
      cv.insert(cv.end(), v.begin(), v.end());
      const Index rows = t + 1;
      attend(q.data(), ck.data(), cv.data(), rows, tmp.data());
      add_linear_into(tmp.data(), p + ".self.wo", x.data());

      // cross attention over the encoder states, optionally windowed around
      // the running alignment position
      ln_row(x.data(), p + ".ln2", h.data());
      linear_row(h.data(), p + ".cross.wq", q.data());
      const Index n_enc = enc_out_.dim(0);
      Index lo = 0, hi = n_enc;
      if (window_back_ >= 0) {
        lo = std::max<Index>(0, align_pos_ - window_back_);
        hi = std::min<Index>(n_enc, align_pos_ + window_forward_ + 1);
      }
      const bool last_layer = l == cfg_.dec_layers - 1;
      attend_range(q.data(), cross_k_[static_cast<size_t>(l)].data(),
                   cross_v_[static_cast<size_t>(l)].data(), lo, hi, tmp.data(),
                   last_layer ? &step_align_ : nullptr);
      add_linear_into(tmp.data(), p + ".cross.wo", x.data());

      // feed forward
      ln_row(x.data(), p + ".ln3", h.data());
      std::vector<float> f1(static_cast<size_t>(cfg_.ffn_dim));
      linear_row_dim(h.data(), p + ".ff1", d_, cfg_.ffn_dim, f1.data());
      for (float& fv : f1) fv = fv > 0.0f ? fv : 0.0f;
      linear_row_dim(f1.data(), p + ".ff2", cfg_.ffn_dim, d_, tmp.data());
      for (Index j = 0; j < d_; ++j) x[static_cast<size_t>(j)] += tmp[static_cast<size_t>(j)];
    }
    if (window_back_ >= 0) align_pos_ = step_align_;  // window follows the peak
    ln_row(x.data(), "dec.ln", h.data());
    frame_out->assign(static_cast<size_t>(cfg_.acoustic_dim), 0.0f);
    linear_row_dim(h.data(), "out.frame", d_, cfg_.acoustic_dim, frame_out->data());
    float stop = 0.0f;
    linear_row_dim(h.data(), "out.stop", d_, 1, &stop);
    *stop_out = stop;
  }

 private:
  void grow_pe(Index len) {
    const Tensor pe = positional_encoding(len, d_);
    pe_ = pe.vec();
  }

  std::vector<float> linear_all(const Tensor& x, const std::string& name) {
    const Tensor& w = store_.value(name + ".w");
    const Tensor& b = store_.value(name + ".b");
    std::vector<float> out(static_cast<size_t>(x.dim(0) * w.dim(1)));
    kern::matmul(x.data(), w.data(), out.data(), x.dim(0), x.dim(1), w.dim(1));
    for (Index r = 0; r < x.dim(0); ++r)
      for (Index j = 0; j < w.dim(1); ++j) out[static_cast<size_t>(r * w.dim(1) + j)] += b.at(j);
    return out;
  }

  void linear_row_dim(const float* x, const std::string& name, Index in, Index out_dim, float* out) {
    const Tensor& w = store_.value(name + ".w");
    const Tensor& b = store_.value(name + ".b");
    VQVC_CHECK(w.dim(0) == in && w.dim(1) == out_dim, "unexpected weight shape for " << name);
    kern::matmul(x, w.data(), out, 1, in, out_dim);
    for (Index j = 0; j < out_dim; ++j) out[static_cast<size_t>(j)] += b.at(j);
  }

  void linear_row(const float* x, const std::string& name, float* out) {
    const Tensor& w = store_.value(name + ".w");
    linear_row_dim(x, name, w.dim(0), w.dim(1), out);
  }

  void ln_row(const float* x, const std::string& name, float* out) {
    const Tensor& gamma = store_.value(name + ".g");
    const Tensor& beta = store_.value(name + ".b");
    kern::layer_norm_row(x, gamma.data(), beta.data(), out, d_, 1e-5f, nullptr, nullptr);
  }

  // Multi-head attention of a single query row against `rows` cached
  // key/value rows.
  void attend(const float* q, const float* keys, const float* values, Index rows, float* out) {
    attend_range(q, keys, values, 0, rows, out, nullptr);
  }

  // Attention restricted to key rows [lo, hi); when align_out is given it
  // receives the head-averaged argmax (absolute row id).
  void attend_range(const float* q, const float* keys, const float* values, Index lo, Index hi,
                    float* out, Index* align_out) {
    const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(dh_));
    const Index rows = hi - lo;
    std::vector<float> scores(static_cast<size_t>(rows)), probs(static_cast<size_t>(rows));
    std::vector<double> mean_probs(static_cast<size_t>(rows), 0.0);
    for (int hh = 0; hh < cfg_.heads; ++hh) {
      const Index off = static_cast<Index>(hh) * dh_;
      for (Index j = 0; j < rows; ++j) {
        float s = static_cast<float>(kern::dot(q + off, keys + (lo + j) * d_ + off, dh_));
        scores[static_cast<size_t>(j)] = s * inv_sqrt;
      }
      kern::softmax_row(scores.data(), probs.data(), rows);
      for (Index j = 0; j < rows; ++j) mean_probs[static_cast<size_t>(j)] += probs[static_cast<size_t>(j)];
      for (Index c = 0; c < dh_; ++c) {
        double acc = 0.0;
        for (Index j = 0; j < rows; ++j)
          acc += static_cast<double>(probs[static_cast<size_t>(j)]) *
                 static_cast<double>(values[(lo + j) * d_ + off + c]);
        out[static_cast<size_t>(off + c)] = static_cast<float>(acc);
      }
    }
    if (align_out) {
      Index best = 0;
      for (Index j = 1; j < rows; ++j)
        if (mean_probs[static_cast<size_t>(j)] > mean_probs[static_cast<size_t>(best)]) best = j;
      *align_out = lo + best;
    }
  }

  // x += W_o(attn_out) + b_o
  void add_linear_into(const float* attn_out, const std::string& name, float* x) {
    std::vector<float> o(static_cast<size_t>(d_));
    linear_row(attn_out, name, o.data());
    for (Index j = 0; j < d_; ++j) x[static_cast<size_t>(j)] += o[static_cast<size_t>(j)];
  }

  ParamStore& store_;
  const Seq2SeqConfig& cfg_;
  Tensor enc_out_;
  Index d_;
  Index dh_;
  std::vector<float> pe_;
  std::vector<std::vector<float>> cross_k_, cross_v_;  // per layer [n×D]
  std::vector<std::vector<float>> self_k_, self_v_;    // per layer, grows per step
  int window_back_ = -1;  // < 0: unconstrained
  int window_forward_ = 0;
  Index align_pos_ = 0;
  Index step_align_ = 0;
};

}  // namespace

Seq2SeqModel::InferOut Seq2SeqModel::decode_infer(ParamStore& store, const IndexSeq& seq) const {
  Graph g;
  Var emb = embed_front_end(g, store, seq);
  Var enc = encode_tokens(g, store, emb);
  DecoderRunner runner(store, cfg_, enc.value());
  if (cfg_.att_window_back >= 0) {
    runner.enable_attention_window(cfg_.att_window_back, cfg_.att_window_forward);
  }

  const Index max_len = static_cast<Index>(cfg_.max_len_factor) * seq.frames();
  std::vector<float> y_prev(static_cast<size_t>(cfg_.acoustic_dim), 0.0f);
  std::vector<float> frame;
  std::vector<float> all;
  InferOut out;
  out.truncated = true;
  Index m = 0;
  for (Index t = 0; t < max_len; ++t) {
    float stop_logit = 0.0f;
    runner.step(y_prev, t, &frame, &stop_logit);
    all.insert(all.end(), frame.begin(), frame.end());
    ++m;
    if (kern::sigmoidf(stop_logit) > cfg_.stop_threshold) {
      out.truncated = false;
      break;
    }
    y_prev = frame;
  }
  Tensor norm_frames({m, cfg_.acoustic_dim}, std::move(all));
  out.frames = denormalize(store, norm_frames);
  return out;
}

Tensor Seq2SeqModel::decode_forced(ParamStore& store, const IndexSeq& seq,
                                   const Tensor& forced_inputs_norm) const {
  VQVC_CHECK(forced_inputs_norm.rank() == 2 && forced_inputs_norm.dim(1) == cfg_.acoustic_dim,
             "forced inputs must be [m×acoustic_dim]");
  Graph g;
  Var emb = embed_front_end(g, store, seq);
  Var enc = encode_tokens(g, store, emb);
  DecoderRunner runner(store, cfg_, enc.value());
  const Index m = forced_inputs_norm.dim(0);
  Tensor preds({m, cfg_.acoustic_dim});
  std::vector<float> y_in(static_cast<size_t>(cfg_.acoustic_dim));
  std::vector<float> frame;
  for (Index t = 0; t < m; ++t) {
    for (Index d = 0; d < cfg_.acoustic_dim; ++d) y_in[static_cast<size_t>(d)] = forced_inputs_norm.at(t, d);
    float stop = 0.0f;
    runner.step(y_in, t, &frame, &stop);
    for (Index d = 0; d < cfg_.acoustic_dim; ++d) preds.at(t, d) = frame[static_cast<size_t>(d)];
  }
  return preds;
}

double Seq2SeqModel::teacher_forced_l1(ParamStore& store, const IndexSeq& seq,
                                       const Tensor& target_raw) const {
  Graph g;
  Var emb = embed_front_end(g, store, seq);
  Var enc = encode_tokens(g, store, emb);
  const Tensor target_norm = normalize(store, target_raw);
  TrainOut out = decode_train(g, store, enc, target_norm, nullptr);
  return out.l1.scalar_value();
}

}  // namespace vqvc

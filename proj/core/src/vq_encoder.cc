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

#include "vqvc/vq_encoder.h"

#include <algorithm>
#include <cmath>

#include "vqvc/feat_io.h"

namespace vqvc {

int EncoderConfig::total_stride() const {
  int s = 1;
  for (const ConvLayerSpec& l : layers) s *= l.stride;
  return s;
}

int EncoderConfig::receptive_field() const {
  // Working front to back: rf_{i} = rf_{i-1} + (kernel_i - 1) * prod(strides < i).
  int rf = 1;
  int stride_prod = 1;
  for (const ConvLayerSpec& l : layers) {
    rf += (l.kernel - 1) * stride_prod;
    stride_prod *= l.stride;
  }
  return rf;
}

Index EncoderConfig::output_frames(Index signal_len) const {
  const int rf = receptive_field();
  if (signal_len < rf) {
    throw ContractError("signal length " + std::to_string(signal_len) +
                        " below encoder receptive field " + std::to_string(rf) +
                        ": empty output");
  }
  return (signal_len - rf) / total_stride() + 1;
}

int QuantizerConfig::group_dim() const {
  VQVC_CHECK(groups > 0 && dim % groups == 0,
             "latent dim " << dim << " not divisible by groups " << groups);
  return dim / groups;
}

float ContrastiveConfig::tau_at(int step) const {
  VQVC_CHECK(tau_start > 0.0f && tau_end > 0.0f, "tau must stay positive");
  if (tau_anneal_steps <= 0 || step >= tau_anneal_steps) return tau_end;
  const float frac = static_cast<float>(step) / static_cast<float>(tau_anneal_steps);
  return tau_start + (tau_end - tau_start) * frac;
}

VqEncoderModel::VqEncoderModel(EncoderConfig enc, QuantizerConfig quant, AggregatorConfig agg,
                               ContrastiveConfig contrast)
    : enc_(std::move(enc)), quant_(quant), agg_(agg), contrast_(contrast) {
  VQVC_CHECK(!enc_.layers.empty(), "encoder needs at least one conv layer");
  VQVC_CHECK(enc_.layers.back().channels == quant_.dim,
             "encoder output channels " << enc_.layers.back().channels
                                        << " must equal latent dim " << quant_.dim);
  quant_.group_dim();  // validates divisibility
  VQVC_CHECK(contrast_.steps >= 1, "K must be >= 1");
  VQVC_CHECK(contrast_.n_negatives >= 1, "need at least one negative sample");
}

void VqEncoderModel::init_params(ParamStore& store, Rng& rng) const {
  int c_in = 1;
  for (size_t i = 0; i < enc_.layers.size(); ++i) {
    const ConvLayerSpec& l = enc_.layers[i];
    const std::string base = "enc.conv" + std::to_string(i);
    if (i == 0 && c_in == 1) {
      // windowed-sinusoid filterbank init: channel o starts as a bandpass
      // filter at a spread of frequencies, so the rectified outputs are
      // band energies from the first step (still fully trainable)
      Tensor w({l.channels, 1, l.kernel});
      for (int o = 0; o < l.channels; ++o) {
        const double f = 0.04 + (0.46 - 0.04) * (o + 0.5) / l.channels;
        const double phase = rng.uniform(0.0, 6.283185307179586);
        for (int k = 0; k < l.kernel; ++k) {
          const double hann = 0.5 - 0.5 * std::cos(6.283185307179586 * k / (l.kernel - 1));
          w.at((o * l.kernel) + k) = static_cast<float>(
              std::cos(6.283185307179586 * f * k + phase) * hann * std::sqrt(2.0 / l.kernel));
        }
      }
      store.create(base + ".w", std::move(w));
    } else {
      store.create_uniform(base + ".w", {l.channels, c_in, l.kernel},
                           static_cast<Index>(c_in) * l.kernel, rng);
    }
    store.create_zeros(base + ".b", {l.channels});
    if (i == 0) {
      store.create_ones("enc.norm0.g", {l.channels});
      store.create_zeros("enc.norm0.b", {l.channels});
    }
    c_in = l.channels;
  }
  const int dg = quant_.group_dim();
  store.create_uniform("q.codebook", {quant_.vocab, dg}, dg, rng);
  for (int g = 0; g < quant_.groups; ++g) {
    const std::string base = "q.logit" + std::to_string(g);
    store.create_uniform(base + ".w", {dg, quant_.vocab}, dg, rng);
    store.create_zeros(base + ".b", {quant_.vocab});
  }
  for (int i = 0; i < agg_.layers; ++i) {
    const std::string base = "agg.conv" + std::to_string(i);
    store.create_uniform(base + ".w", {quant_.dim, quant_.dim, agg_.kernel},
                         static_cast<Index>(quant_.dim) * agg_.kernel, rng);
    store.create_zeros(base + ".b", {quant_.dim});
  }
  for (int k = 1; k <= contrast_.steps; ++k) {
    store.create_uniform("ctx.w" + std::to_string(k), {quant_.dim, quant_.dim}, quant_.dim, rng);
    store.create_zeros("ctx.b" + std::to_string(k), {quant_.dim});
  }
}

Var VqEncoderModel::encode(Graph& g, ParamStore& store, std::span<const float> signal) const {
  enc_.output_frames(static_cast<Index>(signal.size()));  // validates length
  Tensor input({static_cast<Index>(signal.size()), 1},
               std::vector<float>(signal.begin(), signal.end()));
  Var x = g.constant(std::move(input));
  for (size_t i = 0; i < enc_.layers.size(); ++i) {
    const std::string base = "enc.conv" + std::to_string(i);
    x = conv1d(x, store.var(g, base + ".w"), store.var(g, base + ".b"), enc_.layers[i].stride);
    if (i == 0) {
      // full-wave rectification (band energy, not phase), then a channel
      // norm that cancels loudness and broadband tilt
      x = abs(x);
      x = layer_norm(x, store.var(g, "enc.norm0.g"), store.var(g, "enc.norm0.b"));
    } else if (i + 1 < enc_.layers.size()) {
      x = relu(x);
    }
  }
  return x;
}

VqEncoderModel::QuantizeResult VqEncoderModel::quantize(Graph& g, ParamStore& store, Var z,
                                                        float tau, QuantizeMode mode,
                                                        Rng* noise_rng,
                                                        QuantizeTrace* trace) const {
  const Index t = z.value().dim(0);
  const int dg = quant_.group_dim();
  VQVC_CHECK(z.value().rank() == 2 && z.value().dim(1) == quant_.dim,
             "quantize expects z [T×" << quant_.dim << "], got " << shape_str(z.value().shape()));
  if (mode != QuantizeMode::kEval) {
    if (tau <= 0.0f) throw ContractError("quantize: tau must be > 0, got " + std::to_string(tau));
    VQVC_CHECK(noise_rng != nullptr, "train-mode quantize needs an rng");
  }

  QuantizeResult result;
  result.indices.resize(static_cast<size_t>(t) * quant_.groups);
  Var codebook = store.var(g, "q.codebook");
  Var zhat;
  if (trace) trace->gumbel_per_group.assign(static_cast<size_t>(quant_.groups), {});

  for (int grp = 0; grp < quant_.groups; ++grp) {
    Var zslice = slice(z, 1, static_cast<Index>(grp) * dg, dg);
    const std::string base = "q.logit" + std::to_string(grp);
    Var logits = add(matmul(zslice, store.var(g, base + ".w")), store.var(g, base + ".b"));

    std::vector<int> group_idx(static_cast<size_t>(t));
    Var group_zhat;
    if (mode == QuantizeMode::kEval) {
      const Tensor& l = logits.value();
      for (Index i = 0; i < t; ++i) {
        int best = 0;
        for (Index j = 1; j < quant_.vocab; ++j) {
          if (l.at(i, j) > l.at(i, best)) best = static_cast<int>(j);  // ties -> lowest index
        }
        group_idx[static_cast<size_t>(i)] = best;
      }
      group_zhat = embedding(codebook, group_idx);
    } else {
      // p_j = exp((l_j + v_j)/tau) / sum_k exp((l_k + v_k)/tau),
      // v = -log(-log u), u ~ U(0,1).
      Tensor noise({t, quant_.vocab});
      for (Index i = 0; i < t; ++i) {
        for (Index j = 0; j < quant_.vocab; ++j) {
          noise.at(i, j) = static_cast<float>(noise_rng->gumbel());
        }
      }
      if (trace) trace->gumbel_per_group[static_cast<size_t>(grp)] = noise.vec();
      Var noisy = scale(add(logits, g.constant(std::move(noise))), 1.0f / tau);
      Var probs = softmax(noisy);
      const Tensor& p = probs.value();
      for (Index i = 0; i < t; ++i) {
        int best = 0;
        for (Index j = 1; j < quant_.vocab; ++j) {
          if (p.at(i, j) > p.at(i, best)) best = static_cast<int>(j);
        }
        group_idx[static_cast<size_t>(i)] = best;
      }
      if (mode == QuantizeMode::kTrainHard) {
        group_zhat = st_select(probs, codebook, group_idx);
      } else {
        group_zhat = matmul(probs, codebook);
      }
      result.soft_probs.push_back(probs);
    }
    for (Index i = 0; i < t; ++i) {
      result.indices[static_cast<size_t>(i) * quant_.groups + grp] = group_idx[static_cast<size_t>(i)];
    }
    zhat = grp == 0 ? group_zhat : concat(zhat, group_zhat, 1);
  }
  result.zhat = zhat;
  return result;
}

Var VqEncoderModel::aggregate(Graph& g, ParamStore& store, Var zhat) const {
  VQVC_CHECK(zhat.value().dim(0) >= 1, "aggregate needs a nonempty sequence");
  Var x = zhat;
  for (int i = 0; i < agg_.layers; ++i) {
    const std::string base = "agg.conv" + std::to_string(i);
    // left-only padding keeps the stack causal
    Var padded = concat(g.constant(Tensor({agg_.kernel - 1, quant_.dim})), x, 0);
    x = relu(conv1d(padded, store.var(g, base + ".w"), store.var(g, base + ".b"), 1));
  }
  return x;
}

Index VqEncoderModel::contrastive_terms(Index t) const {
  Index n = 0;
  for (int k = 1; k <= contrast_.steps; ++k) n += std::max<Index>(0, t - k);
  return n;
}

Var VqEncoderModel::contrastive_loss(Graph& g, ParamStore& store, Var c, Var z, Rng& neg_rng,
                                     ContrastiveTrace* trace) const {
  const Index t = z.value().dim(0);
  VQVC_CHECK(c.value().dim(0) == t, "c and z lengths differ");
  if (t <= contrast_.steps) {
    throw ContractError("contrastive_loss: sequence length " + std::to_string(t) +
                        " must exceed K = " + std::to_string(contrast_.steps));
  }
  if (trace) trace->negatives_per_k.assign(static_cast<size_t>(contrast_.steps), {});

  Var ones_col = g.constant(Tensor::full({quant_.dim, 1}, 1.0f));
  Var total;
  for (int k = 1; k <= contrast_.steps; ++k) {
    const Index n = t - k;
    Var c_sub = slice(c, 0, 0, n);
    Var proj = add(matmul(c_sub, store.var(g, "ctx.w" + std::to_string(k))),
                   store.var(g, "ctx.b" + std::to_string(k)));
    Var z_pos = slice(z, 0, k, n);
    Var pos_scores = matmul(mul(z_pos, proj), ones_col);  // row dots, [n×1]
    Var pos_term = sum(log_sigmoid(pos_scores));

    // negatives: uniform over the utterance excluding the positive position
    std::vector<int> neg_ids(static_cast<size_t>(n) * contrast_.n_negatives);
    std::vector<int> proj_rep(static_cast<size_t>(n) * contrast_.n_negatives);
    for (Index i = 0; i < n; ++i) {
      for (int s = 0; s < contrast_.n_negatives; ++s) {
        std::int64_t draw = neg_rng.uniform_int(t);
        while (draw == i + k) draw = neg_rng.uniform_int(t);
        neg_ids[static_cast<size_t>(i) * contrast_.n_negatives + s] = static_cast<int>(draw);
        proj_rep[static_cast<size_t>(i) * contrast_.n_negatives + s] = static_cast<int>(i);
      }
    }
    if (trace) trace->negatives_per_k[static_cast<size_t>(k - 1)] = neg_ids;
    Var z_neg = embedding(z, neg_ids);
    Var proj_gather = embedding(proj, proj_rep);
    Var neg_scores = matmul(mul(z_neg, proj_gather), ones_col);
    Var neg_term = sum(log_sigmoid(scale(neg_scores, -1.0f)));

    Var loss_k = scale(
        add(pos_term, scale(neg_term, contrast_.lambda_weight / static_cast<float>(contrast_.n_negatives))),
        -1.0f);
    total = k == 1 ? loss_k : add(total, loss_k);
  }
  return total;
}

std::vector<float> normalize_signal_rms(std::span<const float> signal) {
  double acc = 0.0;
  for (float v : signal) acc += static_cast<double>(v) * v;
  const double rms = std::sqrt(acc / std::max<size_t>(1, signal.size()));
  const float inv = static_cast<float>(1.0 / std::max(rms, 1e-6));
  std::vector<float> out(signal.begin(), signal.end());
  for (float& v : out) v *= inv;
  return out;
}

IndexSeq VqEncoderModel::extract_indices(ParamStore& store, std::span<const float> signal) const {
  Graph g;
  const std::vector<float> normed = normalize_signal_rms(signal);
  Var z = encode(g, store, normed);
  QuantizeResult q = quantize(g, store, z, 1.0f, QuantizeMode::kEval, nullptr);
  IndexSeq seq;
  seq.groups = quant_.groups;
  seq.vocab = quant_.vocab;
  seq.combined = false;
  seq.tuples = std::move(q.indices);
  return seq;
}

// ---- training --------------------------------------------------------------

VqTrainResult pretrain_quantizer(const Manifest& manifest, const VqEncoderModel& model,
                                 const VqTrainConfig& cfg, ParamStore& store) {
  const std::vector<const ManifestEntry*> corpus = manifest.split("quantizer");
  VQVC_CHECK(!corpus.empty(), "manifest has no quantizer split");

  std::vector<std::vector<float>> signals;
  signals.reserve(corpus.size());
  for (const ManifestEntry* e : corpus) {
    signals.push_back(normalize_signal_rms(read_signal(manifest.dir / e->signal_path)));
  }

  Rng init_rng = Rng(cfg.seed).fork(0xA1);
  Rng batch_rng = Rng(cfg.seed).fork(0xA2);
  Rng noise_rng = Rng(cfg.seed).fork(0xA3);
  Rng neg_rng = Rng(cfg.seed).fork(0xA4);
  model.init_params(store, init_rng);

  const EncoderConfig& enc = model.encoder_config();
  const int stride = enc.total_stride();
  const int rf = enc.receptive_field();
  const int k_steps = model.contrastive_config().steps;

  VqTrainResult result;
  result.step_loss.reserve(static_cast<size_t>(cfg.steps));
  double interval_loss = 0.0;
  int interval_count = 0;

  for (int step = 0; step < cfg.steps; ++step) {
    const float tau = model.contrastive_config().tau_at(step);
    Graph g;
    Var batch_loss;
    for (int b = 0; b < cfg.batch; ++b) {
      const auto u = static_cast<size_t>(batch_rng.uniform_int(static_cast<std::int64_t>(signals.size())));
      const std::vector<float>& sig = signals[u];
      const Index frames = enc.output_frames(static_cast<Index>(sig.size()));
      Index crop_start = 0;
      Index crop_frames = frames;
      if (frames > cfg.crop_frames) {
        crop_frames = cfg.crop_frames;
        crop_start = batch_rng.uniform_int(frames - crop_frames + 1);
      }
      VQVC_CHECK(crop_frames > k_steps, "crop too short for K=" << k_steps);
      const Index s0 = crop_start * stride;
      const Index s1 = s0 + (crop_frames - 1) * stride + rf;
      std::span<const float> crop(sig.data() + s0, static_cast<size_t>(s1 - s0));

      Var z = model.encode(g, store, crop);
      auto q = model.quantize(g, store, z, tau, QuantizeMode::kTrainHard, &noise_rng);
      Var c = model.aggregate(g, store, q.zhat);
      Var loss = model.contrastive_loss(g, store, c, z, neg_rng);
      loss = scale(loss, 1.0f / static_cast<float>(model.contrastive_terms(crop_frames)));
      batch_loss = b == 0 ? loss : add(batch_loss, loss);
    }
    batch_loss = scale(batch_loss, 1.0f / static_cast<float>(cfg.batch));
    const double loss_value = batch_loss.scalar_value();
    if (!std::isfinite(loss_value)) {
      throw NumericError("quantizer training diverged at step " + std::to_string(step) +
                         ": loss is not finite");
    }
    g.backward(batch_loss);
    store.adam_step(cfg.adam);

    result.step_loss.push_back(loss_value);
    interval_loss += loss_value;
    ++interval_count;

    if ((step + 1) % cfg.eval_interval == 0 || step + 1 == cfg.steps) {
      // codeword usage on a fixed probe subset, eval-mode extraction
      std::vector<IndexSeq> probe;
      const size_t probe_n = std::min<size_t>(8, signals.size());
      for (size_t i = 0; i < probe_n; ++i) {
        probe.push_back(model.extract_indices(store, signals[i]));
      }
      const VocabStats stats = vocab_stats(probe);
      VqEvalRow row;
      row.step = step + 1;
      row.mean_loss = interval_loss / interval_count;
      row.group_perplexity = stats.group_perplexity;
      row.unique_combinations = stats.unique_combinations;
      result.evals.push_back(std::move(row));
      interval_loss = 0.0;
      interval_count = 0;
    }
  }
  return result;
}

}  // namespace vqvc

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

#include <cmath>

#include "doctest.h"
#include "testutil.h"
#include "vqvc/seq2seq.h"

using namespace vqvc;

namespace {

Seq2SeqConfig small_cfg() {
  Seq2SeqConfig cfg;
  cfg.groups = 2;
  cfg.vocab = 8;
  cfg.embed_dim = 8;
  cfg.model_dim = 32;
  cfg.heads = 2;
  cfg.enc_layers = 2;
  cfg.dec_layers = 2;
  cfg.ffn_dim = 64;
  cfg.acoustic_dim = 16;
  cfg.teacher_noise_std = 0.0f;
  return cfg;
}

IndexSeq random_seq(int frames, int groups, int vocab, std::uint64_t seed) {
  IndexSeq s;
  s.groups = groups;
  s.vocab = vocab;
  Rng rng(seed);
  for (int t = 0; t < frames * groups; ++t) s.tuples.push_back(static_cast<int>(rng.uniform_int(vocab)));
  return s;
}

void identity_norm(const Seq2SeqModel& model, ParamStore& store) {
  const Index a = model.config().acoustic_dim;
  model.set_feature_norm(store, Tensor({a}), Tensor::full({a}, 1.0f));
}

}  // namespace

TEST_CASE("front end: concatenated dim and manual-lookup equivalence") {
  Seq2SeqConfig cfg = small_cfg();
  cfg.project_after_concat = false;
  cfg.embed_dim = 16;  // G*emb must equal model_dim without a projection
  Seq2SeqModel model(cfg);
  ParamStore store;
  Rng rng(41);
  model.init_params(store, rng);

  IndexSeq seq;
  seq.groups = 2;
  seq.vocab = 8;
  seq.tuples = {3, 5, 3, 7};
  Graph g;
  Var emb = model.embed_front_end(g, store, seq);
  CHECK(emb.shape() == Shape{2, 32});

  const Tensor pe = positional_encoding(2, 32);
  const Tensor& table = store.value("fe.table");
  // manual lookup: group slices concatenated, then positional encoding
  for (Index t = 0; t < 2; ++t) {
    for (Index c = 0; c < 16; ++c) {
      const int id0 = seq.tuples[static_cast<size_t>(t * 2)];
      const int id1 = 8 + seq.tuples[static_cast<size_t>(t * 2 + 1)];
      CHECK(emb.value().at(t, c) == doctest::Approx(table.at(id0, c) + pe.at(t, c)));
      CHECK(emb.value().at(t, 16 + c) == doctest::Approx(table.at(id1, c) + pe.at(t, 16 + c)));
    }
  }
  // both tuples share the group-0 index: identical first-emb coordinates
  for (Index c = 0; c < 16; ++c) {
    CHECK(emb.value().at(0, c) - pe.at(0, c) ==
          doctest::Approx(emb.value().at(1, c) - pe.at(1, c)).epsilon(1e-6));
  }
}

TEST_CASE("front end: separate vs joint table row counts") {
  Seq2SeqConfig sep = small_cfg();
  Seq2SeqModel sep_model(sep);
  ParamStore sep_store;
  Rng rng(42);
  sep_model.init_params(sep_store, rng);
  CHECK(sep_store.value("fe.table").dim(0) == 16);  // V*G

  Seq2SeqConfig joint = small_cfg();
  joint.separate_tables = false;
  Seq2SeqModel joint_model(joint);
  ParamStore joint_store;
  Rng rng2(43);
  joint_model.init_params(joint_store, rng2);
  CHECK(joint_store.value("fe.joint").dim(0) == 64);  // V^G

  // factorized-vs-joint parameter gap is exactly V^G*emb_cat - V*G*emb
  const Index gap = joint_store.value("fe.joint").size() - sep_store.value("fe.table").size();
  CHECK(gap == 64 * 16 - 16 * 8);
}

TEST_CASE("front end rejects vocabulary mismatches") {
  Seq2SeqModel model(small_cfg());
  ParamStore store;
  Rng rng(44);
  model.init_params(store, rng);
  Graph g;
  IndexSeq wrong = random_seq(4, 2, 44, 4);  // V=44 != 8
  CHECK_THROWS_AS(model.embed_front_end(g, store, wrong), ContractError);
}

TEST_CASE("encode_tokens: length preserved, position-sensitive, rows sum to one") {
  Seq2SeqModel model(small_cfg());
  ParamStore store;
  Rng rng(45);
  model.init_params(store, rng);

  const IndexSeq seq = random_seq(6, 2, 8, 46);
  Graph g;
  std::vector<Tensor> attn;
  Var enc = model.encode_tokens(g, store, model.embed_front_end(g, store, seq), &attn);
  CHECK(enc.shape() == Shape{6, 32});
  CHECK_FALSE(attn.empty());
  for (const Tensor& a : attn) {
    for (Index r = 0; r < a.dim(0); ++r) {
      double row = 0.0;
      for (Index c = 0; c < a.dim(1); ++c) row += a.at(r, c);
      CHECK(row == doctest::Approx(1.0).epsilon(1e-5));
    }
  }

  // length-1 input
  Graph g1;
  Var single = model.encode_tokens(g1, store, model.embed_front_end(g1, store, random_seq(1, 2, 8, 47)));
  CHECK(single.shape() == Shape{1, 32});

  // permuting positions changes the output (positional encoding active);
  // frames 0 and 1 are forced distinct so the swap is not a no-op
  IndexSeq swapped = seq;
  swapped.tuples[0] = 1;
  swapped.tuples[1] = 2;
  swapped.tuples[2] = 3;
  swapped.tuples[3] = 4;
  Graph g3;
  Var enc_base = model.encode_tokens(g3, store, model.embed_front_end(g3, store, swapped));
  std::swap(swapped.tuples[0], swapped.tuples[2]);
  std::swap(swapped.tuples[1], swapped.tuples[3]);
  Graph g2;
  Var enc2 = model.encode_tokens(g2, store, model.embed_front_end(g2, store, swapped));
  bool tail_changed = false;
  for (Index d = 0; d < 32; ++d) {
    if (enc2.value().at(5, d) != enc_base.value().at(5, d)) tail_changed = true;
  }
  CHECK(tail_changed);
}

TEST_CASE("loss is zero for perfect predictions and perfect stop logits") {
  Rng rng(48);
  const Tensor target = test::random_tensor({7, 16}, rng);
  Tensor stop({7, 1});
  for (Index t = 0; t < 7; ++t) stop.at(t, 0) = (t == 6) ? 60.0f : -60.0f;
  CHECK(Seq2SeqModel::reference_loss(target, stop, target, 5.0f) == doctest::Approx(0.0).epsilon(1e-9));
  // and the lower bound holds for arbitrary predictions
  const Tensor junk = test::random_tensor({7, 16}, rng);
  CHECK(Seq2SeqModel::reference_loss(junk, stop, target, 5.0f) >= 0.0);
}

TEST_CASE("graph training loss equals the direct recomputation") {
  Seq2SeqModel model(small_cfg());
  ParamStore store;
  Rng rng(49);
  model.init_params(store, rng);
  identity_norm(model, store);

  const IndexSeq seq = random_seq(5, 2, 8, 50);
  const Tensor target = test::random_tensor({9, 16}, rng);
  Graph g;
  Var enc = model.encode_tokens(g, store, model.embed_front_end(g, store, seq));
  const auto out = model.decode_train(g, store, enc, target, nullptr);
  const double oracle = Seq2SeqModel::reference_loss(out.pred.value(), out.stop_logits.value(),
                                                     target, model.config().stop_pos_weight);
  CHECK(out.loss.scalar_value() == doctest::Approx(oracle).epsilon(1e-5));
}

TEST_CASE("decoder causality: perturbing target frame t leaves frames <= t unchanged") {
  Seq2SeqModel model(small_cfg());
  ParamStore store;
  Rng rng(51);
  model.init_params(store, rng);
  identity_norm(model, store);

  const IndexSeq seq = random_seq(4, 2, 8, 52);
  const Tensor target = test::random_tensor({8, 16}, rng);
  Tensor perturbed = target.clone_values();
  const Index tp = 5;
  for (Index d = 0; d < 16; ++d) perturbed.at(tp, d) += 1.0f;

  Graph g1, g2;
  const auto base = model.decode_train(g1, store, model.encode_tokens(g1, store, model.embed_front_end(g1, store, seq)), target, nullptr);
  const auto moved = model.decode_train(g2, store, model.encode_tokens(g2, store, model.embed_front_end(g2, store, seq)), perturbed, nullptr);
  for (Index t = 0; t <= tp; ++t)
    for (Index d = 0; d < 16; ++d) CHECK(base.pred.value().at(t, d) == moved.pred.value().at(t, d));
  bool later_differs = false;
  for (Index t = tp + 1; t < 8; ++t)
    for (Index d = 0; d < 16; ++d)
      if (base.pred.value().at(t, d) != moved.pred.value().at(t, d)) later_differs = true;
  CHECK(later_differs);
}

TEST_CASE("step-by-step cached decoding matches the teacher-forced graph path") {
  Seq2SeqModel model(small_cfg());
  ParamStore store;
  Rng rng(53);
  model.init_params(store, rng);
  identity_norm(model, store);

  const IndexSeq seq = random_seq(5, 2, 8, 54);
  const Tensor target = test::random_tensor({7, 16}, rng);

  Graph g;
  const auto out = model.decode_train(g, store, model.encode_tokens(g, store, model.embed_front_end(g, store, seq)), target, nullptr);

  // forced inputs = target shifted right with a zero start frame
  Tensor forced({7, 16});
  for (Index t = 1; t < 7; ++t)
    for (Index d = 0; d < 16; ++d) forced.at(t, d) = target.at(t - 1, d);
  const Tensor stepped = model.decode_forced(store, seq, forced);
  for (Index i = 0; i < stepped.size(); ++i) {
    CHECK(stepped.at(i) == doctest::Approx(out.pred.value().at(i)).epsilon(1e-6));
  }
}

TEST_CASE("decode_infer: stop threshold 1.0 always runs to max_len, deterministically") {
  Seq2SeqConfig cfg = small_cfg();
  cfg.stop_threshold = 1.0f;
  cfg.max_len_factor = 3;
  Seq2SeqModel model(cfg);
  ParamStore store;
  Rng rng(55);
  model.init_params(store, rng);
  identity_norm(model, store);

  const IndexSeq seq = random_seq(4, 2, 8, 56);
  const auto out1 = model.decode_infer(store, seq);
  CHECK(out1.frames.dim(0) == 12);  // 3 * 4 tokens
  CHECK(out1.truncated);
  const auto out2 = model.decode_infer(store, seq);
  CHECK(out1.frames.vec() == out2.frames.vec());
}

TEST_CASE("normalization round-trips and rescales the loss space") {
  Seq2SeqModel model(small_cfg());
  ParamStore store;
  Rng rng(57);
  model.init_params(store, rng);
  std::vector<Tensor> feats = {test::random_tensor({20, 16}, rng, -3.0, 5.0)};
  Tensor mean, stddev;
  feature_norm_stats(feats, &mean, &stddev);
  model.set_feature_norm(store, mean, stddev);
  const Tensor normed = model.normalize(store, feats[0]);
  const Tensor back = model.denormalize(store, normed);
  for (Index i = 0; i < back.size(); ++i) CHECK(back.at(i) == doctest::Approx(feats[0].at(i)).epsilon(1e-4));
}

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
#include "vqvc/vq_encoder.h"

using namespace vqvc;

namespace {

VqEncoderModel desk_model() {
  return VqEncoderModel(EncoderConfig{}, QuantizerConfig{}, AggregatorConfig{}, ContrastiveConfig{});
}

std::vector<float> random_signal(Index len, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> sig(static_cast<size_t>(len));
  for (float& v : sig) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return sig;
}

}  // namespace

TEST_CASE("desk encoder geometry: receptive field 30, stride 10") {
  const EncoderConfig enc;
  CHECK(enc.receptive_field() == 30);
  CHECK(enc.total_stride() == 10);
  CHECK(enc.output_frames(100) == 8);  // floor((100-30)/10)+1
  CHECK(enc.output_frames(100) == test::conv_len_oracle(100, 30, 10));
  CHECK(enc.output_frames(30) == 1);
  CHECK_THROWS_AS(enc.output_frames(29), ContractError);
}

TEST_CASE("encode: constant-zero signal gives all-equal latent frames") {
  const VqEncoderModel model = desk_model();
  ParamStore store;
  Rng rng(1);
  model.init_params(store, rng);
  Graph g;
  const std::vector<float> zeros(100, 0.0f);
  Var z = model.encode(g, store, zeros);
  CHECK(z.shape() == Shape{8, 16});
  for (Index t = 1; t < 8; ++t)
    for (Index d = 0; d < 16; ++d) CHECK(z.value().at(t, d) == z.value().at(0, d));
}

TEST_CASE("quantize eval: unique max selects its codeword exactly") {
  const VqEncoderModel model = desk_model();
  ParamStore store;
  Rng rng(2);
  model.init_params(store, rng);
  Graph g;
  Var z = model.encode(g, store, random_signal(100, 3));
  auto q = model.quantize(g, store, z, 1.0f, QuantizeMode::kEval, nullptr);
  CHECK(q.soft_probs.empty());
  CHECK(static_cast<Index>(q.indices.size()) == 8 * 2);
  // zhat group slices equal the selected codebook rows
  const Tensor& codebook = store.value("q.codebook");
  for (Index t = 0; t < 8; ++t) {
    for (int grp = 0; grp < 2; ++grp) {
      const int id = q.indices[static_cast<size_t>(t * 2 + grp)];
      for (Index c = 0; c < 8; ++c) {
        CHECK(q.zhat.value().at(t, grp * 8 + c) == codebook.at(id, c));
      }
    }
  }
}

TEST_CASE("quantize: soft probs sum to one and match the emitted argmax") {
  const VqEncoderModel model = desk_model();
  ParamStore store;
  Rng rng(4);
  model.init_params(store, rng);
  Graph g;
  Var z = model.encode(g, store, random_signal(200, 5));
  Rng noise(6);
  auto q = model.quantize(g, store, z, 0.8f, QuantizeMode::kTrainHard, &noise);
  REQUIRE(q.soft_probs.size() == 2);
  const Index t_frames = z.value().dim(0);
  for (int grp = 0; grp < 2; ++grp) {
    const Tensor& p = q.soft_probs[static_cast<size_t>(grp)].value();
    for (Index t = 0; t < t_frames; ++t) {
      double total = 0.0;
      int argmax = 0;
      for (Index j = 0; j < 8; ++j) {
        total += p.at(t, j);
        if (p.at(t, j) > p.at(t, argmax)) argmax = static_cast<int>(j);
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-5));
      CHECK(argmax == q.indices[static_cast<size_t>(t * 2 + grp)]);
    }
  }
}

TEST_CASE("quantize: huge temperature flattens the probabilities") {
  const VqEncoderModel model = desk_model();
  ParamStore store;
  Rng rng(7);
  model.init_params(store, rng);
  Graph g;
  Var z = model.encode(g, store, random_signal(60, 8));
  Rng noise(9);
  auto q = model.quantize(g, store, z, 1e6f, QuantizeMode::kTrainHard, &noise);
  for (const Var& probs : q.soft_probs) {
    for (Index i = 0; i < probs.value().size(); ++i) {
      CHECK(probs.value().at(i) == doctest::Approx(1.0 / 8).epsilon(8e-3));
    }
  }
}

TEST_CASE("quantize: recorded Gumbel draws reproduce the probabilities and argmax") {
  // V=4, G=2 instance with a brute-force recomputation from the trace
  EncoderConfig enc;
  enc.layers = {{8, 4, 2}, {8, 3, 1}};
  QuantizerConfig quant{.dim = 8, .groups = 2, .vocab = 4};
  VqEncoderModel model(enc, quant, AggregatorConfig{.layers = 1}, ContrastiveConfig{});
  ParamStore store;
  Rng rng(10);
  model.init_params(store, rng);

  Graph g;
  Var z = model.encode(g, store, random_signal(64, 11));
  const Index t_frames = z.value().dim(0);
  Rng noise(12);
  QuantizeTrace trace;
  const float tau = 0.7f;
  auto q = model.quantize(g, store, z, tau, QuantizeMode::kTrainHard, &noise, &trace);
  REQUIRE(trace.gumbel_per_group.size() == 2);

  for (int grp = 0; grp < 2; ++grp) {
    const Tensor& w = store.value("q.logit" + std::to_string(grp) + ".w");
    const Tensor& b = store.value("q.logit" + std::to_string(grp) + ".b");
    for (Index t = 0; t < t_frames; ++t) {
      std::vector<float> z_slice(4);
      for (Index c = 0; c < 4; ++c) z_slice[static_cast<size_t>(c)] = z.value().at(t, grp * 4 + c);
      const std::span<const float> noise_row(
          trace.gumbel_per_group[static_cast<size_t>(grp)].data() + t * 4, 4);
      const std::vector<double> p = test::gumbel_probs_oracle(z_slice, w, b, noise_row, tau);
      const Tensor& impl = q.soft_probs[static_cast<size_t>(grp)].value();
      int oracle_argmax = 0;
      for (int j = 0; j < 4; ++j) {
        CHECK(std::fabs(impl.at(t, j) - p[static_cast<size_t>(j)]) < 1e-6);
        if (p[static_cast<size_t>(j)] > p[static_cast<size_t>(oracle_argmax)]) oracle_argmax = j;
      }
      CHECK(oracle_argmax == q.indices[static_cast<size_t>(t * 2 + grp)]);
    }
  }
}

TEST_CASE("st_select backward equals the soft-mixture (matmul) backward") {
  Rng rng(13);
  const Tensor probs_t = test::random_tensor({5, 4}, rng, 0.01, 1.0);
  const Tensor codebook_t = test::random_tensor({4, 3}, rng);
  std::vector<int> ids = {2, 0, 3, 3, 1};
  const Tensor weights = test::random_tensor({5, 3}, rng);

  auto grads = [&](bool hard) {
    Graph g;
    Var p = g.leaf(probs_t.clone_values());
    Var e = g.leaf(codebook_t.clone_values());
    Var out = hard ? st_select(p, e, ids) : matmul(p, e);
    g.backward(sum(mul(out, g.constant(weights.clone_values()))));
    return std::make_pair(g.grad_of(p), g.grad_of(e));
  };
  const auto [gp_hard, ge_hard] = grads(true);
  const auto [gp_soft, ge_soft] = grads(false);
  for (Index i = 0; i < gp_hard.size(); ++i)
    CHECK(gp_hard.at(i) == doctest::Approx(gp_soft.at(i)).epsilon(1e-6));
  for (Index i = 0; i < ge_hard.size(); ++i)
    CHECK(ge_hard.at(i) == doctest::Approx(ge_soft.at(i)).epsilon(1e-6));
}

TEST_CASE("codebook is shared: mutating one entry moves every group that chose it") {
  const VqEncoderModel model = desk_model();
  ParamStore store;
  Rng rng(14);
  model.init_params(store, rng);
  const std::vector<float> sig = random_signal(150, 15);

  Graph g1;
  auto q1 = model.quantize(g1, store, model.encode(g1, store, sig), 1.0f, QuantizeMode::kEval, nullptr);
  // find a codeword selected by both groups somewhere
  int target = -1;
  for (int j = 0; j < 8 && target < 0; ++j) {
    bool in0 = false, in1 = false;
    for (Index t = 0; t < 12; ++t) {
      if (q1.indices[static_cast<size_t>(t * 2)] == j) in0 = true;
      if (q1.indices[static_cast<size_t>(t * 2 + 1)] == j) in1 = true;
    }
    if (in0 && in1) target = j;
  }
  if (target >= 0) {
    for (Index c = 0; c < 8; ++c) store.value("q.codebook").at(target, c) += 0.5f;
    Graph g2;
    auto q2 = model.quantize(g2, store, model.encode(g2, store, sig), 1.0f, QuantizeMode::kEval, nullptr);
    bool moved_g0 = false, moved_g1 = false;
    for (Index t = 0; t < q2.zhat.value().dim(0); ++t) {
      if (q1.indices[static_cast<size_t>(t * 2)] == target &&
          q2.zhat.value().at(t, 0) != q1.zhat.value().at(t, 0)) {
        moved_g0 = true;
      }
      if (q1.indices[static_cast<size_t>(t * 2 + 1)] == target &&
          q2.zhat.value().at(t, 8) != q1.zhat.value().at(t, 8)) {
        moved_g1 = true;
      }
    }
    CHECK(moved_g0);
    CHECK(moved_g1);
  }
}

TEST_CASE("aggregate: causal with the prefix property") {
  const VqEncoderModel model = desk_model();
  ParamStore store;
  Rng rng(16);
  model.init_params(store, rng);

  Graph g;
  Var z = g.constant(test::random_tensor({10, 16}, rng));
  Var c_full = model.aggregate(g, store, z);
  CHECK(c_full.shape() == Shape{10, 16});

  // single frame in, single frame out
  Var single = model.aggregate(g, store, g.constant(test::random_tensor({1, 16}, rng)));
  CHECK(single.shape() == Shape{1, 16});

  // prefix property: aggregate(first t) equals the first t rows of the full output
  Var c_prefix = model.aggregate(g, store, slice(z, 0, 0, 6));
  for (Index t = 0; t < 6; ++t)
    for (Index d = 0; d < 16; ++d)
      CHECK(c_prefix.value().at(t, d) == doctest::Approx(c_full.value().at(t, d)).epsilon(1e-6));
}

TEST_CASE("aggregate: an impulse cannot affect earlier outputs") {
  const VqEncoderModel model = desk_model();
  ParamStore store;
  Rng rng(17);
  model.init_params(store, rng);
  Tensor base({12, 16});
  Tensor bumped = base.clone_values();
  const Index t_impulse = 7;
  for (Index d = 0; d < 16; ++d) bumped.at(t_impulse, d) = 3.0f;

  Graph g;
  Var c0 = model.aggregate(g, store, g.constant(std::move(base)));
  Var c1 = model.aggregate(g, store, g.constant(std::move(bumped)));
  bool later_changed = false;
  for (Index t = 0; t < 12; ++t) {
    for (Index d = 0; d < 16; ++d) {
      const bool differs = c0.value().at(t, d) != c1.value().at(t, d);
      if (t < t_impulse) CHECK_FALSE(differs);
      if (differs && t >= t_impulse) later_changed = true;
    }
  }
  CHECK(later_changed);
}

TEST_CASE("contrastive loss approaches zero when scores are saturated") {
  // d = T one-hot construction: positive scores +M, negative scores -M
  const Index t_len = 5;
  EncoderConfig enc;
  enc.layers = {{5, 2, 1}};
  QuantizerConfig quant{.dim = 5, .groups = 1, .vocab = 4};
  ContrastiveConfig contrast{.steps = 1, .n_negatives = 3, .lambda_weight = 1.0f};
  VqEncoderModel model(enc, quant, AggregatorConfig{.layers = 1, .kernel = 2}, contrast);
  ParamStore store;
  Rng rng(18);
  model.init_params(store, rng);
  // overwrite W_1 with the identity, b_1 with zero
  Tensor& w = store.value("ctx.w1");
  w.fill(0.0f);
  for (Index i = 0; i < 5; ++i) w.at(i, i) = 1.0f;
  store.value("ctx.b1").fill(0.0f);

  const float big = 50.0f;
  Tensor z({t_len, 5});
  for (Index j = 0; j < t_len; ++j) z.at(j, j) = 1.0f;
  Tensor c({t_len, 5});
  for (Index i = 0; i < t_len; ++i) {
    for (Index d = 0; d < 5; ++d) c.at(i, d) = -big;
    if (i + 1 < t_len) c.at(i, i + 1) = big;
  }
  Graph g;
  Rng negs(19);
  Var loss = model.contrastive_loss(g, store, g.constant(std::move(c)), g.constant(std::move(z)), negs);
  CHECK(loss.scalar_value() >= 0.0f);
  CHECK(loss.scalar_value() < 1e-5f);
}

TEST_CASE("contrastive loss at random init is near the coin-flip expectation") {
  // scores near zero: every log-sigmoid term is about log 2
  const Index t_len = 30;
  EncoderConfig enc;
  enc.layers = {{16, 5, 5}, {16, 2, 2}};
  QuantizerConfig quant{.dim = 16, .groups = 2, .vocab = 8};
  ContrastiveConfig contrast{.steps = 3, .n_negatives = 10, .lambda_weight = 1.0f};
  VqEncoderModel model(enc, quant, AggregatorConfig{}, contrast);
  ParamStore store;
  Rng rng(20);
  model.init_params(store, rng);

  Graph g;
  Rng zr(21), negs(22);
  const Tensor z = test::random_tensor({t_len, 16}, zr, -0.05, 0.05);
  const Tensor c = test::random_tensor({t_len, 16}, zr, -0.05, 0.05);
  Var loss = model.contrastive_loss(g, store, g.constant(c.clone_values()), g.constant(z.clone_values()), negs);

  double expected = 0.0;
  for (int k = 1; k <= 3; ++k) expected += static_cast<double>(t_len - k);
  expected *= (1.0 + 1.0) * std::log(2.0);
  CHECK(loss.scalar_value() == doctest::Approx(expected).epsilon(0.2));
}

TEST_CASE("contrastive loss equals the direct-summation oracle within 1e-6") {
  EncoderConfig enc;
  enc.layers = {{8, 4, 2}, {8, 3, 1}};
  QuantizerConfig quant{.dim = 8, .groups = 2, .vocab = 4};
  ContrastiveConfig contrast{.steps = 2, .n_negatives = 4, .lambda_weight = 1.0f};
  VqEncoderModel model(enc, quant, AggregatorConfig{.layers = 1}, contrast);
  ParamStore store;
  Rng rng(23);
  model.init_params(store, rng);

  Graph g;
  Rng zr(24), negs(25);
  const Tensor z = test::random_tensor({12, 8}, zr);
  const Tensor c = test::random_tensor({12, 8}, zr);
  ContrastiveTrace trace;
  Var loss = model.contrastive_loss(g, store, g.constant(c.clone_values()), g.constant(z.clone_values()),
                                    negs, &trace);

  const double oracle = test::contrastive_oracle(
      z, c, {store.value("ctx.w1"), store.value("ctx.w2")},
      {store.value("ctx.b1"), store.value("ctx.b2")}, trace.negatives_per_k, 4, 1.0f);
  CHECK(std::fabs(loss.scalar_value() - oracle) <= 1e-6 * std::max(1.0, std::fabs(oracle)));
}

TEST_CASE("contrastive loss requires T > K") {
  const VqEncoderModel model = desk_model();
  ParamStore store;
  Rng rng(26);
  model.init_params(store, rng);
  Graph g;
  Rng negs(27);
  Var z = g.constant(Tensor({3, 16}));
  Var c = g.constant(Tensor({3, 16}));
  CHECK_THROWS_AS(model.contrastive_loss(g, store, c, z, negs), ContractError);
}

TEST_CASE("quantize rejects non-positive temperatures") {
  const VqEncoderModel model = desk_model();
  ParamStore store;
  Rng rng(28);
  model.init_params(store, rng);
  Graph g;
  Var z = g.constant(Tensor({4, 16}));
  Rng noise(29);
  CHECK_THROWS_AS(model.quantize(g, store, z, 0.0f, QuantizeMode::kTrainHard, &noise), ContractError);
}

TEST_CASE("extract_indices is deterministic with one tuple per encoder frame") {
  const VqEncoderModel model = desk_model();
  ParamStore store;
  Rng rng(30);
  model.init_params(store, rng);
  const std::vector<float> sig = random_signal(230, 31);
  const IndexSeq a = model.extract_indices(store, sig);
  const IndexSeq b = model.extract_indices(store, sig);
  CHECK(a == b);
  CHECK(a.frames() == EncoderConfig{}.output_frames(230));
  CHECK_FALSE(a.combined);
}

TEST_CASE("tau schedule anneals linearly then holds") {
  ContrastiveConfig c{.tau_start = 2.0f, .tau_end = 0.5f, .tau_anneal_steps = 100};
  CHECK(c.tau_at(0) == doctest::Approx(2.0));
  CHECK(c.tau_at(50) == doctest::Approx(1.25));
  CHECK(c.tau_at(100) == doctest::Approx(0.5));
  CHECK(c.tau_at(5000) == doctest::Approx(0.5));
}

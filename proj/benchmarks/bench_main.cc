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

#include <benchmark/benchmark.h>

#include "vqvc/graph.h"
#include "vqvc/index_codec.h"
#include "vqvc/metrics.h"
#include "vqvc/param_store.h"
#include "vqvc/rng.h"
#include "vqvc/seq2seq.h"
#include "vqvc/synth.h"
#include "vqvc/vq_encoder.h"

namespace {

using namespace vqvc;

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t.at(i) = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

void BM_MatmulForward(benchmark::State& state) {
  const Index n = state.range(0);
  const Tensor a = random_tensor({n, n}, 1);
  const Tensor b = random_tensor({n, n}, 2);
  for (auto _ : state) {
    Graph local;
    Var x = local.constant(a.clone_values());
    Var y = local.constant(b.clone_values());
    benchmark::DoNotOptimize(matmul(x, y).value().data());
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_MatmulForward)->Arg(32)->Arg(64)->Arg(128);

void BM_MatmulTrainStep(benchmark::State& state) {
  const Index n = state.range(0);
  ParamStore store;
  store.create("w", random_tensor({n, n}, 3));
  const Tensor input = random_tensor({n, n}, 4);
  for (auto _ : state) {
    Graph g;
    Var x = g.constant(input.clone_values());
    Var y = matmul(x, store.var(g, "w"));
    g.backward(mean(mul(y, y)));
    store.adam_step({});
  }
}
BENCHMARK(BM_MatmulTrainStep)->Arg(32)->Arg(64);

void BM_EncoderForward(benchmark::State& state) {
  VqEncoderModel model(EncoderConfig{}, QuantizerConfig{}, AggregatorConfig{}, ContrastiveConfig{});
  ParamStore store;
  Rng rng(5);
  model.init_params(store, rng);
  Rng sig_rng(6);
  std::vector<float> signal(1000);
  for (float& v : signal) v = static_cast<float>(sig_rng.uniform(-1.0, 1.0));
  for (auto _ : state) {
    Graph g;
    benchmark::DoNotOptimize(model.encode(g, store, signal).value().data());
  }
}
BENCHMARK(BM_EncoderForward);

void BM_ContrastiveTrainStep(benchmark::State& state) {
  VqEncoderModel model(EncoderConfig{}, QuantizerConfig{}, AggregatorConfig{}, ContrastiveConfig{});
  ParamStore store;
  Rng rng(7);
  model.init_params(store, rng);
  Rng sig_rng(8), noise(9), negs(10);
  std::vector<float> signal(500);
  for (float& v : signal) v = static_cast<float>(sig_rng.uniform(-1.0, 1.0));
  for (auto _ : state) {
    Graph g;
    Var z = model.encode(g, store, signal);
    auto q = model.quantize(g, store, z, 1.0f, QuantizeMode::kTrainHard, &noise);
    Var c = model.aggregate(g, store, q.zhat);
    Var loss = model.contrastive_loss(g, store, c, z, negs);
    g.backward(loss);
    store.zero_grads();
  }
}
BENCHMARK(BM_ContrastiveTrainStep);

void BM_Seq2SeqTrainStep(benchmark::State& state) {
  Seq2SeqConfig cfg;
  cfg.teacher_noise_std = 0.0f;
  cfg.teacher_frame_dropout = 0.0f;
  Seq2SeqModel model(cfg);
  ParamStore store;
  Rng rng(11);
  model.init_params(store, rng);
  model.set_feature_norm(store, Tensor({cfg.acoustic_dim}), Tensor::full({cfg.acoustic_dim}, 1.0f));
  IndexSeq seq;
  seq.groups = cfg.groups;
  seq.vocab = cfg.vocab;
  Rng ir(12);
  for (int t = 0; t < state.range(0) * cfg.groups; ++t) {
    seq.tuples.push_back(static_cast<int>(ir.uniform_int(cfg.vocab)));
  }
  const Tensor target = random_tensor({2 * state.range(0), cfg.acoustic_dim}, 13);
  for (auto _ : state) {
    Graph g;
    Var emb = model.embed_front_end(g, store, seq);
    Var enc = model.encode_tokens(g, store, emb);
    auto out = model.decode_train(g, store, enc, target, nullptr);
    g.backward(out.loss);
    store.zero_grads();
  }
}
BENCHMARK(BM_Seq2SeqTrainStep)->Arg(20)->Arg(60);

void BM_DecodeInfer(benchmark::State& state) {
  Seq2SeqConfig cfg;
  cfg.stop_threshold = 1.0f;  // fixed-length decode keeps iterations comparable
  cfg.max_len_factor = 3;
  Seq2SeqModel model(cfg);
  ParamStore store;
  Rng rng(14);
  model.init_params(store, rng);
  model.set_feature_norm(store, Tensor({cfg.acoustic_dim}), Tensor::full({cfg.acoustic_dim}, 1.0f));
  IndexSeq seq;
  seq.groups = cfg.groups;
  seq.vocab = cfg.vocab;
  Rng ir(15);
  for (int t = 0; t < 40 * cfg.groups; ++t) seq.tuples.push_back(static_cast<int>(ir.uniform_int(cfg.vocab)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.decode_infer(store, seq).frames.data());
  }
}
BENCHMARK(BM_DecodeInfer);

void BM_CombineExpand(benchmark::State& state) {
  Rng rng(16);
  IndexSeq seq;
  seq.groups = 2;
  seq.vocab = 8;
  for (int t = 0; t < 2000; ++t) {
    if (t > 0 && rng.uniform() < 0.6) {
      seq.tuples.push_back(seq.tuples[static_cast<size_t>((t - 1) * 2)]);
      seq.tuples.push_back(seq.tuples[static_cast<size_t>((t - 1) * 2 + 1)]);
    } else {
      seq.tuples.push_back(static_cast<int>(rng.uniform_int(8)));
      seq.tuples.push_back(static_cast<int>(rng.uniform_int(8)));
    }
  }
  for (auto _ : state) {
    IndexSeq c = combine(seq);
    benchmark::DoNotOptimize(expand(c).tuples.data());
  }
  state.SetItemsProcessed(state.iterations() * seq.frames());
}
BENCHMARK(BM_CombineExpand);

void BM_McdDtw(benchmark::State& state) {
  const Tensor a = random_tensor({state.range(0), 16}, 17);
  const Tensor b = random_tensor({state.range(0) + 13, 16}, 18);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mcd(a, b, true));
  }
}
BENCHMARK(BM_McdDtw)->Arg(50)->Arg(150);

void BM_ExtractFeatures(benchmark::State& state) {
  Rng rng(19);
  std::vector<float> signal(1500);
  for (float& v : signal) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_features(signal).data());
  }
}
BENCHMARK(BM_ExtractFeatures);

void BM_RenderUtterance(benchmark::State& state) {
  const SpeakerProfile profile = make_speaker_profile(1, 42);
  const std::vector<int> symbols = {0, 3, 7, 2, 9, 5, 1, 8, 4, 10};
  std::uint64_t seed = 0;
  for (auto _ : state) {
    Rng rng(seed++);
    benchmark::DoNotOptimize(render(profile, symbols, rng).signal.data());
  }
}
BENCHMARK(BM_RenderUtterance);

}  // namespace

BENCHMARK_MAIN();

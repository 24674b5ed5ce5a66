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

// Trained-model behavior: quantizer health, representation quality, and the
// seq2seq overfit path. Minutes-scale; everything below shares one trained
// quantizer per fixture.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "vqvc/checkpoint.h"
#include "vqvc/feat_io.h"
#include "vqvc/pipeline.h"

using namespace vqvc;
namespace fs = std::filesystem;

namespace {

struct TrainedFixture {
  RunConfig cfg;
  Manifest manifest;
  VqEncoderModel model;
  ParamStore store;
  VqTrainResult result;

  TrainedFixture()
      : cfg(make_cfg()),
        manifest(cmd_gen_corpus(cfg, true)),
        model(cfg.encoder, cfg.quant, cfg.agg, cfg.contrast) {
    result = pretrain_quantizer(manifest, model, cfg.vq_train, store);
  }

  static RunConfig make_cfg() {
    RunConfig cfg;
    cfg.seed = 1;
    cfg.out_dir = fs::temp_directory_path() / "vqvc_train_integration";
    cfg.vq_train.steps = 4000;
    cfg.vq_train.batch = 8;
    cfg.contrast.tau_anneal_steps = 2000;
    cfg.finalize();
    fs::remove_all(cfg.out_dir);
    return cfg;
  }
};

TrainedFixture& fixture() {
  static TrainedFixture f;
  return f;
}

double mean_slice(const std::vector<double>& v, size_t begin, size_t end) {
  double acc = 0.0;
  for (size_t i = begin; i < end; ++i) acc += v[i];
  return acc / static_cast<double>(end - begin);
}

// majority-label purity of codes clustered by joint combination
double cluster_purity(const std::map<std::int64_t, std::map<int, std::int64_t>>& hist) {
  std::int64_t correct = 0, total = 0;
  for (const auto& [combo, labels] : hist) {
    std::int64_t best = 0;
    for (const auto& [label, count] : labels) {
      best = std::max(best, count);
      total += count;
    }
    correct += best;
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace

TEST_CASE("quantizer training loss decreases") {
  TrainedFixture& f = fixture();
  const std::vector<double>& loss = f.result.step_loss;
  const size_t tenth = loss.size() / 10;
  const double first = mean_slice(loss, 0, tenth);
  const double last = mean_slice(loss, loss.size() - tenth, loss.size());
  INFO("first 10% ", first, " last 10% ", last);
  CHECK(last < first);
  // perplexity is reported on every eval row
  for (const VqEvalRow& row : f.result.evals) {
    CHECK(row.group_perplexity.size() == 2);
    CHECK(row.group_perplexity[0] >= 1.0);
  }
}

TEST_CASE("single-utterance overfit drives the contrastive loss below init") {
  TrainedFixture& f = fixture();
  // one-utterance corpus via a filtered manifest
  Manifest tiny = f.manifest;
  tiny.entries.clear();
  for (const ManifestEntry& e : f.manifest.entries) {
    if (e.split == "quantizer") {
      tiny.entries.push_back(e);
      break;
    }
  }
  VqTrainConfig tcfg = f.cfg.vq_train;
  tcfg.steps = 400;
  tcfg.eval_interval = 200;
  ParamStore store;
  const VqTrainResult res = pretrain_quantizer(tiny, f.model, tcfg, store);
  CHECK(mean_slice(res.step_loss, res.step_loss.size() - 40, res.step_loss.size()) <
        res.step_loss.front());
}

TEST_CASE("fixed seed twice gives identical checkpoints") {
  TrainedFixture& f = fixture();
  VqTrainConfig tcfg = f.cfg.vq_train;
  tcfg.steps = 120;
  tcfg.eval_interval = 60;
  ParamStore a, b;
  pretrain_quantizer(f.manifest, f.model, tcfg, a);
  pretrain_quantizer(f.manifest, f.model, tcfg, b);
  const fs::path dir = f.cfg.out_dir;
  save_checkpoint(a, dir / "det_a.ckpt");
  save_checkpoint(b, dir / "det_b.ckpt");
  std::ifstream fa(dir / "det_a.ckpt", std::ios::binary), fb(dir / "det_b.ckpt", std::ios::binary);
  const std::string bytes_a((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  const std::string bytes_b((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(bytes_a == bytes_b);
}

TEST_CASE("codes cluster by latent symbol more than by speaker") {
  TrainedFixture& f = fixture();
  std::map<std::int64_t, std::map<int, std::int64_t>> by_symbol, by_speaker;
  for (const ManifestEntry* e : f.manifest.split("quantizer")) {
    const SynthUtterance utt = re_render(f.manifest, *e);
    const IndexSeq idx = f.model.extract_indices(f.store, utt.signal);
    REQUIRE(idx.frames() == static_cast<Index>(utt.frame_symbols.size()));
    for (Index t = 0; t < idx.frames(); ++t) {
      const std::int64_t combo = joint_id(idx.tuple(t), f.cfg.quant.vocab);
      by_symbol[combo][utt.frame_symbols[static_cast<size_t>(t)]]++;
      by_speaker[combo][e->speaker]++;
    }
  }
  const double symbol_purity = cluster_purity(by_symbol);
  const double speaker_purity = cluster_purity(by_speaker);
  INFO("symbol purity ", symbol_purity, " speaker purity ", speaker_purity);
  CHECK(symbol_purity > speaker_purity);
}

TEST_CASE("grouping beats an equal-bits single codebook on joint-combination usage") {
  TrainedFixture& f = fixture();
  // G=1, V=64: same total bits, known to collapse harder
  RunConfig flat_cfg = f.cfg;
  flat_cfg.quant.groups = 1;
  flat_cfg.quant.vocab = 64;
  flat_cfg.finalize();
  VqEncoderModel flat_model(flat_cfg.encoder, flat_cfg.quant, flat_cfg.agg, flat_cfg.contrast);
  ParamStore flat_store;
  pretrain_quantizer(f.manifest, flat_model, flat_cfg.vq_train, flat_store);

  auto unique_combos = [&](const VqEncoderModel& model, ParamStore& store) {
    std::vector<IndexSeq> seqs;
    for (const ManifestEntry* e : f.manifest.split("quantizer")) {
      seqs.push_back(model.extract_indices(store, read_signal(f.manifest.dir / e->signal_path)));
    }
    return quantizer_stats(seqs).unique_combinations;
  };
  const std::int64_t grouped = unique_combos(f.model, f.store);
  const std::int64_t flat = unique_combos(flat_model, flat_store);
  INFO("grouped ", grouped, " flat ", flat);
  CHECK(grouped > flat);
}

TEST_CASE("same speaker, same symbols: index sequences nearly agree") {
  TrainedFixture& f = fixture();
  double acc = 0.0;
  int n = 0;
  for (int pair = 0; pair < 12; ++pair) {
    const ManifestEntry* e = f.manifest.split("target_train")[static_cast<size_t>(pair)];
    const SpeakerProfile prof = make_speaker_profile(e->speaker, f.manifest.seed);
    Rng ra(5000 + pair), rb(6000 + pair);
    const SynthUtterance ua = render(prof, e->symbols, ra, f.manifest.spec.render);
    const SynthUtterance ub = render(prof, e->symbols, rb, f.manifest.spec.render);
    const IndexSeq ia = f.model.extract_indices(f.store, ua.signal);
    const IndexSeq ib = f.model.extract_indices(f.store, ub.signal);
    std::vector<int> xa, xb;
    for (Index t = 0; t < ia.frames(); ++t) xa.push_back(static_cast<int>(joint_id(ia.tuple(t), 8)));
    for (Index t = 0; t < ib.frames(); ++t) xb.push_back(static_cast<int>(joint_id(ib.tuple(t), 8)));
    acc += error_rate(xa, xb);
    ++n;
  }
  const double mean_distance = acc / n;
  INFO("mean normalized edit distance over ", n, " pairs: ", mean_distance);
  CHECK(mean_distance < 0.3);
}

TEST_CASE("combine reduction on the trained quantizer is stable across seeds") {
  TrainedFixture& f = fixture();
  auto reduction_for = [&](std::uint64_t render_salt) {
    std::vector<IndexSeq> seqs;
    for (int i = 0; i < 24; ++i) {
      const ManifestEntry* e = f.manifest.split("target_train")[static_cast<size_t>(i)];
      const SpeakerProfile prof = make_speaker_profile(e->speaker, f.manifest.seed);
      Rng rng(render_salt + static_cast<std::uint64_t>(i));
      const SynthUtterance utt = render(prof, e->symbols, rng, f.manifest.spec.render);
      seqs.push_back(f.model.extract_indices(f.store, utt.signal));
    }
    return vocab_stats(seqs).reduction_ratio;
  };
  const double r1 = reduction_for(91000);
  const double r2 = reduction_for(92000);
  INFO("reduction ", r1, " vs ", r2);
  CHECK(r1 > 0.0);
  CHECK(std::fabs(r1 - r2) < 0.05);
}

TEST_CASE("seq2seq overfits one pair and free-runs to the right length") {
  TrainedFixture& f = fixture();
  const ManifestEntry* e = f.manifest.split("target_train")[0];
  const IndexSeq idx = combine(f.model.extract_indices(
      f.store, read_signal(f.manifest.dir / e->signal_path)));
  const Tensor target = read_feat(f.manifest.dir / e->feat_path);

  Seq2SeqModel model(f.cfg.s2s);
  ParamStore store;
  Rng init(77);
  model.init_params(store, init);
  std::vector<Tensor> feats = {target};
  Tensor mean, sd;
  feature_norm_stats(feats, &mean, &sd);
  model.set_feature_norm(store, mean, sd);

  const double init_l1 = model.teacher_forced_l1(store, idx, target);
  AdamConfig adam{.lr = 1e-3f};
  Rng noise(78);
  for (int step = 0; step < 900; ++step) {
    Graph g;
    Var emb = model.embed_front_end(g, store, idx);
    Var enc = model.encode_tokens(g, store, emb);
    auto out = model.decode_train(g, store, enc, model.normalize(store, target), &noise);
    g.backward(out.loss);
    store.adam_step(adam);
  }
  const double final_l1 = model.teacher_forced_l1(store, idx, target);
  INFO("teacher-forced L1 ", init_l1, " -> ", final_l1);
  CHECK(final_l1 < 0.1 * init_l1);

  const auto inf = model.decode_infer(store, idx);
  const double len_ratio = static_cast<double>(inf.frames.dim(0)) / static_cast<double>(target.dim(0));
  CHECK(len_ratio >= 0.8);
  CHECK(len_ratio <= 1.2);
  // teacher-free output close to the target per frame (normalized space)
  const Tensor out_n = model.normalize(store, inf.frames);
  const Tensor tgt_n = model.normalize(store, target);
  const Index frames = std::min(out_n.dim(0), tgt_n.dim(0));
  double l1 = 0.0;
  for (Index t = 0; t < frames; ++t)
    for (Index d = 0; d < tgt_n.dim(1); ++d) l1 += std::fabs(out_n.at(t, d) - tgt_n.at(t, d));
  CHECK(l1 / static_cast<double>(frames * tgt_n.dim(1)) < 0.1);
}

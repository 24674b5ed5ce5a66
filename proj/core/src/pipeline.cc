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

#include "vqvc/pipeline.h"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "vqvc/checkpoint.h"
#include "vqvc/feat_io.h"

namespace vqvc {

namespace fs = std::filesystem;

namespace {

VqEncoderModel make_vq_model(const RunConfig& cfg) {
  return VqEncoderModel(cfg.encoder, cfg.quant, cfg.agg, cfg.contrast);
}

Seq2SeqModel make_s2s_model(const RunConfig& cfg) { return Seq2SeqModel(cfg.s2s); }

// u64 hashes are stamped into checkpoint meta as four u16 chunks, each
// exactly representable in f32.
void put_hash(std::map<std::string, float>& meta, const std::string& key, std::uint64_t h) {
  for (int i = 0; i < 4; ++i) {
    meta[key + std::to_string(i)] = static_cast<float>((h >> (16 * i)) & 0xffffu);
  }
}

float meta_at(const std::map<std::string, float>& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw DataError("checkpoint missing meta field: " + key);
  return it->second;
}

std::map<std::string, float> quantizer_meta(const RunConfig& cfg) {
  std::map<std::string, float> meta;
  meta["kind"] = 1.0f;  // quantizer
  meta["vocab"] = static_cast<float>(cfg.quant.vocab);
  meta["groups"] = static_cast<float>(cfg.quant.groups);
  meta["dim"] = static_cast<float>(cfg.quant.dim);
  put_hash(meta, "config_hash_", cfg.config_hash());
  return meta;
}

std::map<std::string, float> s2s_meta(const RunConfig& cfg, bool finetuned) {
  std::map<std::string, float> meta;
  meta["kind"] = 2.0f;  // seq2seq
  meta["combine"] = cfg.post.combine ? 1.0f : 0.0f;
  meta["separate"] = cfg.post.separate ? 1.0f : 0.0f;
  meta["vocab"] = static_cast<float>(cfg.s2s.vocab);
  meta["groups"] = static_cast<float>(cfg.s2s.groups);
  meta["embed_dim"] = static_cast<float>(cfg.s2s.embed_dim);
  meta["model_dim"] = static_cast<float>(cfg.s2s.model_dim);
  meta["heads"] = static_cast<float>(cfg.s2s.heads);
  meta["enc_layers"] = static_cast<float>(cfg.s2s.enc_layers);
  meta["dec_layers"] = static_cast<float>(cfg.s2s.dec_layers);
  meta["ffn_dim"] = static_cast<float>(cfg.s2s.ffn_dim);
  meta["acoustic_dim"] = static_cast<float>(cfg.s2s.acoustic_dim);
  meta["finetuned"] = finetuned ? 1.0f : 0.0f;
  put_hash(meta, "config_hash_", cfg.config_hash());
  return meta;
}

Manifest require_manifest(const RunConfig& cfg) {
  const PipelinePaths paths{cfg.out_dir};
  if (!fs::exists(paths.manifest_file())) {
    throw DataError("no corpus manifest at " + paths.manifest_file().string() +
                    " (run gen-corpus first)");
  }
  return load_manifest(paths.manifest_file());
}

// Minimal deterministic fan-out: results land in slot order regardless of
// the thread count.
template <typename Fn>
void parallel_for(Index n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<Index> next{0};
  const int use = std::min<int>(threads, static_cast<int>(n));
  for (int t = 0; t < use; ++t) {
    pool.emplace_back([&]() {
      for (Index i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (std::thread& th : pool) th.join();
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::uint64_t checkpoint_config_hash(const std::map<std::string, float>& meta) {
  std::uint64_t h = 0;
  for (int i = 0; i < 4; ++i) {
    auto it = meta.find("config_hash_" + std::to_string(i));
    if (it == meta.end()) return 0;
    h |= static_cast<std::uint64_t>(static_cast<std::uint32_t>(it->second)) << (16 * i);
  }
  return h;
}

Manifest cmd_gen_corpus(const RunConfig& cfg, bool force) {
  const PipelinePaths paths{cfg.out_dir};
  return generate_corpus(cfg.corpus, cfg.seed, paths.corpus_dir(), force);
}

void cmd_pretrain_quantizer(const RunConfig& cfg) {
  const Manifest manifest = require_manifest(cfg);
  const PipelinePaths paths{cfg.out_dir};
  fs::create_directories(paths.quantizer_dir());

  const VqEncoderModel model = make_vq_model(cfg);
  ParamStore store;
  VqTrainResult result;
  try {
    result = pretrain_quantizer(manifest, model, cfg.vq_train, store);
  } catch (const NumericError&) {
    if (store.size() > 0) {
      save_checkpoint(store, paths.quantizer_ckpt().string() + ".failed", quantizer_meta(cfg));
    }
    throw;
  }
  save_checkpoint(store, paths.quantizer_ckpt(), quantizer_meta(cfg));

  std::ofstream curve(paths.quantizer_curve(), std::ios::trunc);
  curve << "step\tloss\tperplexity\tunique_combinations\n";
  for (const VqEvalRow& row : result.evals) {
    curve << row.step << '\t' << format_double(row.mean_loss) << '\t';
    for (size_t g = 0; g < row.group_perplexity.size(); ++g) {
      curve << (g ? "," : "") << format_double(row.group_perplexity[g]);
    }
    curve << '\t' << row.unique_combinations << '\n';
  }
  if (!curve) throw DataError("cannot write quantizer curve file");
}

ExtractResult cmd_extract(const RunConfig& cfg, const fs::path& quantizer_ckpt,
                          const std::vector<std::string>& splits) {
  const Manifest manifest = require_manifest(cfg);
  const PipelinePaths paths{cfg.out_dir};
  const VqEncoderModel model = make_vq_model(cfg);
  ParamStore store;
  const auto meta = load_checkpoint(store, quantizer_ckpt);
  VQVC_CHECK(static_cast<int>(meta_at(meta, "vocab")) == cfg.quant.vocab &&
                 static_cast<int>(meta_at(meta, "groups")) == cfg.quant.groups,
             "quantizer checkpoint V/G disagrees with config");

  ExtractResult result;
  const fs::path base = paths.indices_dir(cfg.post.combine);
  for (const std::string& split_name : splits) {
    const std::vector<const ManifestEntry*> entries = manifest.split(split_name);
    if (entries.empty()) throw DataError("manifest has no split named " + split_name);
    fs::create_directories(base / split_name);

    const Index n = static_cast<Index>(entries.size());
    std::vector<IndexSeq> seqs(static_cast<size_t>(n));
    std::vector<std::string> errors(static_cast<size_t>(n));
    parallel_for(n, cfg.threads, [&](Index i) {
      const ManifestEntry* e = entries[static_cast<size_t>(i)];
      try {
        const std::vector<float> signal = read_signal(manifest.dir / e->signal_path);
        IndexSeq seq = model.extract_indices(store, signal);
        if (cfg.post.combine) seq = combine(seq);
        seqs[static_cast<size_t>(i)] = std::move(seq);
      } catch (const Error& err) {
        errors[static_cast<size_t>(i)] = err.what();
      }
    });

    std::vector<IndexSeq> split_seqs;
    for (Index i = 0; i < n; ++i) {
      const ManifestEntry* e = entries[static_cast<size_t>(i)];
      if (!errors[static_cast<size_t>(i)].empty()) {
        std::cerr << "extract: " << e->utt_id << ": " << errors[static_cast<size_t>(i)] << "\n";
        result.failures.push_back(e->utt_id);
        continue;
      }
      const NamedIndexSeq named{e->utt_id, seqs[static_cast<size_t>(i)]};
      write_index_file(base / split_name / (e->utt_id + ".idx"), {&named, 1});
      split_seqs.push_back(std::move(seqs[static_cast<size_t>(i)]));
      ++result.files;
    }
    if (!split_seqs.empty()) {
      const VocabStats stats = vocab_stats(split_seqs);
      std::ofstream sf(base / (split_name + ".stats"), std::ios::trunc);
      sf << "utterances=" << split_seqs.size() << "\n";
      sf << "total_frames=" << stats.total_frames << "\n";
      sf << "combined_frames=" << stats.combined_frames << "\n";
      sf << "unique_combinations=" << stats.unique_combinations << "\n";
      sf << "reduction_ratio=" << format_double(stats.reduction_ratio) << "\n";
      for (size_t g = 0; g < stats.group_perplexity.size(); ++g) {
        sf << "perplexity_g" << g << "=" << format_double(stats.group_perplexity[g]) << "\n";
      }
      result.stats = stats;
    }
  }
  return result;
}

namespace {

struct TrainPair {
  IndexSeq idx;
  Tensor target_raw;
};

IndexSeq read_single_dump(const fs::path& path) {
  const std::vector<NamedIndexSeq> seqs = read_index_file(path);
  if (seqs.size() != 1) throw DataError("expected one utterance in " + path.string());
  return seqs[0].seq;
}

std::vector<TrainPair> load_pairs(const Manifest& manifest, const fs::path& indices_base,
                                  const std::string& split,
                                  const std::vector<const ManifestEntry*>& entries) {
  std::vector<TrainPair> pairs;
  pairs.reserve(entries.size());
  for (const ManifestEntry* e : entries) {
    TrainPair p;
    p.idx = read_single_dump(indices_base / split / (e->utt_id + ".idx"));
    p.target_raw = read_feat(manifest.dir / e->feat_path);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace

S2sTrainOutcome cmd_train_seq2seq(const RunConfig& cfg, const std::string& phase,
                                  const std::string& train_split, int target_size,
                                  const std::optional<fs::path>& init_ckpt, int steps,
                                  const fs::path& out_ckpt) {
  VQVC_CHECK(phase == "pretrain" || phase == "finetune", "phase must be pretrain or finetune");
  if (phase == "finetune" && !init_ckpt) {
    throw ContractError("finetune requires an init checkpoint");
  }
  const Manifest manifest = require_manifest(cfg);
  const PipelinePaths paths{cfg.out_dir};
  const fs::path indices_base = paths.indices_dir(cfg.post.combine);

  // training pairs
  std::vector<const ManifestEntry*> train_entries;
  if (train_split == "target_train") {
    VQVC_CHECK(target_size > 0, "target_train needs a target size");
    train_entries = manifest.target_subset(target_size);
  } else {
    train_entries = manifest.split(train_split);
    VQVC_CHECK(!train_entries.empty(), "no utterances in split " << train_split);
  }
  const std::vector<TrainPair> train_pairs = load_pairs(manifest, indices_base, train_split, train_entries);

  // validation pairs: held-out same-speaker pairs for TTS pretraining,
  // unseen-source -> oracle-target pairs for target training
  std::vector<TrainPair> val_pairs;
  if (train_split == "tts_pretrain") {
    val_pairs = load_pairs(manifest, indices_base, "tts_pretrain_val",
                           manifest.split("tts_pretrain_val"));
  } else {
    for (const ManifestEntry* e : manifest.split("val")) {
      TrainPair p;
      p.idx = read_single_dump(indices_base / "val" / (e->utt_id + ".idx"));
      p.target_raw = render_oracle(manifest, *e, manifest.spec.target_speaker).features;
      val_pairs.push_back(std::move(p));
    }
  }
  VQVC_CHECK(!val_pairs.empty(), "no validation pairs");

  const Seq2SeqModel model = make_s2s_model(cfg);
  ParamStore store;
  const std::string role = phase + "/" + train_split + "/" + std::to_string(target_size);
  Rng init_rng = Rng(cfg.seed).fork(hash_combine(0xB1, fnv1a64(role.data(), role.size())));
  Rng batch_rng = Rng(cfg.seed).fork(hash_combine(0xB2, fnv1a64(role.data(), role.size())));
  Rng noise_rng = Rng(cfg.seed).fork(hash_combine(0xB3, fnv1a64(role.data(), role.size())));

  if (init_ckpt) {
    const auto meta = load_checkpoint(store, *init_ckpt);
    if ((meta_at(meta, "combine") > 0.5f) != cfg.post.combine ||
        (meta_at(meta, "separate") > 0.5f) != cfg.post.separate) {
      throw ContractError("init checkpoint postprocessing flags disagree with config");
    }
    VQVC_CHECK(static_cast<int>(meta_at(meta, "vocab")) == cfg.s2s.vocab &&
                   static_cast<int>(meta_at(meta, "groups")) == cfg.s2s.groups &&
                   static_cast<int>(meta_at(meta, "model_dim")) == cfg.s2s.model_dim &&
                   static_cast<int>(meta_at(meta, "embed_dim")) == cfg.s2s.embed_dim,
               "init checkpoint vocab/meta disagrees with config");
    // fresh optimizer state for the new phase
    for (auto& [name, entry] : store.entries()) {
      entry.m = Tensor();
      entry.v = Tensor();
    }
    store.set_step_count(0);
  } else {
    model.init_params(store, init_rng);
    std::vector<Tensor> train_feats;
    train_feats.reserve(train_pairs.size());
    for (const TrainPair& p : train_pairs) train_feats.push_back(p.target_raw);
    Tensor mean, stddev;
    feature_norm_stats(train_feats, &mean, &stddev);
    model.set_feature_norm(store, mean, stddev);
  }

  AdamConfig adam;
  adam.lr = cfg.s2s_train.lr;

  auto validate = [&]() {
    double total = 0.0;
    for (const TrainPair& p : val_pairs) {
      total += model.teacher_forced_l1(store, p.idx, p.target_raw);
    }
    return total / static_cast<double>(val_pairs.size());
  };

  S2sTrainOutcome outcome;
  outcome.ckpt = out_ckpt;
  fs::create_directories(out_ckpt.parent_path());
  std::ofstream curve(out_ckpt.string() + ".curve.tsv", std::ios::trunc);
  curve << "step\ttrain_loss\tval_l1\n";

  for (int step = 0; step < steps; ++step) {
    Graph g;
    Var batch_loss;
    for (int b = 0; b < cfg.s2s_train.batch; ++b) {
      const TrainPair& p =
          train_pairs[static_cast<size_t>(batch_rng.uniform_int(static_cast<std::int64_t>(train_pairs.size())))];
      Var emb = model.embed_front_end(g, store, p.idx);
      Var enc = model.encode_tokens(g, store, emb);
      const Tensor target_norm = model.normalize(store, p.target_raw);
      Seq2SeqModel::TrainOut out = model.decode_train(g, store, enc, target_norm, &noise_rng);
      batch_loss = b == 0 ? out.loss : add(batch_loss, out.loss);
    }
    batch_loss = scale(batch_loss, 1.0f / static_cast<float>(cfg.s2s_train.batch));
    const double loss_value = batch_loss.scalar_value();
    if (!std::isfinite(loss_value)) {
      save_checkpoint(store, out_ckpt.string() + ".failed", s2s_meta(cfg, phase == "finetune"));
      throw NumericError("seq2seq training diverged at step " + std::to_string(step));
    }
    g.backward(batch_loss);
    store.adam_step(adam);
    outcome.step_loss.push_back(loss_value);

    if ((step + 1) % cfg.s2s_train.val_interval == 0 || step + 1 == steps) {
      const double val_l1 = validate();
      outcome.val_curve.emplace_back(step + 1, val_l1);
      curve << (step + 1) << '\t' << format_double(loss_value) << '\t' << format_double(val_l1) << '\n';
    }
  }
  outcome.final_val_l1 = outcome.val_curve.empty() ? validate() : outcome.val_curve.back().second;
  save_checkpoint(store, out_ckpt, s2s_meta(cfg, phase == "finetune"));
  if (!curve) throw DataError("cannot write training curve for " + out_ckpt.string());
  return outcome;
}

ConvertOutcome cmd_convert(const RunConfig& cfg, const fs::path& quantizer_ckpt,
                           const fs::path& s2s_ckpt, const std::string& split, const fs::path& dest) {
  const Manifest manifest = require_manifest(cfg);
  const VqEncoderModel vq_model = make_vq_model(cfg);
  ParamStore vq_store;
  const auto vq_meta = load_checkpoint(vq_store, quantizer_ckpt);
  VQVC_CHECK(static_cast<int>(meta_at(vq_meta, "vocab")) == cfg.quant.vocab &&
                 static_cast<int>(meta_at(vq_meta, "groups")) == cfg.quant.groups,
             "quantizer checkpoint V/G disagrees with config");

  const Seq2SeqModel s2s_model = make_s2s_model(cfg);
  ParamStore s2s_store;
  const auto meta = load_checkpoint(s2s_store, s2s_ckpt);
  const bool ckpt_combine = meta_at(meta, "combine") > 0.5f;
  const bool ckpt_separate = meta_at(meta, "separate") > 0.5f;
  if (ckpt_combine != cfg.post.combine || ckpt_separate != cfg.post.separate) {
    std::ostringstream os;
    os << "postprocessing flags disagree: checkpoint was trained with combine=" << ckpt_combine
       << " separate=" << ckpt_separate << " but the config requests combine=" << cfg.post.combine
       << " separate=" << cfg.post.separate;
    throw ConfigError(os.str());
  }

  const std::vector<const ManifestEntry*> entries = manifest.split(split);
  if (entries.empty()) throw DataError("manifest has no split named " + split);
  fs::create_directories(dest);

  ConvertOutcome outcome;
  std::ofstream report(dest / "convert_report.txt", std::ios::trunc);
  report << "utt\tframes\ttruncated\n";
  for (const ManifestEntry* e : entries) {
    const std::vector<float> signal = read_signal(manifest.dir / e->signal_path);
    IndexSeq idx = vq_model.extract_indices(vq_store, signal);
    if (cfg.post.combine) idx = combine(idx);
    const Seq2SeqModel::InferOut out = s2s_model.decode_infer(s2s_store, idx);
    write_feat(dest / (e->utt_id + ".feat"), out.frames);
    const NamedIndexSeq named{e->utt_id, idx};
    write_index_file(dest / (e->utt_id + ".idx"), {&named, 1});
    report << e->utt_id << '\t' << out.frames.dim(0) << '\t' << (out.truncated ? 1 : 0) << '\n';
    ++outcome.converted;
    if (out.truncated) ++outcome.truncated;
  }
  if (!report) throw DataError("cannot write convert report");
  return outcome;
}

EvalSummary cmd_eval(const RunConfig& cfg, const fs::path& converted_dir, const std::string& split,
                     const fs::path& report_path) {
  const Manifest manifest = require_manifest(cfg);
  const std::vector<const ManifestEntry*> entries = manifest.split(split);
  if (entries.empty()) throw DataError("manifest has no split named " + split);

  // symbol templates from the target speaker's full training data
  std::vector<Tensor> template_feats;
  std::vector<std::vector<int>> template_labels;
  for (const ManifestEntry* e : manifest.split("target_train")) {
    const SynthUtterance utt = re_render(manifest, *e);
    template_feats.push_back(utt.features);
    template_labels.push_back(utt.frame_symbols);
  }
  const Tensor templates = build_symbol_templates(template_feats, template_labels, kAlphabetSize);

  fs::create_directories(report_path.parent_path());
  std::ofstream report(report_path, std::ios::trunc);
  report << "# per-utterance conversion metrics, split=" << split << "\n";

  EvalSummary summary;
  std::vector<IndexSeq> index_corpus;
  int successes = 0;
  for (const ManifestEntry* e : entries) {
    const fs::path feat_path = converted_dir / (e->utt_id + ".feat");
    if (!fs::exists(feat_path)) continue;
    const Tensor converted = read_feat(feat_path);
    const Tensor source_feats = read_feat(manifest.dir / e->feat_path);
    const Tensor oracle = render_oracle(manifest, *e, manifest.spec.target_speaker).features;
    const McdResult conv = mcd_full(converted, oracle, /*align=*/true);
    const McdResult copy = mcd_full(source_feats, oracle, /*align=*/true);
    const std::vector<int> hyp = template_decode(converted, templates);
    const double ser = error_rate(hyp, e->symbols);

    const fs::path idx_path = converted_dir / (e->utt_id + ".idx");
    if (fs::exists(idx_path)) index_corpus.push_back(read_single_dump(idx_path));

    report << "utt " << e->utt_id << " mcd_conv=" << format_double(conv.mcd)
           << " mcd_copy=" << format_double(copy.mcd) << " ser=" << format_double(ser)
           << " path_len=" << conv.path_length << "\n";

    summary.mean_mcd_conv += conv.mcd;
    summary.mean_mcd_copy += copy.mcd;
    summary.mean_ser += ser;
    if (conv.mcd < copy.mcd) ++successes;
    ++summary.utterances;
  }
  if (summary.utterances == 0) throw DataError("no converted utterances found in " + converted_dir.string());
  summary.mean_mcd_conv /= summary.utterances;
  summary.mean_mcd_copy /= summary.utterances;
  summary.mean_ser /= summary.utterances;
  summary.success_rate = static_cast<double>(successes) / summary.utterances;
  if (!index_corpus.empty()) {
    const QuantStats qs = quantizer_stats(index_corpus);
    summary.group_perplexity = qs.group_perplexity;
    summary.unique_combinations = qs.unique_combinations;
  }

  report << "summary utterances=" << summary.utterances
         << " mean_mcd_conv=" << format_double(summary.mean_mcd_conv)
         << " mean_mcd_copy=" << format_double(summary.mean_mcd_copy)
         << " mean_ser=" << format_double(summary.mean_ser)
         << " success_rate=" << format_double(summary.success_rate) << " unique_combinations="
         << summary.unique_combinations << "\n";
  if (!report) throw DataError("cannot write eval report " + report_path.string());
  return summary;
}

// ---- grid -------------------------------------------------------------------

void write_grid_report(const fs::path& path, const GridReport& report) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  os << "config_hash=" << report.config_hash << "\n";
  for (const GridCell& cell : report.cells) {
    os << "cell variant=" << variant_name(cell.variant) << " size=" << cell.target_size
       << " failed=" << (cell.failed ? 1 : 0) << " val_l1=" << format_double(cell.final_val_l1)
       << " mcd_conv=" << format_double(cell.summary.mean_mcd_conv)
       << " mcd_copy=" << format_double(cell.summary.mean_mcd_copy)
       << " ser=" << format_double(cell.summary.mean_ser)
       << " success_rate=" << format_double(cell.summary.success_rate)
       << " utterances=" << cell.summary.utterances << "\n";
  }
  if (!os) throw DataError("cannot write grid report " + path.string());
}

GridReport read_grid_report(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open grid report " + path.string());
  GridReport report;
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("config_hash=", 0) == 0) {
      report.config_hash = std::stoull(line.substr(12));
      continue;
    }
    if (line.rfind("cell ", 0) != 0) continue;
    GridCell cell;
    std::istringstream ls(line.substr(5));
    std::string field;
    while (ls >> field) {
      const size_t eq = field.find('=');
      if (eq == std::string::npos) throw DataError("malformed grid report field: " + field);
      const std::string key = field.substr(0, eq);
      const std::string val = field.substr(eq + 1);
      if (key == "variant") cell.variant = variant_from_name(val);
      else if (key == "size") cell.target_size = std::stoi(val);
      else if (key == "failed") cell.failed = val == "1";
      else if (key == "val_l1") cell.final_val_l1 = std::stod(val);
      else if (key == "mcd_conv") cell.summary.mean_mcd_conv = std::stod(val);
      else if (key == "mcd_copy") cell.summary.mean_mcd_copy = std::stod(val);
      else if (key == "ser") cell.summary.mean_ser = std::stod(val);
      else if (key == "success_rate") cell.summary.success_rate = std::stod(val);
      else if (key == "utterances") cell.summary.utterances = std::stoi(val);
      else throw DataError("unknown grid report field: " + key);
    }
    report.cells.push_back(cell);
  }
  return report;
}

std::string render_grid_table(const GridReport& report) {
  std::ostringstream os;
  os << "postprocess        size  mcd_conv  mcd_copy    ser  success  val_l1\n";
  for (const GridCell& cell : report.cells) {
    char buf[160];
    if (cell.failed) {
      std::snprintf(buf, sizeof(buf), "%-18s %4d  (failed)\n", variant_name(cell.variant),
                    cell.target_size);
    } else {
      std::snprintf(buf, sizeof(buf), "%-18s %4d  %8.3f  %8.3f  %5.3f  %7.2f  %6.4f\n",
                    variant_name(cell.variant), cell.target_size, cell.summary.mean_mcd_conv,
                    cell.summary.mean_mcd_copy, cell.summary.mean_ser, cell.summary.success_rate,
                    cell.final_val_l1);
    }
    os << buf;
  }
  return os.str();
}

GridReport cmd_run_grid(const RunConfig& cfg, bool render_only) {
  const PipelinePaths paths{cfg.out_dir};
  if (render_only) {
    GridReport report = read_grid_report(paths.grid_report());
    std::cout << render_grid_table(report);
    return report;
  }
  require_manifest(cfg);
  if (!fs::exists(paths.quantizer_ckpt())) {
    throw DataError("no quantizer checkpoint at " + paths.quantizer_ckpt().string() +
                    " (run pretrain-quantizer first)");
  }

  GridReport report;
  report.config_hash = cfg.config_hash();
  bool extracted[2] = {false, false};
  const std::vector<std::string> splits = {"tts_pretrain", "tts_pretrain_val", "target_train", "val"};

  for (Variant variant : kAllVariants) {
    const RunConfig vcfg = cfg.with_variant(variant);
    const std::string vname = variant_name(variant);
    bool pretrain_ok = true;
    fs::path pretrain_ckpt = paths.s2s_dir(vname) / "pretrain.ckpt";
    try {
      if (!extracted[vcfg.post.combine ? 1 : 0]) {
        std::cerr << "grid: extracting indices (combine=" << vcfg.post.combine << ")\n";
        const ExtractResult er = cmd_extract(vcfg, paths.quantizer_ckpt(), splits);
        if (!er.failures.empty()) throw DataError("extraction failed for some utterances");
        extracted[vcfg.post.combine ? 1 : 0] = true;
      }
      std::cerr << "grid: TTS-pretraining variant " << vname << "\n";
      cmd_train_seq2seq(vcfg, "pretrain", "tts_pretrain", 0, std::nullopt,
                        vcfg.s2s_train.pretrain_steps, pretrain_ckpt);
    } catch (const Error& err) {
      std::cerr << "grid: variant " << vname << " pretraining failed: " << err.what() << "\n";
      pretrain_ok = false;
    }
    for (int size : cfg.corpus.target_sizes) {
      GridCell cell;
      cell.variant = variant;
      cell.target_size = size;
      if (!pretrain_ok) {
        cell.failed = true;
        report.cells.push_back(cell);
        continue;
      }
      try {
        std::cerr << "grid: finetuning " << vname << " on " << size << " utterances\n";
        const std::string tag = vname + "_" + std::to_string(size);
        const fs::path ft_ckpt = paths.s2s_dir(vname) / ("ft_" + std::to_string(size) + ".ckpt");
        const S2sTrainOutcome ft = cmd_train_seq2seq(vcfg, "finetune", "target_train", size,
                                                     pretrain_ckpt, vcfg.s2s_train.finetune_steps,
                                                     ft_ckpt);
        cell.final_val_l1 = ft.final_val_l1;
        const fs::path dest = paths.converted_dir(tag);
        cmd_convert(vcfg, paths.quantizer_ckpt(), ft_ckpt, "val", dest);
        cell.summary = cmd_eval(vcfg, dest, "val", paths.reports_dir() / (tag + ".txt"));
      } catch (const Error& err) {
        std::cerr << "grid: cell " << vname << "/" << size << " failed: " << err.what() << "\n";
        cell.failed = true;
      }
      report.cells.push_back(cell);
    }
  }
  write_grid_report(paths.grid_report(), report);
  std::cout << render_grid_table(report);
  return report;
}

}  // namespace vqvc

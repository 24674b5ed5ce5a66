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

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "vqvc/checkpoint.h"
#include "vqvc/feat_io.h"
#include "vqvc/pipeline.h"

using namespace vqvc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

// Micro run: real pipeline mechanics, minutes-scale nowhere.
RunConfig micro_config(const fs::path& out) {
  RunConfig cfg;
  cfg.seed = 11;
  cfg.out_dir = out;
  cfg.corpus.n_quantizer_speakers = 2;
  cfg.corpus.n_utts_each = 4;
  cfg.corpus.pretrain_utts = 6;
  cfg.corpus.pretrain_val_utts = 2;
  cfg.corpus.target_sizes = {6, 3};
  cfg.corpus.val_utts = 3;
  cfg.corpus.test_utts = 3;
  cfg.corpus.min_symbols = 5;
  cfg.corpus.max_symbols = 7;
  cfg.vq_train.steps = 60;
  cfg.vq_train.batch = 2;
  cfg.vq_train.eval_interval = 30;
  cfg.contrast.tau_anneal_steps = 30;
  cfg.s2s_train.pretrain_steps = 40;
  cfg.s2s_train.finetune_steps = 20;
  cfg.s2s_train.batch = 2;
  cfg.s2s_train.val_interval = 20;
  cfg.finalize();
  return cfg;
}

const fs::path kBase = fs::temp_directory_path() / "vqvc_pipeline_test";

struct MicroRun {
  RunConfig cfg;
  PipelinePaths paths;

  explicit MicroRun(const fs::path& dir) : cfg(micro_config(dir)), paths{dir} {}
};

}  // namespace

TEST_CASE("config file parsing: values, errors, hash stability") {
  const std::string text =
      "# comment\n"
      "[run]\n"
      "seed=7\n"
      "threads=2\n"
      "[quantizer]\n"
      "vocab=4\n"
      "groups=2\n"
      "dim=16\n"
      "[postprocess]\n"
      "combine=0\n"
      "separate=1\n"
      "[train]\n"
      "pretrain_steps=123\n";
  const RunConfig cfg = parse_config_text(text);
  CHECK(cfg.seed == 7);
  CHECK(cfg.threads == 2);
  CHECK(cfg.quant.vocab == 4);
  CHECK_FALSE(cfg.post.combine);
  CHECK(cfg.s2s_train.pretrain_steps == 123);
  CHECK(cfg.s2s.vocab == 4);       // propagated
  CHECK(cfg.s2s.separate_tables);  // from postprocess.separate

  CHECK_THROWS_AS(parse_config_text("[quantizer]\nbogus_key=1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[quantizer]\nvocab=abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("vocab\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[quantizer]\ndim=7\ngroups=2\n"), ConfigError);

  // canonical form and hash are stable across equivalent inputs
  const RunConfig again = parse_config_text(text);
  CHECK(cfg.canonical() == again.canonical());
  CHECK(cfg.config_hash() == again.config_hash());
  RunConfig other = parse_config_text(text);
  other.seed = 8;
  CHECK(other.config_hash() != cfg.config_hash());
}

TEST_CASE("variant flags reproduce the three ablation rows") {
  CHECK_FALSE(variant_flags(Variant::kNone).combine);
  CHECK_FALSE(variant_flags(Variant::kNone).separate);
  CHECK_FALSE(variant_flags(Variant::kSeparateOnly).combine);
  CHECK(variant_flags(Variant::kSeparateOnly).separate);
  CHECK(variant_flags(Variant::kCombineSeparate).combine);
  CHECK(variant_flags(Variant::kCombineSeparate).separate);
  CHECK(variant_from_name("separate") == Variant::kSeparateOnly);
  CHECK_THROWS_AS(variant_from_name("both"), ConfigError);
  // separate=false forces the joint-table front end
  RunConfig cfg = micro_config(kBase / "variant_probe").with_variant(Variant::kNone);
  CHECK_FALSE(cfg.s2s.separate_tables);
}

TEST_CASE("pipeline end-to-end mechanics at micro scale") {
  fs::remove_all(kBase);
  MicroRun run(kBase / "run_a");

  // gen-corpus: determinism and --force
  cmd_gen_corpus(run.cfg, false);
  CHECK_THROWS_AS(cmd_gen_corpus(run.cfg, false), DataError);
  cmd_gen_corpus(run.cfg, true);
  MicroRun run_b(kBase / "run_b");
  cmd_gen_corpus(run_b.cfg, false);
  CHECK(slurp(run.paths.manifest_file()) == slurp(run_b.paths.manifest_file()));

  // quantizer training produces a checkpoint and a curve
  cmd_pretrain_quantizer(run.cfg);
  CHECK(fs::exists(run.paths.quantizer_ckpt()));
  CHECK(fs::exists(run.paths.quantizer_curve()));
  const auto meta = read_checkpoint_meta(run.paths.quantizer_ckpt());
  CHECK(static_cast<int>(meta.at("vocab")) == run.cfg.quant.vocab);
  CHECK(checkpoint_config_hash(meta) == run.cfg.config_hash());

  // extraction writes dumps + stats; combined dumps re-expand consistently
  const std::vector<std::string> splits = {"tts_pretrain", "tts_pretrain_val", "target_train", "val"};
  const ExtractResult ex = cmd_extract(run.cfg, run.paths.quantizer_ckpt(), splits);
  CHECK(ex.failures.empty());
  CHECK(ex.files > 0);
  const Manifest manifest = load_manifest(run.paths.manifest_file());
  {
    Index combined_len = 0, original_len = 0;
    for (const ManifestEntry* e : manifest.split("val")) {
      const fs::path dump = run.paths.indices_dir(true) / "val" / (e->utt_id + ".idx");
      REQUIRE(fs::exists(dump));
      const IndexSeq seq = read_index_file(dump)[0].seq;
      CHECK(seq.combined == run.cfg.post.combine);
      combined_len += seq.frames();
      for (int r : seq.run_lengths) original_len += r;
    }
    CHECK(combined_len <= original_len);
  }

  // uncombined extraction matches encoder frame counts
  {
    RunConfig frames_cfg = run.cfg.with_variant(Variant::kNone);
    cmd_extract(frames_cfg, run.paths.quantizer_ckpt(), {"val"});
    for (const ManifestEntry* e : manifest.split("val")) {
      const IndexSeq seq =
          read_index_file(run.paths.indices_dir(false) / "val" / (e->utt_id + ".idx"))[0].seq;
      const Tensor feats = read_feat(manifest.dir / e->feat_path);
      CHECK(seq.frames() == feats.dim(0));
    }
  }

  // seq2seq pretrain + finetune; finetune requires an init checkpoint
  const fs::path pre_ckpt = run.paths.s2s_dir("t") / "pre.ckpt";
  const S2sTrainOutcome pre =
      cmd_train_seq2seq(run.cfg, "pretrain", "tts_pretrain", 0, std::nullopt, 40, pre_ckpt);
  CHECK(fs::exists(pre_ckpt));
  CHECK(pre.final_val_l1 > 0.0);
  CHECK_THROWS_AS(
      cmd_train_seq2seq(run.cfg, "finetune", "target_train", 3, std::nullopt, 10, pre_ckpt),
      ContractError);
  const fs::path ft_ckpt = run.paths.s2s_dir("t") / "ft.ckpt";
  const S2sTrainOutcome ft =
      cmd_train_seq2seq(run.cfg, "finetune", "target_train", 3, pre_ckpt, 20, ft_ckpt);

  // checkpoint round-trip: the re-run reproduces the validation loss and bytes
  {
    const S2sTrainOutcome again = cmd_train_seq2seq(run.cfg, "finetune", "target_train", 3, pre_ckpt,
                                                    20, run.paths.s2s_dir("t") / "ft_again.ckpt");
    CHECK(again.final_val_l1 == ft.final_val_l1);
    CHECK(slurp(ft_ckpt) == slurp(run.paths.s2s_dir("t") / "ft_again.ckpt"));
  }

  // vocab/meta mismatch between init checkpoint and config is rejected
  {
    RunConfig wrong = run.cfg;
    wrong.quant.vocab = 16;
    wrong.finalize();
    CHECK_THROWS_AS(cmd_train_seq2seq(wrong, "finetune", "target_train", 3, pre_ckpt, 5,
                                      run.paths.s2s_dir("t") / "bad.ckpt"),
                    Error);
  }

  // convert: refuses mismatched postprocessing flags, is deterministic,
  // accepts unseen source speakers (no enrollment parameter anywhere)
  {
    RunConfig mismatched = run.cfg.with_variant(Variant::kNone);
    CHECK_THROWS_AS(cmd_convert(mismatched, run.paths.quantizer_ckpt(), ft_ckpt, "val",
                                run.paths.converted_dir("bad")),
                    ConfigError);

    const ConvertOutcome c1 = cmd_convert(run.cfg, run.paths.quantizer_ckpt(), ft_ckpt, "val",
                                          run.paths.converted_dir("v1"));
    CHECK(c1.converted == 3);
    cmd_convert(run.cfg, run.paths.quantizer_ckpt(), ft_ckpt, "val", run.paths.converted_dir("v2"));
    const ManifestEntry* e = manifest.split("val")[0];
    CHECK(slurp(run.paths.converted_dir("v1") / (e->utt_id + ".feat")) ==
          slurp(run.paths.converted_dir("v2") / (e->utt_id + ".feat")));
    CHECK(fs::exists(run.paths.converted_dir("v1") / "convert_report.txt"));
  }

  // eval produces a parseable report with per-utterance and summary lines
  {
    const EvalSummary s =
        cmd_eval(run.cfg, run.paths.converted_dir("v1"), "val", run.paths.reports_dir() / "val.txt");
    CHECK(s.utterances == 3);
    CHECK(s.mean_mcd_conv > 0.0);
    const std::string report = slurp(run.paths.reports_dir() / "val.txt");
    CHECK(report.find("utt ") != std::string::npos);
    CHECK(report.find("summary utterances=3") != std::string::npos);
  }

  fs::remove_all(kBase);
}

TEST_CASE("extract continues past missing inputs and reports them") {
  const fs::path dir = kBase / "missing";
  fs::remove_all(dir);
  MicroRun run(dir);
  cmd_gen_corpus(run.cfg, false);
  cmd_pretrain_quantizer(run.cfg);
  const Manifest manifest = load_manifest(run.paths.manifest_file());
  const ManifestEntry* victim = manifest.split("val")[1];
  fs::remove(manifest.dir / victim->signal_path);
  const ExtractResult ex = cmd_extract(run.cfg, run.paths.quantizer_ckpt(), {"val"});
  CHECK(ex.failures == std::vector<std::string>{victim->utt_id});
  CHECK(ex.files == 2);  // the others were still written
  CHECK(fs::exists(run.paths.indices_dir(true) / "val" / (manifest.split("val")[0]->utt_id + ".idx")));
  fs::remove_all(dir);
}

TEST_CASE("run-grid covers all cells, reloads, and re-renders") {
  const fs::path dir = kBase / "grid";
  fs::remove_all(dir);
  MicroRun run(dir);
  cmd_gen_corpus(run.cfg, false);
  CHECK_THROWS_AS(cmd_run_grid(run.cfg), DataError);  // no quantizer checkpoint yet
  cmd_pretrain_quantizer(run.cfg);

  const GridReport report = cmd_run_grid(run.cfg);
  CHECK(report.cells.size() == 6);  // 3 variants x 2 sizes
  CHECK(report.config_hash == run.cfg.config_hash());
  int ok_cells = 0;
  for (const GridCell& cell : report.cells) {
    if (!cell.failed) {
      ++ok_cells;
      CHECK(cell.summary.utterances == 3);
    }
  }
  CHECK(ok_cells == 6);

  const GridReport reloaded = cmd_run_grid(run.cfg, /*render_only=*/true);
  REQUIRE(reloaded.cells.size() == report.cells.size());
  for (size_t i = 0; i < report.cells.size(); ++i) {
    CHECK(reloaded.cells[i].variant == report.cells[i].variant);
    CHECK(reloaded.cells[i].target_size == report.cells[i].target_size);
    CHECK(reloaded.cells[i].summary.mean_mcd_conv ==
          doctest::Approx(report.cells[i].summary.mean_mcd_conv));
  }
  CHECK(render_grid_table(report) == render_grid_table(reloaded));
  fs::remove_all(dir);
}

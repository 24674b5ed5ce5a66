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

#ifndef VQVC_PIPELINE_H_
#define VQVC_PIPELINE_H_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vqvc/metrics.h"
#include "vqvc/seq2seq.h"
#include "vqvc/synth.h"
#include "vqvc/vq_encoder.h"

namespace vqvc {

// Experiment orchestration: quantizer pretraining, index extraction and
// postprocessing, TTS-pretrain -> target finetune, conversion, and the
// postprocessing-by-data-size ablation grid.

struct PostprocessFlags {
  bool combine = true;
  bool separate = true;
};

enum class Variant { kNone, kSeparateOnly, kCombineSeparate };
inline constexpr Variant kAllVariants[] = {Variant::kNone, Variant::kSeparateOnly,
                                           Variant::kCombineSeparate};
const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);
PostprocessFlags variant_flags(Variant v);

struct S2sTrainConfig {
  int pretrain_steps = 5000;
  int finetune_steps = 2000;
  int batch = 4;
  float lr = 1e-3f;
  int val_interval = 200;
};

struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  std::filesystem::path out_dir;

  CorpusSpec corpus;
  EncoderConfig encoder;
  QuantizerConfig quant;
  AggregatorConfig agg;
  ContrastiveConfig contrast;
  VqTrainConfig vq_train;
  PostprocessFlags post;
  Seq2SeqConfig s2s;
  S2sTrainConfig s2s_train;

  // Canonical key=value dump; its FNV-1a hash stamps checkpoints and
  // reports for provenance.
  std::string canonical() const;
  std::uint64_t config_hash() const;

  // Propagates coupled fields (quantizer dims into the seq2seq front-end,
  // postprocess flags into the table mode) and validates.
  void finalize();

  RunConfig with_variant(Variant v) const;
};

RunConfig default_config();
// Line-based key=value file with [section] headers and '#' comments.
// Unknown sections or keys are errors. Missing keys keep defaults.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text);

// ---- derived layout under the run's output directory -----------------------
struct PipelinePaths {
  std::filesystem::path out;

  std::filesystem::path corpus_dir() const { return out / "corpus"; }
  std::filesystem::path manifest_file() const { return corpus_dir() / "manifest.tsv"; }
  std::filesystem::path quantizer_dir() const { return out / "quantizer"; }
  std::filesystem::path quantizer_ckpt() const { return quantizer_dir() / "quantizer.ckpt"; }
  std::filesystem::path quantizer_curve() const { return quantizer_dir() / "curve.tsv"; }
  std::filesystem::path indices_dir(bool combined) const {
    return out / (combined ? "indices_combined" : "indices_frames");
  }
  std::filesystem::path s2s_dir(const std::string& tag) const { return out / "s2s" / tag; }
  std::filesystem::path converted_dir(const std::string& tag) const { return out / "converted" / tag; }
  std::filesystem::path reports_dir() const { return out / "reports"; }
  std::filesystem::path grid_report() const { return reports_dir() / "grid_report.txt"; }
};

// ---- commands ---------------------------------------------------------------

Manifest cmd_gen_corpus(const RunConfig& cfg, bool force);

// Trains the quantizer on the corpus' quantizer split; writes checkpoint and
// loss/perplexity curve. On divergence the partial checkpoint is kept with a
// ".failed" suffix and NumericError is rethrown.
void cmd_pretrain_quantizer(const RunConfig& cfg);

struct ExtractResult {
  int files = 0;
  std::vector<std::string> failures;  // utt ids that could not be processed
  VocabStats stats;
};
// Extracts eval-mode indices for every utterance of the given splits,
// applying the configured combine flag; writes one dump per utterance plus a
// per-split stats file. Missing inputs are per-file errors: extraction
// continues and failures are reported.
ExtractResult cmd_extract(const RunConfig& cfg, const std::filesystem::path& quantizer_ckpt,
                          const std::vector<std::string>& splits);

struct S2sTrainOutcome {
  std::filesystem::path ckpt;
  double final_val_l1 = 0.0;
  std::vector<std::pair<int, double>> val_curve;  // (step, val L1)
  std::vector<double> step_loss;
};
// phase "pretrain" trains from scratch; "finetune" requires init_ckpt, loads
// every weight, and re-initializes nothing. train_split selects data
// ("tts_pretrain" or "target_train" with target_size > 0). Validation pairs
// are the pretrain speaker's held-out utterances for TTS pretraining and
// unseen-source/oracle-target pairs for target training.
S2sTrainOutcome cmd_train_seq2seq(const RunConfig& cfg, const std::string& phase,
                                  const std::string& train_split, int target_size,
                                  const std::optional<std::filesystem::path>& init_ckpt, int steps,
                                  const std::filesystem::path& out_ckpt);

struct ConvertOutcome {
  int converted = 0;
  int truncated = 0;
};
// Any-to-one conversion of every utterance in a split: extract indices,
// postprocess, decode, write VQVCFEAT outputs plus index dumps and a
// truncation report. Refuses a seq2seq checkpoint whose postprocessing
// flags disagree with the config.
ConvertOutcome cmd_convert(const RunConfig& cfg, const std::filesystem::path& quantizer_ckpt,
                           const std::filesystem::path& s2s_ckpt, const std::string& split,
                           const std::filesystem::path& dest);

struct EvalSummary {
  int utterances = 0;
  double mean_mcd_conv = 0.0;
  double mean_mcd_copy = 0.0;
  double mean_ser = 0.0;
  double success_rate = 0.0;  // fraction with mcd_conv < mcd_copy
  std::vector<double> group_perplexity;
  std::int64_t unique_combinations = 0;
};
// Scores converted outputs against the synthetic oracle; writes
// line-delimited per-utterance records and a summary to report_path.
EvalSummary cmd_eval(const RunConfig& cfg, const std::filesystem::path& converted_dir,
                     const std::string& split, const std::filesystem::path& report_path);

struct GridCell {
  Variant variant = Variant::kNone;
  int target_size = 0;
  bool failed = false;
  double final_val_l1 = 0.0;
  EvalSummary summary;
};
struct GridReport {
  std::uint64_t config_hash = 0;
  std::vector<GridCell> cells;
};
// Trains every postprocess-variant x target-size cell from the same corpus
// and quantizer checkpoint (one TTS-pretrain per variant), converts and
// scores the validation split, and writes a reloadable report. A failing
// cell is marked and the grid continues.
GridReport cmd_run_grid(const RunConfig& cfg, bool render_only = false);

void write_grid_report(const std::filesystem::path& path, const GridReport& report);
GridReport read_grid_report(const std::filesystem::path& path);
std::string render_grid_table(const GridReport& report);

// Config hash stamped into a checkpoint's meta map (4x u16 chunks).
std::uint64_t checkpoint_config_hash(const std::map<std::string, float>& meta);

}  // namespace vqvc

#endif  // VQVC_PIPELINE_H_

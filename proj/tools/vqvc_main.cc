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

#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "vqvc/pipeline.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct GlobalArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  bool force = false;
};

vqvc::RunConfig resolve_config(const GlobalArgs& args) {
  vqvc::RunConfig cfg = args.config_path.empty() ? vqvc::default_config()
                                                 : vqvc::load_config(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  if (args.out) cfg.out_dir = *args.out;
  if (args.threads) cfg.threads = *args.threads;
  if (cfg.out_dir.empty()) throw vqvc::ConfigError("no output directory (use --out or run.out)");
  cfg.finalize();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Any-to-one voice conversion on discretized self-supervised representations"};
  app.require_subcommand(1);

  GlobalArgs global;
  app.add_option("--config", global.config_path, "line-based key=value config file");
  app.add_option("--seed", global.seed, "random seed (overrides config)");
  app.add_option("--out", global.out, "run output directory (overrides config)");
  app.add_option("--threads", global.threads, "worker threads for per-utterance fan-out");
  app.add_flag("--force", global.force, "overwrite existing outputs where applicable");

  CLI::App* gen = app.add_subcommand("gen-corpus", "render the synthetic multi-speaker corpus");

  CLI::App* preq = app.add_subcommand("pretrain-quantizer", "train the vq encoder on the quantizer split");

  CLI::App* extract = app.add_subcommand("extract", "dump postprocessed indices for manifest splits");
  std::string extract_ckpt;
  std::vector<std::string> extract_splits;
  extract->add_option("--ckpt", extract_ckpt, "quantizer checkpoint")->required();
  extract->add_option("--split", extract_splits, "manifest split (repeatable)")->required();

  CLI::App* train = app.add_subcommand("train-seq2seq", "train the index-to-acoustic converter");
  std::string phase = "pretrain";
  std::string train_split;
  int target_size = 0;
  std::string init_ckpt;
  int steps_override = 0;
  std::string ckpt_out;
  train->add_option("--phase", phase, "pretrain|finetune")->check(CLI::IsMember({"pretrain", "finetune"}));
  train->add_option("--train-split", train_split, "tts_pretrain or target_train (default per phase)");
  train->add_option("--size", target_size, "target_train subset size");
  train->add_option("--init", init_ckpt, "checkpoint to finetune from");
  train->add_option("--steps", steps_override, "step budget override");
  train->add_option("--ckpt-out", ckpt_out, "output checkpoint path");

  CLI::App* convert = app.add_subcommand("convert", "convert a split's utterances to the target speaker");
  std::string conv_quant, conv_s2s, conv_split = "test", conv_dest;
  convert->add_option("--quantizer", conv_quant, "quantizer checkpoint")->required();
  convert->add_option("--seq2seq", conv_s2s, "seq2seq checkpoint")->required();
  convert->add_option("--split", conv_split, "manifest split to convert");
  convert->add_option("--dest", conv_dest, "output directory for converted features");

  CLI::App* eval = app.add_subcommand("eval", "score converted features against the oracle");
  std::string eval_dir, eval_split = "test", eval_report;
  eval->add_option("--converted", eval_dir, "directory of converted .feat files")->required();
  eval->add_option("--split", eval_split, "manifest split the conversions came from");
  eval->add_option("--report", eval_report, "report output path");

  CLI::App* grid = app.add_subcommand("run-grid", "postprocess-variant x target-size ablation grid");
  bool render_only = false;
  grid->add_flag("--render-only", render_only, "re-render a saved grid report without retraining");

  CLI11_PARSE(app, argc, argv);

  try {
    const vqvc::RunConfig cfg = resolve_config(global);
    const vqvc::PipelinePaths paths{cfg.out_dir};

    if (gen->parsed()) {
      const vqvc::Manifest manifest = vqvc::cmd_gen_corpus(cfg, global.force);
      std::cout << "corpus: " << manifest.entries.size() << " utterances under "
                << paths.corpus_dir().string() << "\n";
    } else if (preq->parsed()) {
      vqvc::cmd_pretrain_quantizer(cfg);
      std::cout << "quantizer checkpoint: " << paths.quantizer_ckpt().string() << "\n";
    } else if (extract->parsed()) {
      const vqvc::ExtractResult res = vqvc::cmd_extract(cfg, extract_ckpt, extract_splits);
      std::cout << "extracted " << res.files << " dumps";
      if (!res.failures.empty()) std::cout << ", " << res.failures.size() << " failures";
      std::cout << "\n";
      if (!res.failures.empty()) return kExitData;
    } else if (train->parsed()) {
      if (train_split.empty()) train_split = phase == "pretrain" ? "tts_pretrain" : "target_train";
      if (train_split == "target_train" && target_size == 0) {
        target_size = cfg.corpus.target_train_utts();
      }
      const int steps = steps_override > 0 ? steps_override
                        : phase == "pretrain" ? cfg.s2s_train.pretrain_steps
                                              : cfg.s2s_train.finetune_steps;
      std::filesystem::path out_ckpt = ckpt_out.empty()
                                           ? paths.s2s_dir("manual") / (phase + ".ckpt")
                                           : std::filesystem::path(ckpt_out);
      std::optional<std::filesystem::path> init;
      if (!init_ckpt.empty()) init = init_ckpt;
      const vqvc::S2sTrainOutcome out =
          vqvc::cmd_train_seq2seq(cfg, phase, train_split, target_size, init, steps, out_ckpt);
      std::cout << "checkpoint: " << out.ckpt.string() << "  final val L1 "
                << out.final_val_l1 << "\n";
    } else if (convert->parsed()) {
      const std::filesystem::path dest =
          conv_dest.empty() ? paths.converted_dir("manual") : std::filesystem::path(conv_dest);
      const vqvc::ConvertOutcome out = vqvc::cmd_convert(cfg, conv_quant, conv_s2s, conv_split, dest);
      std::cout << "converted " << out.converted << " utterances (" << out.truncated
                << " truncated) into " << dest.string() << "\n";
    } else if (eval->parsed()) {
      const std::filesystem::path report = eval_report.empty()
                                               ? paths.reports_dir() / ("eval_" + eval_split + ".txt")
                                               : std::filesystem::path(eval_report);
      const vqvc::EvalSummary s = vqvc::cmd_eval(cfg, eval_dir, eval_split, report);
      std::cout << "utterances=" << s.utterances << " mean_mcd_conv=" << s.mean_mcd_conv
                << " mean_mcd_copy=" << s.mean_mcd_copy << " mean_ser=" << s.mean_ser
                << " success_rate=" << s.success_rate << "\n";
    } else if (grid->parsed()) {
      vqvc::cmd_run_grid(cfg, render_only);
    }
    return kExitOk;
  } catch (const vqvc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const vqvc::ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const vqvc::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const vqvc::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}

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

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "vqvc/pipeline.h"

namespace vqvc {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kNone: return "none";
    case Variant::kSeparateOnly: return "separate";
    case Variant::kCombineSeparate: return "combine_separate";
  }
  return "?";
}

Variant variant_from_name(const std::string& name) {
  for (Variant v : kAllVariants) {
    if (name == variant_name(v)) return v;
  }
  throw ConfigError("unknown postprocess variant: " + name);
}

PostprocessFlags variant_flags(Variant v) {
  switch (v) {
    case Variant::kNone: return {.combine = false, .separate = false};
    case Variant::kSeparateOnly: return {.combine = false, .separate = true};
    case Variant::kCombineSeparate: return {.combine = true, .separate = true};
  }
  return {};
}

RunConfig default_config() {
  RunConfig cfg;
  cfg.finalize();
  return cfg;
}

void RunConfig::finalize() {
  s2s.groups = quant.groups;
  s2s.vocab = quant.vocab;
  s2s.separate_tables = post.separate;
  s2s.acoustic_dim = corpus.render.feat_dim;
  if (contrast.tau_anneal_steps <= 0) contrast.tau_anneal_steps = vq_train.steps / 2;
  vq_train.seed = seed;
  if (quant.dim != encoder.layers.back().channels) {
    // keep the encoder output width in lockstep with the latent dim
    for (ConvLayerSpec& l : encoder.layers) l.channels = quant.dim;
  }
  VQVC_CHECK(threads >= 1, "threads must be >= 1");
  s2s.validate();
  quant.group_dim();
}

RunConfig RunConfig::with_variant(Variant v) const {
  RunConfig cfg = *this;
  cfg.post = variant_flags(v);
  cfg.finalize();
  return cfg;
}

std::string RunConfig::canonical() const {
  std::ostringstream os;
  os << "[run]\n";
  os << "seed=" << seed << "\n";
  os << "threads=" << threads << "\n";
  os << "[corpus]\n";
  os << "n_quantizer_speakers=" << corpus.n_quantizer_speakers << "\n";
  os << "n_utts_each=" << corpus.n_utts_each << "\n";
  os << "pretrain_speaker=" << corpus.pretrain_speaker << "\n";
  os << "pretrain_utts=" << corpus.pretrain_utts << "\n";
  os << "pretrain_val_utts=" << corpus.pretrain_val_utts << "\n";
  os << "target_speaker=" << corpus.target_speaker << "\n";
  os << "target_sizes=";
  for (size_t i = 0; i < corpus.target_sizes.size(); ++i) os << (i ? "," : "") << corpus.target_sizes[i];
  os << "\n";
  os << "source_speakers=";
  for (size_t i = 0; i < corpus.source_speakers.size(); ++i) os << (i ? "," : "") << corpus.source_speakers[i];
  os << "\n";
  os << "val_utts=" << corpus.val_utts << "\n";
  os << "test_utts=" << corpus.test_utts << "\n";
  os << "min_symbols=" << corpus.min_symbols << "\n";
  os << "max_symbols=" << corpus.max_symbols << "\n";
  os << "[quantizer]\n";
  os << "dim=" << quant.dim << "\n";
  os << "groups=" << quant.groups << "\n";
  os << "vocab=" << quant.vocab << "\n";
  os << "k_steps=" << contrast.steps << "\n";
  os << "n_negatives=" << contrast.n_negatives << "\n";
  os << "lambda_weight=" << contrast.lambda_weight << "\n";
  os << "tau_start=" << contrast.tau_start << "\n";
  os << "tau_end=" << contrast.tau_end << "\n";
  os << "steps=" << vq_train.steps << "\n";
  os << "batch=" << vq_train.batch << "\n";
  os << "crop_frames=" << vq_train.crop_frames << "\n";
  os << "eval_interval=" << vq_train.eval_interval << "\n";
  os << "lr=" << vq_train.adam.lr << "\n";
  os << "[postprocess]\n";
  os << "combine=" << (post.combine ? 1 : 0) << "\n";
  os << "separate=" << (post.separate ? 1 : 0) << "\n";
  os << "[seq2seq]\n";
  os << "embed_dim=" << s2s.embed_dim << "\n";
  os << "project_after_concat=" << (s2s.project_after_concat ? 1 : 0) << "\n";
  os << "model_dim=" << s2s.model_dim << "\n";
  os << "prenet_dim=" << s2s.prenet_dim << "\n";
  os << "heads=" << s2s.heads << "\n";
  os << "enc_layers=" << s2s.enc_layers << "\n";
  os << "dec_layers=" << s2s.dec_layers << "\n";
  os << "ffn_dim=" << s2s.ffn_dim << "\n";
  os << "stop_pos_weight=" << s2s.stop_pos_weight << "\n";
  os << "stop_threshold=" << s2s.stop_threshold << "\n";
  os << "max_len_factor=" << s2s.max_len_factor << "\n";
  os << "teacher_noise_std=" << s2s.teacher_noise_std << "\n";
  os << "teacher_frame_dropout=" << s2s.teacher_frame_dropout << "\n";
  os << "scheduled_sampling_prob=" << s2s.scheduled_sampling_prob << "\n";
  os << "att_window_back=" << s2s.att_window_back << "\n";
  os << "att_window_forward=" << s2s.att_window_forward << "\n";
  os << "[train]\n";
  os << "pretrain_steps=" << s2s_train.pretrain_steps << "\n";
  os << "finetune_steps=" << s2s_train.finetune_steps << "\n";
  os << "batch=" << s2s_train.batch << "\n";
  os << "lr=" << s2s_train.lr << "\n";
  os << "val_interval=" << s2s_train.val_interval << "\n";
  return os.str();
}

std::uint64_t RunConfig::config_hash() const {
  const std::string c = canonical();
  return fnv1a64(c.data(), c.size());
}

namespace {

std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
  std::vector<int> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError("bad integer list for " + key + ": " + s);
    }
  }
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

int parse_int(const std::string& s, const std::string& key) {
  try {
    size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad integer for " + key + ": " + s);
  }
}

float parse_float(const std::string& s, const std::string& key) {
  try {
    size_t pos = 0;
    const float v = std::stof(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": " + s);
  }
}

bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw ConfigError("bad boolean for " + key + ": " + s + " (use 0/1)");
}

std::uint64_t parse_u64(const std::string& s, const std::string& key) {
  try {
    size_t pos = 0;
    const std::uint64_t v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad unsigned integer for " + key + ": " + s);
  }
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    // strip comments and whitespace
    if (const size_t hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    size_t b = line.find_last_not_of(" \t\r");
    line = line.substr(a, b - a + 1);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": bad section header");
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value, got: " + line);
    }
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    const std::string sk = section + "." + key;

    if (sk == "run.seed") cfg.seed = parse_u64(val, sk);
    else if (sk == "run.threads") cfg.threads = parse_int(val, sk);
    else if (sk == "run.out") cfg.out_dir = val;
    else if (sk == "corpus.n_quantizer_speakers") cfg.corpus.n_quantizer_speakers = parse_int(val, sk);
    else if (sk == "corpus.n_utts_each") cfg.corpus.n_utts_each = parse_int(val, sk);
    else if (sk == "corpus.pretrain_speaker") cfg.corpus.pretrain_speaker = parse_int(val, sk);
    else if (sk == "corpus.pretrain_utts") cfg.corpus.pretrain_utts = parse_int(val, sk);
    else if (sk == "corpus.pretrain_val_utts") cfg.corpus.pretrain_val_utts = parse_int(val, sk);
    else if (sk == "corpus.target_speaker") cfg.corpus.target_speaker = parse_int(val, sk);
    else if (sk == "corpus.target_sizes") cfg.corpus.target_sizes = parse_int_list(val, sk);
    else if (sk == "corpus.source_speakers") cfg.corpus.source_speakers = parse_int_list(val, sk);
    else if (sk == "corpus.val_utts") cfg.corpus.val_utts = parse_int(val, sk);
    else if (sk == "corpus.test_utts") cfg.corpus.test_utts = parse_int(val, sk);
    else if (sk == "corpus.min_symbols") cfg.corpus.min_symbols = parse_int(val, sk);
    else if (sk == "corpus.max_symbols") cfg.corpus.max_symbols = parse_int(val, sk);
    else if (sk == "quantizer.dim") cfg.quant.dim = parse_int(val, sk);
    else if (sk == "quantizer.groups") cfg.quant.groups = parse_int(val, sk);
    else if (sk == "quantizer.vocab") cfg.quant.vocab = parse_int(val, sk);
    else if (sk == "quantizer.k_steps") cfg.contrast.steps = parse_int(val, sk);
    else if (sk == "quantizer.n_negatives") cfg.contrast.n_negatives = parse_int(val, sk);
    else if (sk == "quantizer.lambda_weight") cfg.contrast.lambda_weight = parse_float(val, sk);
    else if (sk == "quantizer.tau_start") cfg.contrast.tau_start = parse_float(val, sk);
    else if (sk == "quantizer.tau_end") cfg.contrast.tau_end = parse_float(val, sk);
    else if (sk == "quantizer.steps") cfg.vq_train.steps = parse_int(val, sk);
    else if (sk == "quantizer.batch") cfg.vq_train.batch = parse_int(val, sk);
    else if (sk == "quantizer.crop_frames") cfg.vq_train.crop_frames = parse_int(val, sk);
    else if (sk == "quantizer.eval_interval") cfg.vq_train.eval_interval = parse_int(val, sk);
    else if (sk == "quantizer.lr") cfg.vq_train.adam.lr = parse_float(val, sk);
    else if (sk == "postprocess.combine") cfg.post.combine = parse_bool(val, sk);
    else if (sk == "postprocess.separate") cfg.post.separate = parse_bool(val, sk);
    else if (sk == "seq2seq.embed_dim") cfg.s2s.embed_dim = parse_int(val, sk);
    else if (sk == "seq2seq.project_after_concat") cfg.s2s.project_after_concat = parse_bool(val, sk);
    else if (sk == "seq2seq.model_dim") cfg.s2s.model_dim = parse_int(val, sk);
    else if (sk == "seq2seq.prenet_dim") cfg.s2s.prenet_dim = parse_int(val, sk);
    else if (sk == "seq2seq.heads") cfg.s2s.heads = parse_int(val, sk);
    else if (sk == "seq2seq.enc_layers") cfg.s2s.enc_layers = parse_int(val, sk);
    else if (sk == "seq2seq.dec_layers") cfg.s2s.dec_layers = parse_int(val, sk);
    else if (sk == "seq2seq.ffn_dim") cfg.s2s.ffn_dim = parse_int(val, sk);
    else if (sk == "seq2seq.stop_pos_weight") cfg.s2s.stop_pos_weight = parse_float(val, sk);
    else if (sk == "seq2seq.stop_threshold") cfg.s2s.stop_threshold = parse_float(val, sk);
    else if (sk == "seq2seq.max_len_factor") cfg.s2s.max_len_factor = parse_int(val, sk);
    else if (sk == "seq2seq.teacher_noise_std") cfg.s2s.teacher_noise_std = parse_float(val, sk);
    else if (sk == "seq2seq.teacher_frame_dropout") cfg.s2s.teacher_frame_dropout = parse_float(val, sk);
    else if (sk == "seq2seq.scheduled_sampling_prob") cfg.s2s.scheduled_sampling_prob = parse_float(val, sk);
    else if (sk == "seq2seq.att_window_back") cfg.s2s.att_window_back = parse_int(val, sk);
    else if (sk == "seq2seq.att_window_forward") cfg.s2s.att_window_forward = parse_int(val, sk);
    else if (sk == "train.pretrain_steps") cfg.s2s_train.pretrain_steps = parse_int(val, sk);
    else if (sk == "train.finetune_steps") cfg.s2s_train.finetune_steps = parse_int(val, sk);
    else if (sk == "train.batch") cfg.s2s_train.batch = parse_int(val, sk);
    else if (sk == "train.lr") cfg.s2s_train.lr = parse_float(val, sk);
    else if (sk == "train.val_interval") cfg.s2s_train.val_interval = parse_int(val, sk);
    else throw ConfigError("line " + std::to_string(lineno) + ": unknown config key " + sk);
  }
  try {
    cfg.finalize();
  } catch (const ContractError& e) {
    throw ConfigError(std::string("inconsistent configuration: ") + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace vqvc

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

#ifndef VQVC_SYNTH_H_
#define VQVC_SYNTH_H_

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vqvc/rng.h"
#include "vqvc/tensor.h"

namespace vqvc {

// Deterministic multi-speaker "speech": each symbol of a 12-letter alphabet
// emits a windowed sum of sinusoids whose partial frequencies depend on the
// symbol and the speaker, for a duration set by the symbol and stretched by
// the speaker. Ground-truth symbol strings make conversion scorable without
// listeners.

inline constexpr int kAlphabetSize = 12;

struct RenderConfig {
  int window = 30;  // analysis window, samples
  int hop = 10;     // frame hop, samples
  int feat_dim = 16;
  int harmonics = 3;
  float noise_std = 0.01f;
  int duration_jitter = 1;  // +- frames per symbol emission
};

struct SpeakerProfile {
  int id = 0;
  float base_freq = 0.15f;  // cycles per frame; sets the partial spacing
  float amp = 1.0f;
  float dur_mult = 1.0f;               // per-symbol duration multiplier
  std::vector<float> timbre;           // harmonic weights
};

// Deterministic profile for a speaker id under a corpus seed.
SpeakerProfile make_speaker_profile(int id, std::uint64_t corpus_seed);

// Symbol-intrinsic generation tables.
float symbol_frequency(int symbol);   // cycles per sample
int symbol_base_duration(int symbol); // frames, in [3, 8]

struct SynthUtterance {
  std::string utt_id;
  int speaker = 0;
  std::vector<int> symbols;
  std::vector<float> signal;
  Tensor features;                 // [frames × feat_dim]
  std::vector<int> frame_symbols;  // oracle symbol label per feature frame
};

SynthUtterance render(const SpeakerProfile& speaker, std::span<const int> symbols, Rng& rng,
                      const RenderConfig& cfg = {});

// Log triangular-filterbank energies over short-time magnitude spectra;
// window 30, hop 10, floored at 1e-8 before the log.
Tensor extract_features(std::span<const float> signal, const RenderConfig& cfg = {});
Index feature_frame_count(Index signal_len, const RenderConfig& cfg = {});

// ---- corpus ----------------------------------------------------------------

struct CorpusSpec {
  int n_quantizer_speakers = 4;
  int n_utts_each = 50;        // per quantizer speaker
  int pretrain_speaker = 200;
  int pretrain_utts = 200;
  int pretrain_val_utts = 20;
  int target_speaker = 300;
  std::vector<int> target_sizes = {200, 20};  // nested subsets of target_train
  std::vector<int> source_speakers = {400, 401};
  int val_utts = 50;
  int test_utts = 50;
  int min_symbols = 5;
  int max_symbols = 20;
  RenderConfig render;

  int target_train_utts() const;
};

struct ManifestEntry {
  std::string utt_id;
  int speaker = 0;
  std::string split;
  std::vector<int> symbols;
  std::string signal_path;  // relative to the manifest directory
  std::string feat_path;
};

struct Manifest {
  std::filesystem::path dir;
  std::uint64_t seed = 0;
  CorpusSpec spec;
  std::vector<ManifestEntry> entries;

  std::vector<const ManifestEntry*> split(const std::string& name) const;
  // First n utterances of target_train; target_sizes are nested by
  // construction.
  std::vector<const ManifestEntry*> target_subset(int n) const;
  const ManifestEntry& find(const std::string& utt_id) const;
};

// Renders every utterance, writes signals and features under out_dir, and
// writes manifest.tsv plus corpus.meta. Deterministic and idempotent per
// seed. Refuses an existing corpus unless force is set.
Manifest generate_corpus(const CorpusSpec& spec, std::uint64_t seed,
                         const std::filesystem::path& out_dir, bool force = false);

Manifest load_manifest(const std::filesystem::path& manifest_file);

// Re-renders an utterance bit-identically (same substream), recovering the
// oracle frame labels that are not stored on disk.
SynthUtterance re_render(const Manifest& manifest, const ManifestEntry& entry);

// Ground-truth conversion reference: the target speaker rendering the
// source utterance's symbol string.
SynthUtterance render_oracle(const Manifest& manifest, const ManifestEntry& source_entry,
                             int target_speaker);

std::string symbols_to_string(std::span<const int> symbols);
std::vector<int> string_to_symbols(const std::string& s);

}  // namespace vqvc

#endif  // VQVC_SYNTH_H_

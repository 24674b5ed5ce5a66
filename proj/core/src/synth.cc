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

#include "vqvc/synth.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "vqvc/feat_io.h"

namespace vqvc {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr float kLogFloor = 1e-8f;
constexpr int kFftSize = 64;

std::uint64_t utt_stream(std::uint64_t corpus_seed, const std::string& utt_id) {
  return hash_combine(corpus_seed, fnv1a64(utt_id.data(), utt_id.size()));
}

}  // namespace

SpeakerProfile make_speaker_profile(int id, std::uint64_t corpus_seed) {
  Rng rng(hash_combine(corpus_seed, 0x5057454145524b53ull + static_cast<std::uint64_t>(id)));
  SpeakerProfile p;
  p.id = id;
  // overtone spacing 0.050..0.062 cycles/sample: roughly one filter
  // bandwidth, so partials land in separate bands and in-band beats stay
  // faster than the 30-sample analysis window
  p.base_freq = static_cast<float>(rng.uniform(0.50, 0.62));
  p.amp = static_cast<float>(rng.uniform(0.6, 1.4));
  p.dur_mult = static_cast<float>(rng.uniform(0.8, 1.3));
  // harmonic weights plus a spectral tilt; the tilt shapes both the partials
  // and the broadband comb, so speakers differ across every filter band
  p.timbre = {static_cast<float>(rng.uniform(0.6, 1.0)), static_cast<float>(rng.uniform(0.15, 0.6)),
              static_cast<float>(rng.uniform(0.05, 0.4)), static_cast<float>(rng.uniform(-1.2, 1.2))};
  return p;
}

float symbol_frequency(int symbol) {
  VQVC_CHECK(symbol >= 0 && symbol < kAlphabetSize, "invalid symbol " << symbol);
  return 0.05f + 0.028f * static_cast<float>(symbol);
}

int symbol_base_duration(int symbol) {
  VQVC_CHECK(symbol >= 0 && symbol < kAlphabetSize, "invalid symbol " << symbol);
  return 3 + (symbol * 5 + 2) % 6;
}

SynthUtterance render(const SpeakerProfile& speaker, std::span<const int> symbols, Rng& rng,
                      const RenderConfig& cfg) {
  VQVC_CHECK(!symbols.empty(), "render needs a nonempty symbol string");
  VQVC_CHECK(static_cast<int>(speaker.timbre.size()) >= cfg.harmonics,
             "speaker timbre shorter than harmonic count");
  SynthUtterance utt;
  utt.speaker = speaker.id;
  utt.symbols.assign(symbols.begin(), symbols.end());

  // Durations first, so the total length is known before synthesis.
  std::vector<int> durations(symbols.size());
  Index total_frames = 0;
  for (size_t i = 0; i < symbols.size(); ++i) {
    const int s = symbols[i];
    VQVC_CHECK(s >= 0 && s < kAlphabetSize, "invalid symbol " << s);
    int frames = static_cast<int>(
        std::lround(static_cast<double>(symbol_base_duration(s)) * speaker.dur_mult));
    if (cfg.duration_jitter > 0) {
      frames += static_cast<int>(rng.uniform_int(2 * cfg.duration_jitter + 1)) - cfg.duration_jitter;
    }
    frames = std::max(1, frames);
    durations[i] = frames;
    total_frames += frames;
  }

  const Index pad = cfg.window - cfg.hop;
  const Index signal_len = total_frames * cfg.hop + pad;
  utt.signal.assign(static_cast<size_t>(signal_len), 0.0f);
  utt.frame_symbols.reserve(static_cast<size_t>(total_frames));

  const float sample_base = speaker.base_freq / static_cast<float>(cfg.hop);
  const double tilt = speaker.timbre.size() > static_cast<size_t>(cfg.harmonics)
                          ? speaker.timbre[static_cast<size_t>(cfg.harmonics)]
                          : 0.0;
  auto tilt_gain = [&](double freq) { return std::exp(tilt * (freq - 0.25) * 3.0); };

  Index frame0 = 0;
  for (size_t i = 0; i < symbols.size(); ++i) {
    const int s = symbols[i];
    const Index seg_start = frame0 * cfg.hop;
    const Index seg_len = static_cast<Index>(durations[i]) * cfg.hop + pad;
    const Index seg_end = std::min<Index>(seg_start + seg_len, signal_len);
    const Index fade = std::min<Index>(cfg.hop / 2, (seg_end - seg_start) / 4);
    auto add_partial = [&](double freq, double a, double phase) {
      for (Index t = seg_start; t < seg_end; ++t) {
        double env = 1.0;
        if (fade > 0) {
          if (t - seg_start < fade) env = 0.5 - 0.5 * std::cos(kTwoPi / 2.0 * static_cast<double>(t - seg_start + 1) / static_cast<double>(fade + 1));
          else if (seg_end - t <= fade) env = 0.5 - 0.5 * std::cos(kTwoPi / 2.0 * static_cast<double>(seg_end - t) / static_cast<double>(fade + 1));
        }
        utt.signal[static_cast<size_t>(t)] +=
            static_cast<float>(a * env * std::sin(kTwoPi * freq * static_cast<double>(t) + phase));
      }
    };
    for (int h = 0; h < cfg.harmonics; ++h) {
      // partial 0 sits exactly on the symbol frequency; the speaker's base
      // frequency only sets the overtone spacing
      const double freq = static_cast<double>(symbol_frequency(s)) +
                          static_cast<double>(h) * static_cast<double>(sample_base);
      const double a = static_cast<double>(speaker.amp) *
                       static_cast<double>(speaker.timbre[static_cast<size_t>(h)]) * tilt_gain(freq);
      add_partial(freq, a, rng.uniform(0.0, kTwoPi));
    }
    for (int f = 0; f < durations[i]; ++f) utt.frame_symbols.push_back(s);
    frame0 += durations[i];
  }
  // speaker-shaped comb pedestal, continuous across the utterance like a
  // voice source: fills every filter band so spectral valleys carry voice
  // character instead of the measurement noise floor, and past frames reveal
  // its realization to the converter
  for (double freq = 0.03; freq < 0.49; freq += static_cast<double>(sample_base)) {
    const double a = 0.08 * static_cast<double>(speaker.amp) * tilt_gain(freq);
    const double phase = rng.uniform(0.0, kTwoPi);
    for (Index t = 0; t < signal_len; ++t) {
      utt.signal[static_cast<size_t>(t)] +=
          static_cast<float>(a * std::sin(kTwoPi * freq * static_cast<double>(t) + phase));
    }
  }
  for (float& v : utt.signal) v += static_cast<float>(rng.gaussian(0.0, cfg.noise_std));

  utt.features = extract_features(utt.signal, cfg);
  VQVC_CHECK(utt.features.dim(0) == total_frames,
             "feature frame count " << utt.features.dim(0) << " != duration total " << total_frames);
  return utt;
}

Index feature_frame_count(Index signal_len, const RenderConfig& cfg) {
  VQVC_CHECK(signal_len >= cfg.window, "signal shorter than one analysis window");
  return (signal_len - cfg.window) / cfg.hop + 1;
}

Tensor extract_features(std::span<const float> signal, const RenderConfig& cfg) {
  const Index frames = feature_frame_count(static_cast<Index>(signal.size()), cfg);
  const int bins = kFftSize / 2 + 1;
  Tensor out({frames, cfg.feat_dim});

  // Hann window, computed once.
  std::vector<double> hann(static_cast<size_t>(cfg.window));
  for (int n = 0; n < cfg.window; ++n) {
    hann[static_cast<size_t>(n)] = 0.5 - 0.5 * std::cos(kTwoPi * n / (cfg.window - 1));
  }
  // Triangular filters with centers linearly spaced over the spectrum,
  // half-width matching the center spacing.
  const double center_step = static_cast<double>(bins - 2) / static_cast<double>(cfg.feat_dim);
  std::vector<double> power(static_cast<size_t>(bins));

  for (Index f = 0; f < frames; ++f) {
    const float* x = signal.data() + f * cfg.hop;
    for (int k = 0; k < bins; ++k) {
      double re = 0.0, im = 0.0;
      for (int n = 0; n < cfg.window; ++n) {
        const double v = static_cast<double>(x[n]) * hann[static_cast<size_t>(n)];
        const double ang = kTwoPi * k * n / kFftSize;
        re += v * std::cos(ang);
        im -= v * std::sin(ang);
      }
      power[static_cast<size_t>(k)] = re * re + im * im;
    }
    for (int d = 0; d < cfg.feat_dim; ++d) {
      const double center = 1.0 + center_step * (static_cast<double>(d) + 0.5);
      double energy = 0.0;
      for (int k = 0; k < bins; ++k) {
        const double w = 1.0 - std::fabs(static_cast<double>(k) - center) / center_step;
        if (w > 0.0) energy += w * power[static_cast<size_t>(k)];
      }
      out.at(f, d) = std::log(std::max(static_cast<float>(energy), kLogFloor));
    }
  }
  return out;
}

// ---- corpus ----------------------------------------------------------------

int CorpusSpec::target_train_utts() const {
  int n = 0;
  for (int s : target_sizes) n = std::max(n, s);
  return n;
}

std::vector<const ManifestEntry*> Manifest::split(const std::string& name) const {
  std::vector<const ManifestEntry*> out;
  for (const ManifestEntry& e : entries) {
    if (e.split == name) out.push_back(&e);
  }
  return out;
}

std::vector<const ManifestEntry*> Manifest::target_subset(int n) const {
  std::vector<const ManifestEntry*> train = split("target_train");
  VQVC_CHECK(n > 0 && n <= static_cast<int>(train.size()),
             "target subset size " << n << " out of range, have " << train.size());
  train.resize(static_cast<size_t>(n));
  return train;
}

const ManifestEntry& Manifest::find(const std::string& utt_id) const {
  for (const ManifestEntry& e : entries) {
    if (e.utt_id == utt_id) return e;
  }
  throw DataError("utterance not in manifest: " + utt_id);
}

std::string symbols_to_string(std::span<const int> symbols) {
  std::string s;
  s.reserve(symbols.size());
  for (int v : symbols) {
    VQVC_CHECK(v >= 0 && v < kAlphabetSize, "invalid symbol " << v);
    s.push_back(static_cast<char>('a' + v));
  }
  return s;
}

std::vector<int> string_to_symbols(const std::string& s) {
  std::vector<int> out;
  out.reserve(s.size());
  for (char c : s) {
    VQVC_CHECK(c >= 'a' && c < 'a' + kAlphabetSize, "invalid symbol letter " << c);
    out.push_back(c - 'a');
  }
  return out;
}

namespace {

std::vector<int> draw_symbols(Rng& rng, int min_symbols, int max_symbols) {
  const int n = min_symbols + static_cast<int>(rng.uniform_int(max_symbols - min_symbols + 1));
  std::vector<int> symbols(static_cast<size_t>(n));
  int prev = -1;
  for (int i = 0; i < n; ++i) {
    // no immediate repeats, so combined index runs track symbol changes
    int s = static_cast<int>(rng.uniform_int(kAlphabetSize));
    while (s == prev) s = static_cast<int>(rng.uniform_int(kAlphabetSize));
    symbols[static_cast<size_t>(i)] = s;
    prev = s;
  }
  return symbols;
}

void validate_roles(const CorpusSpec& spec) {
  std::set<int> ids;
  for (int i = 0; i < spec.n_quantizer_speakers; ++i) ids.insert(100 + i);
  auto add_unique = [&](int id, const char* role) {
    if (!ids.insert(id).second) {
      throw ContractError(std::string("overlapping speaker roles: ") + role + " id " +
                          std::to_string(id) + " already used");
    }
  };
  add_unique(spec.pretrain_speaker, "pretrain");
  add_unique(spec.target_speaker, "target");
  for (int s : spec.source_speakers) add_unique(s, "source");
  VQVC_CHECK(!spec.source_speakers.empty(), "need at least one source speaker");
  VQVC_CHECK(spec.n_quantizer_speakers >= 1, "need at least one quantizer speaker");
  VQVC_CHECK(!spec.target_sizes.empty(), "target_sizes must not be empty");
  for (size_t i = 1; i < spec.target_sizes.size(); ++i) {
    VQVC_CHECK(spec.target_sizes[i] < spec.target_sizes[i - 1],
               "target_sizes must be strictly decreasing");
  }
}

std::string meta_kv(const CorpusSpec& spec, std::uint64_t seed) {
  std::ostringstream os;
  os << "seed=" << seed << "\n";
  os << "n_quantizer_speakers=" << spec.n_quantizer_speakers << "\n";
  os << "n_utts_each=" << spec.n_utts_each << "\n";
  os << "pretrain_speaker=" << spec.pretrain_speaker << "\n";
  os << "pretrain_utts=" << spec.pretrain_utts << "\n";
  os << "pretrain_val_utts=" << spec.pretrain_val_utts << "\n";
  os << "target_speaker=" << spec.target_speaker << "\n";
  os << "target_sizes=";
  for (size_t i = 0; i < spec.target_sizes.size(); ++i) os << (i ? "," : "") << spec.target_sizes[i];
  os << "\n";
  os << "source_speakers=";
  for (size_t i = 0; i < spec.source_speakers.size(); ++i) os << (i ? "," : "") << spec.source_speakers[i];
  os << "\n";
  os << "val_utts=" << spec.val_utts << "\n";
  os << "test_utts=" << spec.test_utts << "\n";
  os << "min_symbols=" << spec.min_symbols << "\n";
  os << "max_symbols=" << spec.max_symbols << "\n";
  os << "window=" << spec.render.window << "\n";
  os << "hop=" << spec.render.hop << "\n";
  os << "feat_dim=" << spec.render.feat_dim << "\n";
  os << "harmonics=" << spec.render.harmonics << "\n";
  os << "noise_std=" << spec.render.noise_std << "\n";
  os << "duration_jitter=" << spec.render.duration_jitter << "\n";
  return os.str();
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ',')) out.push_back(std::stoi(item));
  return out;
}

}  // namespace

Manifest generate_corpus(const CorpusSpec& spec, std::uint64_t seed,
                         const std::filesystem::path& out_dir, bool force) {
  validate_roles(spec);
  namespace fs = std::filesystem;
  const fs::path manifest_path = out_dir / "manifest.tsv";
  if (fs::exists(manifest_path) && !force) {
    throw DataError("corpus already exists at " + out_dir.string() + " (use --force to overwrite)");
  }
  fs::create_directories(out_dir / "signals");
  fs::create_directories(out_dir / "feats");

  Manifest manifest;
  manifest.dir = out_dir;
  manifest.seed = seed;
  manifest.spec = spec;

  Rng symbol_rng(hash_combine(seed, 0x53594d424f4c53ull));
  auto add_utt = [&](const std::string& utt_id, int speaker_id, const std::string& split) {
    ManifestEntry e;
    e.utt_id = utt_id;
    e.speaker = speaker_id;
    e.split = split;
    e.symbols = draw_symbols(symbol_rng, spec.min_symbols, spec.max_symbols);
    e.signal_path = "signals/" + utt_id + ".sig";
    e.feat_path = "feats/" + utt_id + ".feat";
    const SpeakerProfile profile = make_speaker_profile(speaker_id, seed);
    Rng rng(utt_stream(seed, utt_id));
    const SynthUtterance utt = render(profile, e.symbols, rng, spec.render);
    write_signal(out_dir / e.signal_path, utt.signal);
    write_feat(out_dir / e.feat_path, utt.features);
    manifest.entries.push_back(std::move(e));
  };

  char id_buf[64];
  for (int sp = 0; sp < spec.n_quantizer_speakers; ++sp) {
    for (int k = 0; k < spec.n_utts_each; ++k) {
      std::snprintf(id_buf, sizeof(id_buf), "q%03d_%04d", sp, k);
      add_utt(id_buf, 100 + sp, "quantizer");
    }
  }
  for (int k = 0; k < spec.pretrain_utts; ++k) {
    std::snprintf(id_buf, sizeof(id_buf), "p_%04d", k);
    add_utt(id_buf, spec.pretrain_speaker, "tts_pretrain");
  }
  for (int k = 0; k < spec.pretrain_val_utts; ++k) {
    std::snprintf(id_buf, sizeof(id_buf), "pv_%04d", k);
    add_utt(id_buf, spec.pretrain_speaker, "tts_pretrain_val");
  }
  for (int k = 0; k < spec.target_train_utts(); ++k) {
    std::snprintf(id_buf, sizeof(id_buf), "t_%04d", k);
    add_utt(id_buf, spec.target_speaker, "target_train");
  }
  for (int k = 0; k < spec.val_utts; ++k) {
    std::snprintf(id_buf, sizeof(id_buf), "v_%04d", k);
    add_utt(id_buf, spec.source_speakers[static_cast<size_t>(k) % spec.source_speakers.size()], "val");
  }
  for (int k = 0; k < spec.test_utts; ++k) {
    std::snprintf(id_buf, sizeof(id_buf), "x_%04d", k);
    add_utt(id_buf, spec.source_speakers[static_cast<size_t>(k) % spec.source_speakers.size()], "test");
  }

  std::ofstream meta(out_dir / "corpus.meta", std::ios::trunc);
  meta << meta_kv(spec, seed);
  if (!meta) throw DataError("cannot write corpus.meta");

  std::ofstream mf(manifest_path, std::ios::trunc);
  for (const ManifestEntry& e : manifest.entries) {
    mf << e.utt_id << '\t' << e.speaker << '\t' << e.split << '\t' << symbols_to_string(e.symbols)
       << '\t' << e.signal_path << '\t' << e.feat_path << '\n';
  }
  if (!mf) throw DataError("cannot write manifest");
  return manifest;
}

Manifest load_manifest(const std::filesystem::path& manifest_file) {
  std::ifstream is(manifest_file);
  if (!is) throw DataError("cannot open manifest: " + manifest_file.string());
  Manifest manifest;
  manifest.dir = manifest_file.parent_path();

  std::ifstream meta(manifest.dir / "corpus.meta");
  if (!meta) throw DataError("missing corpus.meta next to " + manifest_file.string());
  std::string line;
  while (std::getline(meta, line)) {
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    CorpusSpec& s = manifest.spec;
    if (key == "seed") manifest.seed = std::stoull(val);
    else if (key == "n_quantizer_speakers") s.n_quantizer_speakers = std::stoi(val);
    else if (key == "n_utts_each") s.n_utts_each = std::stoi(val);
    else if (key == "pretrain_speaker") s.pretrain_speaker = std::stoi(val);
    else if (key == "pretrain_utts") s.pretrain_utts = std::stoi(val);
    else if (key == "pretrain_val_utts") s.pretrain_val_utts = std::stoi(val);
    else if (key == "target_speaker") s.target_speaker = std::stoi(val);
    else if (key == "target_sizes") s.target_sizes = parse_int_list(val);
    else if (key == "source_speakers") s.source_speakers = parse_int_list(val);
    else if (key == "val_utts") s.val_utts = std::stoi(val);
    else if (key == "test_utts") s.test_utts = std::stoi(val);
    else if (key == "min_symbols") s.min_symbols = std::stoi(val);
    else if (key == "max_symbols") s.max_symbols = std::stoi(val);
    else if (key == "window") s.render.window = std::stoi(val);
    else if (key == "hop") s.render.hop = std::stoi(val);
    else if (key == "feat_dim") s.render.feat_dim = std::stoi(val);
    else if (key == "harmonics") s.render.harmonics = std::stoi(val);
    else if (key == "noise_std") s.render.noise_std = std::stof(val);
    else if (key == "duration_jitter") s.render.duration_jitter = std::stoi(val);
  }

  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ManifestEntry e;
    std::string speaker_str, symbols_str;
    if (!std::getline(ls, e.utt_id, '\t') || !std::getline(ls, speaker_str, '\t') ||
        !std::getline(ls, e.split, '\t') || !std::getline(ls, symbols_str, '\t') ||
        !std::getline(ls, e.signal_path, '\t') || !std::getline(ls, e.feat_path)) {
      throw DataError("malformed manifest line: " + line);
    }
    e.speaker = std::stoi(speaker_str);
    e.symbols = string_to_symbols(symbols_str);
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

SynthUtterance re_render(const Manifest& manifest, const ManifestEntry& entry) {
  const SpeakerProfile profile = make_speaker_profile(entry.speaker, manifest.seed);
  Rng rng(utt_stream(manifest.seed, entry.utt_id));
  SynthUtterance utt = render(profile, entry.symbols, rng, manifest.spec.render);
  utt.utt_id = entry.utt_id;
  return utt;
}

SynthUtterance render_oracle(const Manifest& manifest, const ManifestEntry& source_entry,
                             int target_speaker) {
  const SpeakerProfile profile = make_speaker_profile(target_speaker, manifest.seed);
  const std::string stream_id = "oracle:" + source_entry.utt_id;
  Rng rng(hash_combine(manifest.seed, fnv1a64(stream_id.data(), stream_id.size())));
  SynthUtterance utt = render(profile, source_entry.symbols, rng, manifest.spec.render);
  utt.utt_id = source_entry.utt_id;
  return utt;
}

}  // namespace vqvc

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

#include "vqvc/feat_io.h"

#include <cstring>
#include <fstream>

namespace vqvc {

namespace {
constexpr char kMagic[8] = {'V', 'Q', 'V', 'C', 'F', 'E', 'A', 'T'};
}

void write_feat(const std::filesystem::path& path, const Tensor& frames) {
  VQVC_CHECK(frames.rank() == 2, "feature tensor must be [frames×dim], got "
                                     << shape_str(frames.shape()));
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open feature file for writing: " + path.string());
  os.write(kMagic, sizeof(kMagic));
  const std::uint16_t version = kFeatVersion;
  os.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint32_t dim = static_cast<std::uint32_t>(frames.dim(1));
  const std::uint32_t count = static_cast<std::uint32_t>(frames.dim(0));
  os.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
  os.write(reinterpret_cast<const char*>(&count), sizeof(count));
  os.write(reinterpret_cast<const char*>(frames.data()),
           static_cast<std::streamsize>(frames.size() * static_cast<Index>(sizeof(float))));
  if (!os) throw DataError("write failed: " + path.string());
}

Tensor read_feat(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open feature file: " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("bad feature file magic in " + path.string());
  }
  std::uint16_t version;
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kFeatVersion) {
    throw DataError("unsupported feature file version " + std::to_string(version));
  }
  std::uint32_t dim, count;
  is.read(reinterpret_cast<char*>(&dim), sizeof(dim));
  is.read(reinterpret_cast<char*>(&count), sizeof(count));
  Tensor t({static_cast<Index>(count), static_cast<Index>(dim)});
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * static_cast<Index>(sizeof(float))));
  if (!is) throw DataError("truncated feature file: " + path.string());
  return t;
}

void write_signal(const std::filesystem::path& path, const std::vector<float>& samples) {
  Tensor t({static_cast<Index>(samples.size()), 1}, samples);
  write_feat(path, t);
}

std::vector<float> read_signal(const std::filesystem::path& path) {
  Tensor t = read_feat(path);
  VQVC_CHECK(t.dim(1) == 1, "signal file must have frame-dim 1, got " << t.dim(1));
  return t.vec();
}

}  // namespace vqvc

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

#include "vqvc/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace vqvc {

namespace {

constexpr char kMagic[8] = {'V', 'Q', 'V', 'C', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

void write_record(std::ostream& os, const std::string& name, const Tensor& t) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
  for (Index d : t.shape()) write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.size() * static_cast<Index>(sizeof(float))));
}

struct Record {
  std::string name;
  Tensor tensor;
};

bool read_record(std::istream& is, Record* out) {
  std::uint32_t name_len;
  is.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
  if (!is) return false;
  std::string name(name_len, '\0');
  is.read(name.data(), name_len);
  const std::uint8_t rank = read_pod<std::uint8_t>(is);
  Shape shape(rank);
  for (std::uint8_t d = 0; d < rank; ++d) shape[d] = read_pod<std::uint32_t>(is);
  Tensor t(shape);
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * static_cast<Index>(sizeof(float))));
  if (!is) throw DataError("truncated checkpoint record: " + name);
  out->name = std::move(name);
  out->tensor = std::move(t);
  return true;
}

}  // namespace

void save_checkpoint(const ParamStore& store, const std::filesystem::path& path,
                     const std::map<std::string, float>& meta) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, sizeof(kMagic));
  write_pod<std::uint16_t>(os, kCheckpointVersion);

  // entries_ is a std::map, so iteration (and the file) is name-sorted.
  for (const auto& [name, e] : store.entries()) {
    write_record(os, name, e.value);
    if (!e.m.empty()) {
      write_record(os, "opt/m/" + name, e.m);
      write_record(os, "opt/v/" + name, e.v);
    }
    if (!e.trainable) {
      write_record(os, "opt/buffer/" + name, Tensor::scalar(1.0f));
    }
  }
  write_record(os, "opt/step", Tensor::scalar(static_cast<float>(store.step_count())));
  for (const auto& [key, v] : meta) {
    write_record(os, "meta/" + key, Tensor::scalar(v));
  }
  if (!os) throw DataError("write failed: " + path.string());
}

std::map<std::string, float> load_checkpoint(ParamStore& store, const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("bad checkpoint magic in " + path.string());
  }
  const std::uint16_t version = read_pod<std::uint16_t>(is);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }

  std::map<std::string, float> meta;
  std::vector<Record> params;
  std::vector<Record> moments_m, moments_v;
  std::vector<std::string> buffers;
  Record rec;
  float step = 0.0f;
  while (read_record(is, &rec)) {
    if (rec.name.rfind("meta/", 0) == 0) {
      meta[rec.name.substr(5)] = rec.tensor.at(0);
    } else if (rec.name == "opt/step") {
      step = rec.tensor.at(0);
    } else if (rec.name.rfind("opt/m/", 0) == 0) {
      rec.name = rec.name.substr(6);
      moments_m.push_back(std::move(rec));
    } else if (rec.name.rfind("opt/v/", 0) == 0) {
      rec.name = rec.name.substr(6);
      moments_v.push_back(std::move(rec));
    } else if (rec.name.rfind("opt/buffer/", 0) == 0) {
      buffers.push_back(rec.name.substr(11));
    } else {
      params.push_back(std::move(rec));
    }
  }

  for (Record& p : params) store.create(p.name, std::move(p.tensor));
  for (const std::string& b : buffers) {
    auto it = store.entries().find(b);
    VQVC_CHECK(it != store.entries().end(), "buffer marker for missing record " << b);
    it->second.trainable = false;
  }
  for (Record& m : moments_m) {
    auto it = store.entries().find(m.name);
    if (it == store.entries().end()) throw DataError("moment for unknown parameter " + m.name);
    it->second.m = std::move(m.tensor);
  }
  for (Record& v : moments_v) {
    auto it = store.entries().find(v.name);
    if (it == store.entries().end()) throw DataError("moment for unknown parameter " + v.name);
    it->second.v = std::move(v.tensor);
  }
  store.set_step_count(static_cast<std::int64_t>(step));
  return meta;
}

std::map<std::string, float> read_checkpoint_meta(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("bad checkpoint magic in " + path.string());
  }
  read_pod<std::uint16_t>(is);
  std::map<std::string, float> meta;
  Record rec;
  while (read_record(is, &rec)) {
    if (rec.name.rfind("meta/", 0) == 0) meta[rec.name.substr(5)] = rec.tensor.at(0);
  }
  return meta;
}

}  // namespace vqvc

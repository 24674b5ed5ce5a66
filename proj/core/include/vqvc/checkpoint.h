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

#ifndef VQVC_CHECKPOINT_H_
#define VQVC_CHECKPOINT_H_

#include <filesystem>
#include <map>
#include <string>

#include "vqvc/param_store.h"

namespace vqvc {

// Checkpoint format: magic "VQVCCKPT", version u16, then repeated records
// {name-length u32, utf-8 name, rank u8, dims u32[], little-endian f32
// payload}. Optimizer moments are stored under the reserved "opt/" prefix
// and scalar metadata under "meta/". Records are written in sorted name
// order so identical stores serialize byte-identically.

inline constexpr std::uint16_t kCheckpointVersion = 1;

void save_checkpoint(const ParamStore& store, const std::filesystem::path& path,
                     const std::map<std::string, float>& meta = {});

// Restores parameters, moments, and step count; returns the meta map.
std::map<std::string, float> load_checkpoint(ParamStore& store, const std::filesystem::path& path);

// Reads only the "meta/" records.
std::map<std::string, float> read_checkpoint_meta(const std::filesystem::path& path);

}  // namespace vqvc

#endif  // VQVC_CHECKPOINT_H_

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

#ifndef VQVC_FEAT_IO_H_
#define VQVC_FEAT_IO_H_

#include <filesystem>

#include "vqvc/tensor.h"

namespace vqvc {

// Acoustic feature file: magic "VQVCFEAT", version u16, frame-dim u32,
// frame-count u32, little-endian f32 frames row-major. Raw signals use
// frame-dim 1.

inline constexpr std::uint16_t kFeatVersion = 1;

void write_feat(const std::filesystem::path& path, const Tensor& frames);
Tensor read_feat(const std::filesystem::path& path);

void write_signal(const std::filesystem::path& path, const std::vector<float>& samples);
std::vector<float> read_signal(const std::filesystem::path& path);

}  // namespace vqvc

#endif  // VQVC_FEAT_IO_H_

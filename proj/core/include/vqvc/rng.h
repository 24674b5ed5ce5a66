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

#ifndef VQVC_RNG_H_
#define VQVC_RNG_H_

#include <cstdint>

namespace vqvc {

// Deterministic PRNG with an explicit stream position. splitmix64 core, so
// the draw sequence is identical across platforms and compilers; std::
// distributions are deliberately avoided. Identical seed + identical call
// sequence => identical draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);
  // [0, n) without modulo bias (rejection sampling).
  std::int64_t uniform_int(std::int64_t n);
  // Standard normal via Box-Muller; two uniforms per call, no cached spare,
  // so the stream position fully determines the state.
  double gaussian();
  double gaussian(double mean, double stddev);
  // Gumbel(0,1): -log(-log(u)).
  double gumbel();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return position_; }

  // Independent deterministic substream, e.g. one per utterance.
  Rng fork(std::uint64_t stream_id) const;

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t state_ = 0;
  std::uint64_t position_ = 0;
};

// Stable 64-bit FNV-1a, used for substream derivation and config hashing.
std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t basis = 0xcbf29ce484222325ull);
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b);

}  // namespace vqvc

#endif  // VQVC_RNG_H_

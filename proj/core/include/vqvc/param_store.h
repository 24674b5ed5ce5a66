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

#ifndef VQVC_PARAM_STORE_H_
#define VQVC_PARAM_STORE_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vqvc/graph.h"
#include "vqvc/rng.h"
#include "vqvc/tensor.h"

namespace vqvc {

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Named parameters plus Adam moments. std::map keys give a stable iteration
// order, which the determinism contract relies on.
class ParamStore {
 public:
  struct Entry {
    Tensor value;
    Tensor m;  // first moment, allocated on first adam_step
    Tensor v;  // second moment
    bool trainable = true;
  };

  // Trainable parameter; throws if the name exists.
  Tensor& create(const std::string& name, Tensor init);
  // Non-trainable buffer (normalization stats, metadata scalars).
  Tensor& create_buffer(const std::string& name, Tensor init);

  bool has(const std::string& name) const { return entries_.count(name) != 0; }
  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  const Entry& entry(const std::string& name) const;
  void remove(const std::string& name);

  // Graph leaf bound to the named parameter.
  Var var(Graph& g, const std::string& name) { return g.param(value(name)); }

  // Standard Adam with bias correction over every trainable parameter.
  // Requires grads to be populated (backward ran since the last step);
  // clears them afterwards.
  void adam_step(const AdamConfig& cfg);
  void zero_grads();

  std::int64_t step_count() const { return step_; }
  void set_step_count(std::int64_t s) { step_ = s; }
  std::vector<std::string> names() const;
  size_t size() const { return entries_.size(); }
  std::int64_t num_elements() const;

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  // Initialization helpers (fan-in scaled uniform; gaussian for embeddings).
  Tensor& create_uniform(const std::string& name, Shape shape, Index fan_in, Rng& rng);
  Tensor& create_gaussian(const std::string& name, Shape shape, float stddev, Rng& rng);
  Tensor& create_zeros(const std::string& name, Shape shape);
  Tensor& create_ones(const std::string& name, Shape shape);

 private:
  std::map<std::string, Entry> entries_;
  std::int64_t step_ = 0;
};

}  // namespace vqvc

#endif  // VQVC_PARAM_STORE_H_

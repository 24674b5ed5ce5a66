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

#include "vqvc/param_store.h"

#include <cmath>

namespace vqvc {

Tensor& ParamStore::create(const std::string& name, Tensor init) {
  VQVC_CHECK(!has(name), "parameter already exists: " << name);
  Entry e;
  e.value = std::move(init);
  e.trainable = true;
  return entries_.emplace(name, std::move(e)).first->second.value;
}

Tensor& ParamStore::create_buffer(const std::string& name, Tensor init) {
  VQVC_CHECK(!has(name), "buffer already exists: " << name);
  Entry e;
  e.value = std::move(init);
  e.trainable = false;
  return entries_.emplace(name, std::move(e)).first->second.value;
}

Tensor& ParamStore::value(const std::string& name) {
  auto it = entries_.find(name);
  VQVC_CHECK(it != entries_.end(), "no such parameter: " << name);
  return it->second.value;
}

const Tensor& ParamStore::value(const std::string& name) const {
  auto it = entries_.find(name);
  VQVC_CHECK(it != entries_.end(), "no such parameter: " << name);
  return it->second.value;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  VQVC_CHECK(it != entries_.end(), "no such parameter: " << name);
  return it->second;
}

void ParamStore::remove(const std::string& name) {
  VQVC_CHECK(entries_.erase(name) == 1, "no such parameter: " << name);
}

void ParamStore::adam_step(const AdamConfig& cfg) {
  for (auto& [name, e] : entries_) {
    if (!e.trainable) continue;
    if (!e.value.has_grad()) {
      throw ContractError("adam_step: grads not populated for " + name);
    }
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), t);
  const double bc2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), t);
  for (auto& [name, e] : entries_) {
    if (!e.trainable) continue;
    if (e.m.empty()) {
      e.m = Tensor(e.value.shape());
      e.v = Tensor(e.value.shape());
    }
    const std::vector<float>& g = e.value.grad();
    for (Index i = 0; i < e.value.size(); ++i) {
      const float gi = g[static_cast<size_t>(i)];
      e.m.at(i) = cfg.beta1 * e.m.at(i) + (1.0f - cfg.beta1) * gi;
      e.v.at(i) = cfg.beta2 * e.v.at(i) + (1.0f - cfg.beta2) * gi * gi;
      const double mhat = static_cast<double>(e.m.at(i)) / bc1;
      const double vhat = static_cast<double>(e.v.at(i)) / bc2;
      e.value.at(i) -= static_cast<float>(static_cast<double>(cfg.lr) * mhat /
                                          (std::sqrt(vhat) + static_cast<double>(cfg.eps)));
    }
    e.value.drop_grad();
  }
}

void ParamStore::zero_grads() {
  for (auto& [name, e] : entries_) e.value.drop_grad();
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, e] : entries_) out.push_back(name);
  return out;
}

std::int64_t ParamStore::num_elements() const {
  std::int64_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.size();
  return n;
}

Tensor& ParamStore::create_uniform(const std::string& name, Shape shape, Index fan_in, Rng& rng) {
  VQVC_CHECK(fan_in > 0, "fan_in must be positive for " << name);
  // variance-preserving: Var = a^2/3 = 1/fan_in
  const double a = std::sqrt(3.0 / static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t.at(i) = static_cast<float>(rng.uniform(-a, a));
  return create(name, std::move(t));
}

Tensor& ParamStore::create_gaussian(const std::string& name, Shape shape, float stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t.at(i) = static_cast<float>(rng.gaussian(0.0, stddev));
  return create(name, std::move(t));
}

Tensor& ParamStore::create_zeros(const std::string& name, Shape shape) {
  return create(name, Tensor(std::move(shape)));
}

Tensor& ParamStore::create_ones(const std::string& name, Shape shape) {
  return create(name, Tensor::full(std::move(shape), 1.0f));
}

}  // namespace vqvc

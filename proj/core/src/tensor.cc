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

#include "vqvc/tensor.h"

#include <cmath>
#include <sstream>

namespace vqvc {

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) {
    VQVC_CHECK(d >= 0, "negative dimension in shape " << shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(shape_size(shape_)), 0.0f);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  VQVC_CHECK(static_cast<Index>(data_.size()) == shape_size(shape_),
             "data length " << data_.size() << " != product of dims " << shape_str(shape_));
}

Tensor Tensor::scalar(float v) { return Tensor({1}, {v}); }

Tensor Tensor::full(Shape shape, float v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

Index Tensor::dim(int axis) const {
  VQVC_CHECK(axis >= 0 && axis < rank(), "axis " << axis << " out of range for " << shape_str(shape_));
  return shape_[static_cast<size_t>(axis)];
}

std::vector<float>& Tensor::ensure_grad() {
  if (!grad_) grad_ = std::make_unique<std::vector<float>>(data_.size(), 0.0f);
  return *grad_;
}

std::vector<float>& Tensor::grad() {
  VQVC_CHECK(grad_ != nullptr, "grad not allocated");
  return *grad_;
}

const std::vector<float>& Tensor::grad() const {
  VQVC_CHECK(grad_ != nullptr, "grad not allocated");
  return *grad_;
}

void Tensor::zero_grad() {
  if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0f);
}

bool Tensor::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

Tensor::Tensor(const Tensor& other) : shape_(other.shape_), data_(other.data_) {
  if (other.grad_) grad_ = std::make_unique<std::vector<float>>(*other.grad_);
}

Tensor& Tensor::operator=(const Tensor& other) {
  if (this == &other) return *this;
  shape_ = other.shape_;
  data_ = other.data_;
  grad_ = other.grad_ ? std::make_unique<std::vector<float>>(*other.grad_) : nullptr;
  return *this;
}

}  // namespace vqvc

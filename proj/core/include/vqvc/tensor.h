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

#ifndef VQVC_TENSOR_H_
#define VQVC_TENSOR_H_

#include <cstdint>
#include <memory>
#include <vector>

#include "vqvc/common.h"

namespace vqvc {

using Index = std::int64_t;
using Shape = std::vector<Index>;

Index shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major float32 tensor. The optional grad buffer has the same
// shape as the data and is allocated on demand.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor scalar(float v);
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, float v);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  Index dim(int axis) const;
  Index size() const { return static_cast<Index>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::vector<float>& vec() { return data_; }
  const std::vector<float>& vec() const { return data_; }

  float& at(Index i) { return data_[static_cast<size_t>(i)]; }
  float at(Index i) const { return data_[static_cast<size_t>(i)]; }
  // 2-D access: row r, column c.
  float& at(Index r, Index c) { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
  float at(Index r, Index c) const { return data_[static_cast<size_t>(r * shape_[1] + c)]; }

  bool has_grad() const { return grad_ != nullptr; }
  // Allocates a zero grad buffer if absent.
  std::vector<float>& ensure_grad();
  std::vector<float>& grad();
  const std::vector<float>& grad() const;
  void zero_grad();
  void drop_grad() { grad_.reset(); }

  bool all_finite() const;
  void fill(float v);

  Tensor clone_values() const { return Tensor(shape_, data_); }

 private:
  Shape shape_;
  std::vector<float> data_;
  std::unique_ptr<std::vector<float>> grad_;

 public:
  Tensor(const Tensor& other);
  Tensor& operator=(const Tensor& other);
  Tensor(Tensor&&) noexcept = default;
  Tensor& operator=(Tensor&&) noexcept = default;
};

}  // namespace vqvc

#endif  // VQVC_TENSOR_H_

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

#ifndef VQVC_GRAPH_H_
#define VQVC_GRAPH_H_

#include <span>
#include <string>
#include <vector>

#include "vqvc/tensor.h"

namespace vqvc {

// Define-by-run reverse-mode autodiff over float32 tensors. A Graph is
// rebuilt for every training step; reductions accumulate in float64.
// Everything is single-threaded and deterministic: node creation order is
// the topological order, and backward() walks it in reverse.

enum class OpKind {
  kLeaf,
  kConstant,
  kMatmul,
  kConv1d,
  kAdd,
  kMul,
  kScale,
  kSoftmax,
  kLog,
  kSigmoid,
  kLogSigmoid,
  kLayerNorm,
  kEmbedding,
  kConcat,
  kSlice,
  kSum,
  kMean,
  kRelu,
  kAbs,
  kTranspose,
  kStSelect,
};

const char* op_kind_name(OpKind kind);

struct OpAttrs {
  int stride = 1;      // conv1d
  int axis = 0;        // concat/slice
  Index start = 0;     // slice
  Index len = 0;       // slice
  float eps = 1e-5f;   // layer norm
  float alpha = 1.0f;  // scale
};

class Graph;

// Lightweight handle to a graph node.
class Var {
 public:
  Var() = default;
  Var(Graph* g, int idx) : g_(g), idx_(idx) {}

  bool valid() const { return g_ != nullptr; }
  Graph* graph() const { return g_; }
  int node() const { return idx_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Index size() const { return value().size(); }
  float scalar_value() const;

 private:
  Graph* g_ = nullptr;
  int idx_ = -1;
};

class Graph {
 public:
  explicit Graph(bool check_finite = false) : check_finite_(check_finite) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Node without gradient tracking (masks, positional encodings, inputs).
  Var constant(Tensor value);
  // Gradient-tracked node owned by the graph.
  Var leaf(Tensor value);
  // Gradient-tracked node bound to an external parameter tensor: the value
  // is snapshotted now, and backward() accumulates into param.ensure_grad().
  Var param(Tensor& param);

  // Populates gradients of every node the scalar loss reaches.
  void backward(const Var& loss);

  const Tensor& value(const Var& v) const;
  // Gradient of a tracked node after backward(); zeros if never reached.
  Tensor grad_of(const Var& v) const;

  size_t num_nodes() const { return nodes_.size(); }
  bool check_finite() const { return check_finite_; }

 private:
  friend Var make_op(Graph& g, OpKind kind, std::initializer_list<Var> inputs,
                     const OpAttrs& attrs, std::vector<int> ids, Tensor value,
                     std::vector<double> aux);
  friend class Var;

  struct Node {
    OpKind kind = OpKind::kLeaf;
    Tensor value;
    std::vector<float> grad;  // sized on first touch
    bool requires_grad = false;
    bool touched = false;
    int inputs[3] = {-1, -1, -1};
    int num_inputs = 0;
    OpAttrs attrs;
    std::vector<int> ids;        // embedding / st_select selections
    std::vector<double> aux;     // saved stats (layer norm)
    Tensor* bound = nullptr;     // external parameter to flush grads into
  };

  Node& node(int idx) { return nodes_[static_cast<size_t>(idx)]; }
  const Node& node(int idx) const { return nodes_[static_cast<size_t>(idx)]; }
  std::vector<float>& touch_grad(int idx);
  void backprop_node(int idx);

  std::vector<Node> nodes_;
  bool check_finite_ = false;
};

// ---- op builders -----------------------------------------------------------
// a [m×k] · b [k×n] -> [m×n]
Var matmul(Var a, Var b);
// x [T×Cin], w [Cout×Cin×K], bias [Cout], valid conv, stride >= 1 -> [T'×Cout]
Var conv1d(Var x, Var w, Var bias, int stride);
// same shape, or b rank-1 [n] broadcast over rows of a [m×n]
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, float alpha);
Var softmax(Var a);  // over the last axis, rows independent
Var log(Var a);
Var sigmoid(Var a);
Var log_sigmoid(Var a);
Var relu(Var a);
Var abs(Var a);
Var layer_norm(Var x, Var gamma, Var beta, float eps = 1e-5f);
// table [V×D] gathered by ids -> [ids.size()×D]; grads scatter-add into table
Var embedding(Var table, std::span<const int> ids);
Var concat(Var a, Var b, int axis);
Var slice(Var x, int axis, Index start, Index len);
Var sum(Var x);   // -> scalar
Var mean(Var x);  // -> scalar
Var transpose(Var x);  // 2-D
// Straight-through codeword selection: forward picks codebook row ids[t],
// backward behaves like matmul(probs, codebook) (the Gumbel-softmax gradient).
Var st_select(Var probs, Var codebook, std::span<const int> ids);

// Dispatcher over the named op set; used by the generic gradient suite.
Var forward_op(OpKind kind, std::span<const Var> inputs, const OpAttrs& attrs = {},
               std::span<const int> ids = {});

// conv output length for valid convolution; the shape rule shared by
// conv1d and frame extractors.
Index conv_output_length(Index input_len, Index kernel, Index stride);

}  // namespace vqvc

#endif  // VQVC_GRAPH_H_

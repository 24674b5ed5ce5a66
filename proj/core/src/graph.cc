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

#include "vqvc/graph.h"

#include <cmath>

#include "kernels.h"

namespace vqvc {

namespace {

// Rows/cols view of a tensor treating the last axis as the row width.
void row_view(const Tensor& t, Index* rows, Index* cols) {
  VQVC_CHECK(t.rank() >= 1, "op needs at least rank-1 input");
  *cols = t.shape().back();
  *rows = t.size() / (*cols == 0 ? 1 : *cols);
}

void check_same_graph(const Var& a, const Var& b) {
  VQVC_CHECK(a.graph() == b.graph(), "vars from different graphs");
}

}  // namespace

const char* op_kind_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kConstant: return "constant";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kConv1d: return "conv1d";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLog: return "log";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kLogSigmoid: return "log-sigmoid";
    case OpKind::kLayerNorm: return "layer-norm";
    case OpKind::kEmbedding: return "embedding-lookup";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kRelu: return "relu";
    case OpKind::kAbs: return "abs";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kStSelect: return "st-select";
  }
  return "?";
}

const Tensor& Var::value() const {
  VQVC_CHECK(g_ != nullptr, "empty Var");
  return g_->value(*this);
}

float Var::scalar_value() const {
  const Tensor& t = value();
  VQVC_CHECK(t.size() == 1, "scalar_value on tensor of shape " << shape_str(t.shape()));
  return t.at(0);
}

Var Graph::constant(Tensor value) {
  Node n;
  n.kind = OpKind::kConstant;
  n.value = std::move(value);
  n.requires_grad = false;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::leaf(Tensor value) {
  Node n;
  n.kind = OpKind::kLeaf;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::param(Tensor& param) {
  Node n;
  n.kind = OpKind::kLeaf;
  n.value = param.clone_values();
  n.requires_grad = true;
  n.bound = &param;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

const Tensor& Graph::value(const Var& v) const {
  VQVC_CHECK(v.graph() == this && v.node() >= 0 && v.node() < static_cast<int>(nodes_.size()),
             "bad var");
  return node(v.node()).value;
}

Tensor Graph::grad_of(const Var& v) const {
  const Node& n = node(v.node());
  Tensor g(n.value.shape());
  if (n.touched) g.vec() = n.grad;
  return g;
}

std::vector<float>& Graph::touch_grad(int idx) {
  Node& n = node(idx);
  if (!n.touched) {
    n.grad.assign(static_cast<size_t>(n.value.size()), 0.0f);
    n.touched = true;
  }
  return n.grad;
}

Var make_op(Graph& g, OpKind kind, std::initializer_list<Var> inputs, const OpAttrs& attrs,
            std::vector<int> ids, Tensor value, std::vector<double> aux) {
  Graph::Node n;
  n.kind = kind;
  n.value = std::move(value);
  n.attrs = attrs;
  n.ids = std::move(ids);
  n.aux = std::move(aux);
  n.num_inputs = static_cast<int>(inputs.size());
  VQVC_CHECK(n.num_inputs <= 3, "too many inputs");
  int slot = 0;
  for (const Var& in : inputs) {
    VQVC_CHECK(in.graph() == &g, "input from another graph");
    n.inputs[slot] = in.node();
    if (g.node(n.inputs[slot]).requires_grad) n.requires_grad = true;
    ++slot;
  }
  if (g.check_finite()) {
    for (int i = 0; i < n.num_inputs; ++i) {
      if (!g.node(n.inputs[i]).value.all_finite()) {
        throw NumericError(std::string("non-finite input to ") + op_kind_name(kind));
      }
    }
  }
  g.nodes_.push_back(std::move(n));
  return Var(&g, static_cast<int>(g.nodes_.size()) - 1);
}

// ---- forward builders ------------------------------------------------------

Var matmul(Var a, Var b) {
  check_same_graph(a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  VQVC_CHECK(ta.rank() == 2 && tb.rank() == 2, "matmul needs 2-D inputs, got "
                                                   << shape_str(ta.shape()) << " and "
                                                   << shape_str(tb.shape()));
  VQVC_CHECK(ta.dim(1) == tb.dim(0), "matmul inner dims differ: " << shape_str(ta.shape()) << " · "
                                                                  << shape_str(tb.shape()));
  const Index m = ta.dim(0), k = ta.dim(1), n = tb.dim(1);
  Tensor out({m, n});
  kern::matmul(ta.data(), tb.data(), out.data(), m, k, n);
  return make_op(*a.graph(), OpKind::kMatmul, {a, b}, {}, {}, std::move(out), {});
}

Var conv1d(Var x, Var w, Var bias, int stride) {
  check_same_graph(x, w);
  check_same_graph(x, bias);
  const Tensor& tx = x.value();
  const Tensor& tw = w.value();
  const Tensor& tb = bias.value();
  VQVC_CHECK(tx.rank() == 2, "conv1d input must be [T×Cin], got " << shape_str(tx.shape()));
  VQVC_CHECK(tw.rank() == 3, "conv1d weight must be [Cout×Cin×K], got " << shape_str(tw.shape()));
  VQVC_CHECK(stride >= 1, "conv1d stride must be >= 1, got " << stride);
  const Index t_in = tx.dim(0), c_in = tx.dim(1);
  const Index c_out = tw.dim(0), kernel = tw.dim(2);
  VQVC_CHECK(tw.dim(1) == c_in, "conv1d channel mismatch: input " << shape_str(tx.shape())
                                                                  << " weight " << shape_str(tw.shape()));
  VQVC_CHECK(tb.rank() == 1 && tb.dim(0) == c_out, "conv1d bias must be [Cout]");
  VQVC_CHECK(t_in >= kernel, "conv1d input length " << t_in << " shorter than kernel " << kernel);
  const Index t_out = conv_output_length(t_in, kernel, stride);
  Tensor out({t_out, c_out});
  kern::conv1d(tx.data(), tw.data(), tb.data(), out.data(), t_in, c_in, c_out, kernel, stride);
  OpAttrs attrs;
  attrs.stride = stride;
  return make_op(*x.graph(), OpKind::kConv1d, {x, w, bias}, attrs, {}, std::move(out), {});
}

Var add(Var a, Var b) {
  check_same_graph(a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  Tensor out = ta.clone_values();
  if (ta.shape() == tb.shape()) {
    for (Index i = 0; i < out.size(); ++i) out.at(i) += tb.at(i);
  } else if (tb.rank() == 1 && ta.rank() == 2 && ta.dim(1) == tb.dim(0)) {
    // bias broadcast over rows
    const Index m = ta.dim(0), n = ta.dim(1);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < n; ++j) out.at(i, j) += tb.at(j);
  } else {
    throw ContractError("add shape mismatch: " + shape_str(ta.shape()) + " vs " +
                        shape_str(tb.shape()));
  }
  return make_op(*a.graph(), OpKind::kAdd, {a, b}, {}, {}, std::move(out), {});
}

Var mul(Var a, Var b) {
  check_same_graph(a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  VQVC_CHECK(ta.shape() == tb.shape(), "mul shape mismatch: " << shape_str(ta.shape()) << " vs "
                                                              << shape_str(tb.shape()));
  Tensor out(ta.shape());
  for (Index i = 0; i < out.size(); ++i) out.at(i) = ta.at(i) * tb.at(i);
  return make_op(*a.graph(), OpKind::kMul, {a, b}, {}, {}, std::move(out), {});
}

Var scale(Var a, float alpha) {
  const Tensor& ta = a.value();
  Tensor out(ta.shape());
  for (Index i = 0; i < out.size(); ++i) out.at(i) = ta.at(i) * alpha;
  OpAttrs attrs;
  attrs.alpha = alpha;
  return make_op(*a.graph(), OpKind::kScale, {a}, attrs, {}, std::move(out), {});
}

Var softmax(Var a) {
  const Tensor& ta = a.value();
  Index rows, cols;
  row_view(ta, &rows, &cols);
  VQVC_CHECK(cols >= 1, "softmax over empty axis");
  Tensor out(ta.shape());
  for (Index r = 0; r < rows; ++r) kern::softmax_row(ta.data() + r * cols, out.data() + r * cols, cols);
  return make_op(*a.graph(), OpKind::kSoftmax, {a}, {}, {}, std::move(out), {});
}

Var log(Var a) {
  const Tensor& ta = a.value();
  Tensor out(ta.shape());
  for (Index i = 0; i < out.size(); ++i) out.at(i) = std::log(ta.at(i));
  return make_op(*a.graph(), OpKind::kLog, {a}, {}, {}, std::move(out), {});
}

Var sigmoid(Var a) {
  const Tensor& ta = a.value();
  Tensor out(ta.shape());
  for (Index i = 0; i < out.size(); ++i) out.at(i) = kern::sigmoidf(ta.at(i));
  return make_op(*a.graph(), OpKind::kSigmoid, {a}, {}, {}, std::move(out), {});
}

Var log_sigmoid(Var a) {
  const Tensor& ta = a.value();
  Tensor out(ta.shape());
  for (Index i = 0; i < out.size(); ++i) out.at(i) = kern::log_sigmoidf(ta.at(i));
  return make_op(*a.graph(), OpKind::kLogSigmoid, {a}, {}, {}, std::move(out), {});
}

Var relu(Var a) {
  const Tensor& ta = a.value();
  Tensor out(ta.shape());
  for (Index i = 0; i < out.size(); ++i) out.at(i) = ta.at(i) > 0.0f ? ta.at(i) : 0.0f;
  return make_op(*a.graph(), OpKind::kRelu, {a}, {}, {}, std::move(out), {});
}

Var abs(Var a) {
  const Tensor& ta = a.value();
  Tensor out(ta.shape());
  for (Index i = 0; i < out.size(); ++i) out.at(i) = std::fabs(ta.at(i));
  return make_op(*a.graph(), OpKind::kAbs, {a}, {}, {}, std::move(out), {});
}

Var layer_norm(Var x, Var gamma, Var beta, float eps) {
  check_same_graph(x, gamma);
  check_same_graph(x, beta);
  const Tensor& tx = x.value();
  Index rows, cols;
  row_view(tx, &rows, &cols);
  VQVC_CHECK(gamma.value().size() == cols && beta.value().size() == cols,
             "layer-norm scale/shift must match row width " << cols);
  Tensor out(tx.shape());
  std::vector<double> aux(static_cast<size_t>(rows) * 2);
  for (Index r = 0; r < rows; ++r) {
    kern::layer_norm_row(tx.data() + r * cols, gamma.value().data(), beta.value().data(),
                         out.data() + r * cols, cols, eps, &aux[static_cast<size_t>(2 * r)],
                         &aux[static_cast<size_t>(2 * r + 1)]);
  }
  OpAttrs attrs;
  attrs.eps = eps;
  return make_op(*x.graph(), OpKind::kLayerNorm, {x, gamma, beta}, attrs, {}, std::move(out),
                 std::move(aux));
}

Var embedding(Var table, std::span<const int> ids) {
  const Tensor& tt = table.value();
  VQVC_CHECK(tt.rank() == 2, "embedding table must be 2-D, got " << shape_str(tt.shape()));
  const Index v = tt.dim(0), d = tt.dim(1);
  Tensor out({static_cast<Index>(ids.size()), d});
  std::vector<int> idvec(ids.begin(), ids.end());
  for (size_t i = 0; i < idvec.size(); ++i) {
    const int id = idvec[i];
    VQVC_CHECK(id >= 0 && id < v, "embedding id " << id << " out of range [0, " << v << ")");
    for (Index c = 0; c < d; ++c) out.at(static_cast<Index>(i), c) = tt.at(id, c);
  }
  return make_op(*table.graph(), OpKind::kEmbedding, {table}, {}, std::move(idvec), std::move(out), {});
}

Var concat(Var a, Var b, int axis) {
  check_same_graph(a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  VQVC_CHECK(ta.rank() == tb.rank(), "concat rank mismatch");
  VQVC_CHECK(axis >= 0 && axis < ta.rank(), "concat axis out of range");
  Shape out_shape = ta.shape();
  for (int d = 0; d < ta.rank(); ++d) {
    if (d == axis) continue;
    VQVC_CHECK(ta.dim(d) == tb.dim(d), "concat dim " << d << " mismatch: " << shape_str(ta.shape())
                                                     << " vs " << shape_str(tb.shape()));
  }
  out_shape[static_cast<size_t>(axis)] += tb.dim(axis);
  Tensor out(out_shape);
  if (ta.rank() == 1 || axis == 0) {
    std::copy(ta.data(), ta.data() + ta.size(), out.data());
    std::copy(tb.data(), tb.data() + tb.size(), out.data() + ta.size());
  } else {
    VQVC_CHECK(ta.rank() == 2 && axis == 1, "concat supports rank<=2");
    const Index m = ta.dim(0), na = ta.dim(1), nb = tb.dim(1);
    for (Index i = 0; i < m; ++i) {
      std::copy(ta.data() + i * na, ta.data() + (i + 1) * na, out.data() + i * (na + nb));
      std::copy(tb.data() + i * nb, tb.data() + (i + 1) * nb, out.data() + i * (na + nb) + na);
    }
  }
  OpAttrs attrs;
  attrs.axis = axis;
  return make_op(*a.graph(), OpKind::kConcat, {a, b}, attrs, {}, std::move(out), {});
}

Var slice(Var x, int axis, Index start, Index len) {
  const Tensor& tx = x.value();
  VQVC_CHECK(axis >= 0 && axis < tx.rank(), "slice axis out of range");
  VQVC_CHECK(start >= 0 && len >= 0 && start + len <= tx.dim(axis),
             "slice [" << start << ", " << start + len << ") out of range for "
                       << shape_str(tx.shape()) << " axis " << axis);
  Shape out_shape = tx.shape();
  out_shape[static_cast<size_t>(axis)] = len;
  Tensor out(out_shape);
  if (tx.rank() == 1 || axis == 0) {
    const Index width = tx.size() / tx.dim(0);
    std::copy(tx.data() + start * width, tx.data() + (start + len) * width, out.data());
  } else {
    VQVC_CHECK(tx.rank() == 2 && axis == 1, "slice supports rank<=2");
    const Index m = tx.dim(0), n = tx.dim(1);
    for (Index i = 0; i < m; ++i)
      std::copy(tx.data() + i * n + start, tx.data() + i * n + start + len, out.data() + i * len);
  }
  OpAttrs attrs;
  attrs.axis = axis;
  attrs.start = start;
  attrs.len = len;
  return make_op(*x.graph(), OpKind::kSlice, {x}, attrs, {}, std::move(out), {});
}

Var sum(Var x) {
  const Tensor& tx = x.value();
  double acc = 0.0;
  for (Index i = 0; i < tx.size(); ++i) acc += static_cast<double>(tx.at(i));
  return make_op(*x.graph(), OpKind::kSum, {x}, {}, {}, Tensor::scalar(static_cast<float>(acc)), {});
}

Var mean(Var x) {
  const Tensor& tx = x.value();
  VQVC_CHECK(tx.size() > 0, "mean of empty tensor");
  double acc = 0.0;
  for (Index i = 0; i < tx.size(); ++i) acc += static_cast<double>(tx.at(i));
  acc /= static_cast<double>(tx.size());
  return make_op(*x.graph(), OpKind::kMean, {x}, {}, {}, Tensor::scalar(static_cast<float>(acc)), {});
}

Var transpose(Var x) {
  const Tensor& tx = x.value();
  VQVC_CHECK(tx.rank() == 2, "transpose needs 2-D input, got " << shape_str(tx.shape()));
  const Index m = tx.dim(0), n = tx.dim(1);
  Tensor out({n, m});
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) out.at(j, i) = tx.at(i, j);
  return make_op(*x.graph(), OpKind::kTranspose, {x}, {}, {}, std::move(out), {});
}

Var st_select(Var probs, Var codebook, std::span<const int> ids) {
  check_same_graph(probs, codebook);
  const Tensor& tp = probs.value();
  const Tensor& te = codebook.value();
  VQVC_CHECK(tp.rank() == 2 && te.rank() == 2, "st-select needs 2-D probs and codebook");
  VQVC_CHECK(tp.dim(1) == te.dim(0), "st-select vocab mismatch: probs " << shape_str(tp.shape())
                                                                        << " codebook "
                                                                        << shape_str(te.shape()));
  VQVC_CHECK(static_cast<Index>(ids.size()) == tp.dim(0), "st-select needs one id per row");
  const Index t = tp.dim(0), v = te.dim(0), d = te.dim(1);
  Tensor out({t, d});
  std::vector<int> idvec(ids.begin(), ids.end());
  for (Index i = 0; i < t; ++i) {
    const int id = idvec[static_cast<size_t>(i)];
    VQVC_CHECK(id >= 0 && id < v, "st-select id out of range");
    for (Index c = 0; c < d; ++c) out.at(i, c) = te.at(id, c);
  }
  return make_op(*probs.graph(), OpKind::kStSelect, {probs, codebook}, {}, std::move(idvec),
                 std::move(out), {});
}

Var forward_op(OpKind kind, std::span<const Var> in, const OpAttrs& attrs, std::span<const int> ids) {
  auto need = [&](size_t n) {
    VQVC_CHECK(in.size() == n, op_kind_name(kind) << " expects " << n << " inputs, got " << in.size());
  };
  switch (kind) {
    case OpKind::kMatmul: need(2); return matmul(in[0], in[1]);
    case OpKind::kConv1d: need(3); return conv1d(in[0], in[1], in[2], attrs.stride);
    case OpKind::kAdd: need(2); return add(in[0], in[1]);
    case OpKind::kMul: need(2); return mul(in[0], in[1]);
    case OpKind::kScale: need(1); return scale(in[0], attrs.alpha);
    case OpKind::kSoftmax: need(1); return softmax(in[0]);
    case OpKind::kLog: need(1); return log(in[0]);
    case OpKind::kSigmoid: need(1); return sigmoid(in[0]);
    case OpKind::kLogSigmoid: need(1); return log_sigmoid(in[0]);
    case OpKind::kLayerNorm: need(3); return layer_norm(in[0], in[1], in[2], attrs.eps);
    case OpKind::kEmbedding: need(1); return embedding(in[0], ids);
    case OpKind::kConcat: need(2); return concat(in[0], in[1], attrs.axis);
    case OpKind::kSlice: need(1); return slice(in[0], attrs.axis, attrs.start, attrs.len);
    case OpKind::kSum: need(1); return sum(in[0]);
    case OpKind::kMean: need(1); return mean(in[0]);
    case OpKind::kRelu: need(1); return relu(in[0]);
    case OpKind::kAbs: need(1); return abs(in[0]);
    case OpKind::kTranspose: need(1); return transpose(in[0]);
    case OpKind::kStSelect: need(2); return st_select(in[0], in[1], ids);
    default: throw ContractError(std::string("forward_op: not a computational op: ") + op_kind_name(kind));
  }
}

Index conv_output_length(Index input_len, Index kernel, Index stride) {
  VQVC_CHECK(input_len >= kernel && stride >= 1, "conv output length undefined for input "
                                                     << input_len << " kernel " << kernel);
  return (input_len - kernel) / stride + 1;
}

// ---- backward --------------------------------------------------------------

void Graph::backward(const Var& loss) {
  VQVC_CHECK(loss.graph() == this, "loss from another graph");
  const Node& ln = node(loss.node());
  if (ln.value.size() != 1) {
    throw ContractError("backward: loss must be scalar, got " + shape_str(ln.value.shape()));
  }
  touch_grad(loss.node())[0] = 1.0f;
  for (int i = loss.node(); i >= 0; --i) {
    Node& n = node(i);
    if (!n.touched || !n.requires_grad || n.num_inputs == 0) continue;
    backprop_node(i);
  }
  // Flush bound parameter grads.
  for (Node& n : nodes_) {
    if (n.bound != nullptr && n.touched) {
      std::vector<float>& sink = n.bound->ensure_grad();
      for (size_t i = 0; i < sink.size(); ++i) sink[i] += n.grad[i];
    }
  }
}

void Graph::backprop_node(int idx) {
  Node& n = node(idx);
  const std::vector<float>& gy = n.grad;
  auto input_value = [&](int slot) -> const Tensor& { return node(n.inputs[slot]).value; };
  auto want = [&](int slot) { return node(n.inputs[slot]).requires_grad; };
  auto gin = [&](int slot) -> std::vector<float>& { return touch_grad(n.inputs[slot]); };

  switch (n.kind) {
    case OpKind::kMatmul: {
      const Tensor& a = input_value(0);
      const Tensor& b = input_value(1);
      const Index m = a.dim(0), k = a.dim(1), nn = b.dim(1);
      if (want(0)) {
        std::vector<float>& ga = gin(0);
        for (Index i = 0; i < m; ++i)
          for (Index l = 0; l < k; ++l) {
            double acc = 0.0;
            const float* gyrow = gy.data() + i * nn;
            const float* brow = b.data() + l * nn;
            for (Index j = 0; j < nn; ++j)
              acc += static_cast<double>(gyrow[j]) * static_cast<double>(brow[j]);
            ga[static_cast<size_t>(i * k + l)] += static_cast<float>(acc);
          }
      }
      if (want(1)) {
        // rank-1 accumulation over i (ascending, float64) with contiguous rows
        std::vector<float>& gb = gin(1);
        std::vector<double> acc(static_cast<size_t>(k * nn), 0.0);
        for (Index i = 0; i < m; ++i) {
          const float* arow = a.data() + i * k;
          const float* gyrow = gy.data() + i * nn;
          for (Index l = 0; l < k; ++l) {
            const double av = static_cast<double>(arow[l]);
            double* accrow = acc.data() + l * nn;
            for (Index j = 0; j < nn; ++j) accrow[j] += av * static_cast<double>(gyrow[j]);
          }
        }
        for (Index l = 0; l < k * nn; ++l) gb[static_cast<size_t>(l)] += static_cast<float>(acc[static_cast<size_t>(l)]);
      }
      break;
    }
    case OpKind::kConv1d: {
      const Tensor& x = input_value(0);
      const Tensor& w = input_value(1);
      const Index c_in = x.dim(1);
      const Index c_out = w.dim(0), kernel = w.dim(2);
      const Index stride = n.attrs.stride;
      const Index t_out = n.value.dim(0);
      if (want(0)) {
        std::vector<float>& gx = gin(0);
        for (Index t = 0; t < t_out; ++t)
          for (Index o = 0; o < c_out; ++o) {
            const float g = gy[static_cast<size_t>(t * c_out + o)];
            if (g == 0.0f) continue;
            for (Index c = 0; c < c_in; ++c)
              for (Index k = 0; k < kernel; ++k)
                gx[static_cast<size_t>((t * stride + k) * c_in + c)] +=
                    g * w.at((o * c_in + c) * kernel + k);
          }
      }
      if (want(1)) {
        std::vector<float>& gw = gin(1);
        for (Index o = 0; o < c_out; ++o)
          for (Index c = 0; c < c_in; ++c)
            for (Index k = 0; k < kernel; ++k) {
              double acc = 0.0;
              for (Index t = 0; t < t_out; ++t)
                acc += static_cast<double>(gy[static_cast<size_t>(t * c_out + o)]) *
                       static_cast<double>(x.at(t * stride + k, c));
              gw[static_cast<size_t>((o * c_in + c) * kernel + k)] += static_cast<float>(acc);
            }
      }
      if (want(2)) {
        std::vector<float>& gb = gin(2);
        for (Index o = 0; o < c_out; ++o) {
          double acc = 0.0;
          for (Index t = 0; t < t_out; ++t) acc += static_cast<double>(gy[static_cast<size_t>(t * c_out + o)]);
          gb[static_cast<size_t>(o)] += static_cast<float>(acc);
        }
      }
      break;
    }
    case OpKind::kAdd: {
      const Tensor& a = input_value(0);
      const Tensor& b = input_value(1);
      if (want(0)) {
        std::vector<float>& ga = gin(0);
        for (size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
      }
      if (want(1)) {
        std::vector<float>& gb = gin(1);
        if (a.shape() == b.shape()) {
          for (size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i];
        } else {
          const Index m = a.dim(0), cols = a.dim(1);
          for (Index j = 0; j < cols; ++j) {
            double acc = 0.0;
            for (Index i = 0; i < m; ++i) acc += static_cast<double>(gy[static_cast<size_t>(i * cols + j)]);
            gb[static_cast<size_t>(j)] += static_cast<float>(acc);
          }
        }
      }
      break;
    }
    case OpKind::kMul: {
      const Tensor& a = input_value(0);
      const Tensor& b = input_value(1);
      if (want(0)) {
        std::vector<float>& ga = gin(0);
        for (size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * b.at(static_cast<Index>(i));
      }
      if (want(1)) {
        std::vector<float>& gb = gin(1);
        for (size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * a.at(static_cast<Index>(i));
      }
      break;
    }
    case OpKind::kScale: {
      if (want(0)) {
        std::vector<float>& ga = gin(0);
        for (size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * n.attrs.alpha;
      }
      break;
    }
    case OpKind::kSoftmax: {
      if (!want(0)) break;
      const Tensor& y = n.value;
      Index rows, cols;
      row_view(y, &rows, &cols);
      std::vector<float>& gx = gin(0);
      for (Index r = 0; r < rows; ++r) {
        double inner = 0.0;
        for (Index j = 0; j < cols; ++j)
          inner += static_cast<double>(gy[static_cast<size_t>(r * cols + j)]) * static_cast<double>(y.at(r * cols + j));
        for (Index j = 0; j < cols; ++j) {
          const size_t i = static_cast<size_t>(r * cols + j);
          gx[i] += y.at(static_cast<Index>(i)) * (gy[i] - static_cast<float>(inner));
        }
      }
      break;
    }
    case OpKind::kLog: {
      if (!want(0)) break;
      const Tensor& x = input_value(0);
      std::vector<float>& gx = gin(0);
      for (size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] / x.at(static_cast<Index>(i));
      break;
    }
    case OpKind::kSigmoid: {
      if (!want(0)) break;
      const Tensor& y = n.value;
      std::vector<float>& gx = gin(0);
      for (size_t i = 0; i < gy.size(); ++i) {
        const float s = y.at(static_cast<Index>(i));
        gx[i] += gy[i] * s * (1.0f - s);
      }
      break;
    }
    case OpKind::kLogSigmoid: {
      if (!want(0)) break;
      const Tensor& x = input_value(0);
      std::vector<float>& gx = gin(0);
      for (size_t i = 0; i < gy.size(); ++i) {
        gx[i] += gy[i] * kern::sigmoidf(-x.at(static_cast<Index>(i)));
      }
      break;
    }
    case OpKind::kLayerNorm: {
      const Tensor& x = input_value(0);
      const Tensor& gamma = input_value(1);
      Index rows, cols;
      row_view(x, &rows, &cols);
      for (Index r = 0; r < rows; ++r) {
        const double mu = n.aux[static_cast<size_t>(2 * r)];
        const double rstd = n.aux[static_cast<size_t>(2 * r + 1)];
        // dyg = gy * gamma; gx = rstd * (dyg - mean(dyg) - xhat * mean(dyg*xhat))
        double mean_dyg = 0.0, mean_dyg_xhat = 0.0;
        for (Index j = 0; j < cols; ++j) {
          const double xhat = (static_cast<double>(x.at(r * cols + j)) - mu) * rstd;
          const double dyg = static_cast<double>(gy[static_cast<size_t>(r * cols + j)]) *
                             static_cast<double>(gamma.at(j));
          mean_dyg += dyg;
          mean_dyg_xhat += dyg * xhat;
        }
        mean_dyg /= static_cast<double>(cols);
        mean_dyg_xhat /= static_cast<double>(cols);
        if (want(0)) {
          std::vector<float>& gx = gin(0);
          for (Index j = 0; j < cols; ++j) {
            const double xhat = (static_cast<double>(x.at(r * cols + j)) - mu) * rstd;
            const double dyg = static_cast<double>(gy[static_cast<size_t>(r * cols + j)]) *
                               static_cast<double>(gamma.at(j));
            gx[static_cast<size_t>(r * cols + j)] +=
                static_cast<float>(rstd * (dyg - mean_dyg - xhat * mean_dyg_xhat));
          }
        }
        if (want(1)) {
          std::vector<float>& gg = gin(1);
          for (Index j = 0; j < cols; ++j) {
            const double xhat = (static_cast<double>(x.at(r * cols + j)) - mu) * rstd;
            gg[static_cast<size_t>(j)] +=
                static_cast<float>(static_cast<double>(gy[static_cast<size_t>(r * cols + j)]) * xhat);
          }
        }
        if (want(2)) {
          std::vector<float>& gb = gin(2);
          for (Index j = 0; j < cols; ++j) gb[static_cast<size_t>(j)] += gy[static_cast<size_t>(r * cols + j)];
        }
      }
      break;
    }
    case OpKind::kEmbedding: {
      if (!want(0)) break;
      const Index d = n.value.dim(1);
      std::vector<float>& gt = gin(0);
      for (size_t i = 0; i < n.ids.size(); ++i) {
        const Index row = n.ids[i];
        for (Index c = 0; c < d; ++c)
          gt[static_cast<size_t>(row * d + c)] += gy[i * static_cast<size_t>(d) + static_cast<size_t>(c)];
      }
      break;
    }
    case OpKind::kConcat: {
      const Tensor& a = input_value(0);
      const Tensor& b = input_value(1);
      if (n.attrs.axis == 0 || a.rank() == 1) {
        if (want(0)) {
          std::vector<float>& ga = gin(0);
          for (Index i = 0; i < a.size(); ++i) ga[static_cast<size_t>(i)] += gy[static_cast<size_t>(i)];
        }
        if (want(1)) {
          std::vector<float>& gb = gin(1);
          for (Index i = 0; i < b.size(); ++i)
            gb[static_cast<size_t>(i)] += gy[static_cast<size_t>(a.size() + i)];
        }
      } else {
        const Index m = a.dim(0), na = a.dim(1), nb = b.dim(1);
        if (want(0)) {
          std::vector<float>& ga = gin(0);
          for (Index i = 0; i < m; ++i)
            for (Index j = 0; j < na; ++j)
              ga[static_cast<size_t>(i * na + j)] += gy[static_cast<size_t>(i * (na + nb) + j)];
        }
        if (want(1)) {
          std::vector<float>& gb = gin(1);
          for (Index i = 0; i < m; ++i)
            for (Index j = 0; j < nb; ++j)
              gb[static_cast<size_t>(i * nb + j)] += gy[static_cast<size_t>(i * (na + nb) + na + j)];
        }
      }
      break;
    }
    case OpKind::kSlice: {
      if (!want(0)) break;
      const Tensor& x = input_value(0);
      std::vector<float>& gx = gin(0);
      if (x.rank() == 1 || n.attrs.axis == 0) {
        const Index width = x.size() / x.dim(0);
        for (Index i = 0; i < n.attrs.len * width; ++i)
          gx[static_cast<size_t>(n.attrs.start * width + i)] += gy[static_cast<size_t>(i)];
      } else {
        const Index m = x.dim(0), nc = x.dim(1);
        for (Index i = 0; i < m; ++i)
          for (Index j = 0; j < n.attrs.len; ++j)
            gx[static_cast<size_t>(i * nc + n.attrs.start + j)] +=
                gy[static_cast<size_t>(i * n.attrs.len + j)];
      }
      break;
    }
    case OpKind::kSum: {
      if (!want(0)) break;
      std::vector<float>& gx = gin(0);
      const float g = gy[0];
      for (float& v : gx) v += g;
      break;
    }
    case OpKind::kMean: {
      if (!want(0)) break;
      std::vector<float>& gx = gin(0);
      const float g = gy[0] / static_cast<float>(gx.size());
      for (float& v : gx) v += g;
      break;
    }
    case OpKind::kRelu: {
      if (!want(0)) break;
      const Tensor& x = input_value(0);
      std::vector<float>& gx = gin(0);
      for (size_t i = 0; i < gy.size(); ++i)
        if (x.at(static_cast<Index>(i)) > 0.0f) gx[i] += gy[i];
      break;
    }
    case OpKind::kAbs: {
      if (!want(0)) break;
      const Tensor& x = input_value(0);
      std::vector<float>& gx = gin(0);
      for (size_t i = 0; i < gy.size(); ++i) {
        const float v = x.at(static_cast<Index>(i));
        if (v > 0.0f) gx[i] += gy[i];
        else if (v < 0.0f) gx[i] -= gy[i];
      }
      break;
    }
    case OpKind::kTranspose: {
      if (!want(0)) break;
      const Tensor& x = input_value(0);
      const Index m = x.dim(0), nc = x.dim(1);
      std::vector<float>& gx = gin(0);
      for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < nc; ++j) gx[static_cast<size_t>(i * nc + j)] += gy[static_cast<size_t>(j * m + i)];
      break;
    }
    case OpKind::kStSelect: {
      const Tensor& probs = input_value(0);
      const Tensor& e = input_value(1);
      const Index t = probs.dim(0), v = e.dim(0), d = e.dim(1);
      if (want(0)) {
        std::vector<float>& gp = gin(0);
        for (Index i = 0; i < t; ++i)
          for (Index j = 0; j < v; ++j) {
            double acc = 0.0;
            for (Index c = 0; c < d; ++c)
              acc += static_cast<double>(gy[static_cast<size_t>(i * d + c)]) * static_cast<double>(e.at(j, c));
            gp[static_cast<size_t>(i * v + j)] += static_cast<float>(acc);
          }
      }
      if (want(1)) {
        std::vector<float>& ge = gin(1);
        for (Index j = 0; j < v; ++j)
          for (Index c = 0; c < d; ++c) {
            double acc = 0.0;
            for (Index i = 0; i < t; ++i)
              acc += static_cast<double>(probs.at(i, j)) * static_cast<double>(gy[static_cast<size_t>(i * d + c)]);
            ge[static_cast<size_t>(j * d + c)] += static_cast<float>(acc);
          }
      }
      break;
    }
    case OpKind::kLeaf:
    case OpKind::kConstant:
      break;
  }
}

}  // namespace vqvc

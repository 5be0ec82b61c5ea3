// SPDX-License-Identifier: Apache-2.0
//
// ddafm: delay-Doppler-angle channel reconstruction toolkit
// Copyright (C) 2026 The ddafm authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "ddafm/tensor.hpp"

namespace ddafm::ad {

class Graph;

/// Handle to a node recorded on a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Tape of tensor-valued operations for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so every parent has a smaller id
/// than its children and reverse id order is a valid topological order. A
/// graph is single-owner: record, call backward() once, read gradients.
/// Node values have stable addresses for the lifetime of the graph.
class Graph {
 public:
  /// Accumulates the node gradient into the gradients of its parents.
  /// `parent_grads[i]` is null when parent i does not require a gradient.
  using BackwardFn = std::function<void(const Tensor& out, const Tensor& grad_out,
                                        std::span<Tensor* const> parent_grads)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var leaf(Tensor value, bool requires_grad);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Records a derived node. The node requires a gradient iff any parent does.
  Var record(Tensor value, std::vector<Var> parents, BackwardFn backward);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Runs reverse accumulation from a scalar (one-element) node.
  /// Throws std::logic_error when called twice or on a non-scalar node.
  void backward(Var loss);

  /// Gradient of a node after backward(); null for nodes that do not require
  /// one or that the loss does not depend on.
  const Tensor* grad(Var v) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    Tensor grad;
    bool has_grad = false;
  };

  Tensor* grad_slot(std::size_t id);

  std::deque<Node> nodes_;
  bool consumed_ = false;
};

// ---- elementwise -------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var square(Var a);
Var sum(Var a);
/// Exact GELU: x * Phi(x).
Var gelu(Var a);
Var tanh(Var a);
Var exp(Var a);

// ---- row-matrix ops (2-D tensors, rows are tokens) ---------------------

Var matmul(Var a, Var b);
/// x[N,K] * w[K,M] + b[M]
Var linear(Var x, Var w, Var b);
Var add_row_vector(Var x, Var b);
/// Multiplies row i by mask[i] (a constant).
Var mul_rows(Var x, std::shared_ptr<const std::vector<double>> mask);
/// y[i] = x[index[i]]; gradient scatters back.
Var gather_rows(Var x, std::shared_ptr<const std::vector<std::size_t>> index);
/// Per-row LayerNorm over the last axis with learnable gain and bias.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
/// Row-wise softmax of a 2-D tensor.
Var softmax_rows(Var a);

/// Same-padded, unit-stride 2-D convolution on a channels-last grid.
/// x: [rows*cols, cin]; weight: [k, k, cin, cout] with odd k; bias: [cout].
Var conv2d(Var x, std::size_t rows, std::size_t cols, Var weight, Var bias);

/// Static description of a window-attention call.
struct WindowAttentionLayout {
  std::size_t heads = 1;
  std::size_t window_tokens = 0;  // M
  std::size_t windows = 0;
  /// [M*M] row index into the bias table for each (query, key) pair.
  std::shared_ptr<const std::vector<std::size_t>> bias_index;
  /// [windows*M*M] additive mask (0 or -inf); may be null.
  std::shared_ptr<const std::vector<double>> additive_mask;
  /// [windows*M] key validity flags; invalid keys are never attended. May be null.
  std::shared_ptr<const std::vector<std::uint8_t>> key_valid;
};

/// Multi-head self-attention inside each window:
/// softmax(Q K^T / sqrt(d_h) + B + mask) V per head.
///
/// qkv: [windows*M, 3C] with column blocks [Q | K | V]; head h uses columns
/// [h*d_h, (h+1)*d_h) of each block. bias_table: [rows, heads]. Returns
/// [windows*M, C] with heads concatenated (no output projection). Query rows
/// whose keys are all masked produce zeros.
Var window_attention(Var qkv, Var bias_table, const WindowAttentionLayout& layout);

/// Number of Q*K^T multiply-accumulates performed by window_attention since
/// the last reset (process-wide).
std::uint64_t attention_score_ops();
void reset_attention_score_ops();

}  // namespace ddafm::ad

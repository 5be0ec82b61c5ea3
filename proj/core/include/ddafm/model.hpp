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
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ddafm/autodiff.hpp"
#include "ddafm/csi.hpp"
#include "ddafm/fspe.hpp"

namespace ddafm {

/// Backbone hyperparameters.
struct ModelConfig {
  std::size_t patch_size = 1;         // P
  std::size_t window_size = 8;        // P_w
  std::size_t embed_dim = 64;         // C
  std::size_t blocks_per_module = 2;  // L1
  std::size_t module_count = 2;       // L2
  std::size_t heads = 2;              // h
  double mlp_ratio = 2.0;
  std::size_t in_channels = 64;       // 2 * N_rx
  std::size_t conv_kernel = 3;
  std::size_t n_t_max = 80;           // padded grid rows
  std::size_t n_f_max = 128;          // padded grid cols
  double ref_res_tau = 1.36e-9;
  double ref_res_nu = 3.15;
  double pe_sigma = 10000.0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  std::size_t head_dim() const { return embed_dim / heads; }
  std::size_t mlp_hidden() const;
  std::size_t window_tokens() const { return window_size * window_size; }
  FsPeConfig fspe() const;

  /// Scaling family: C = 512/640/768 with h = 4/5/6, L1 = 6, L2 = 4.
  static ModelConfig small();
  static ModelConfig base();
  static ModelConfig large();

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Named parameter tensors in canonical order.
class ParamStore {
 public:
  void add(std::string name, Tensor value);
  bool contains(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  std::size_t size() const noexcept { return tensors_.size(); }
  std::size_t scalar_count() const;
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::vector<Tensor>& tensors() noexcept { return tensors_; }
  const std::vector<Tensor>& tensors() const noexcept { return tensors_; }

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    return a.names_ == b.names_ && a.tensors_ == b.tensors_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Canonical parameter names and shapes for a configuration, in storage order.
std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& cfg);

/// Attention and MLP weights ~ truncated normal (std 0.02, cut at 2 std),
/// convolution weights ~ truncated normal with std 1/sqrt(fan_in), biases and
/// relative position tables zero, LayerNorm gains one.
ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Exact number of scalars init_params(cfg) holds, from the closed form.
std::size_t count_params(const ModelConfig& cfg);

/// Parameters attached to a graph as leaves, addressable by name.
class BoundParams {
 public:
  BoundParams(ad::Graph& graph, const ParamStore& store, bool requires_grad);
  ad::Var operator[](std::string_view name) const { return vars_.at(store_->index_of(name)); }
  const std::vector<ad::Var>& vars() const noexcept { return vars_; }

 private:
  const ParamStore* store_;
  std::vector<ad::Var> vars_;
};

enum class ShiftMode { None, Half };

/// Token routing and masks for one window partition of a rows x cols grid.
struct WindowPlan {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t window = 0;
  ShiftMode shift = ShiftMode::None;
  /// to_windows[w*M + t] = grid index of token t in window w.
  std::shared_ptr<const std::vector<std::size_t>> to_windows;
  /// Inverse permutation.
  std::shared_ptr<const std::vector<std::size_t>> from_windows;
  ad::WindowAttentionLayout layout;
};

/// Windows are taken after a cyclic shift by floor(P_w/2) on both axes when
/// shift == Half; the additive mask then forbids attention between tokens that
/// were not adjacent before the shift. Invalid tokens (validity == 0) are
/// masked as keys. Throws std::invalid_argument unless P_w divides both extents.
WindowPlan make_window_plan(std::size_t rows, std::size_t cols, std::size_t window, ShiftMode shift,
                            std::size_t heads, std::span<const std::uint8_t> validity = {});

/// Relative-position row index for every (query, key) pair of a window.
std::vector<std::size_t> relative_position_index(std::size_t window);

/// grid (rows, cols, C) -> windows (rows*cols/M, M, C).
Tensor window_partition(const Tensor& grid, std::size_t window, ShiftMode shift);
/// Inverse of window_partition.
Tensor window_reverse(const Tensor& windows, std::size_t rows, std::size_t cols, std::size_t window, ShiftMode shift);

/// Window multi-head self-attention on tokens already in window order:
/// qkv projection, per-head softmax(Q K^T / sqrt(d_h) + B + mask) V, output
/// projection. `prefix` names the attention parameters (e.g. "...attn").
ad::Var wmsa(ad::Var tokens, const BoundParams& params, const std::string& prefix, const ad::WindowAttentionLayout& layout);

/// x + Attn(LN(x)), then + MLP(LN(.)). Shape preserved.
ad::Var block_forward(ad::Var x, const BoundParams& params, const std::string& prefix, const WindowPlan& plan);

/// Per-grid state shared by every module of one forward pass.
struct GridContext {
  std::size_t rows = 0;
  std::size_t cols = 0;
  WindowPlan plain;
  WindowPlan shifted;
  std::shared_ptr<const std::vector<double>> row_mask;  // null when every token is valid

  static GridContext make(const ModelConfig& cfg, std::size_t rows, std::size_t cols,
                          std::span<const std::uint8_t> validity = {});
};

/// X_m = X_{m-1} + Conv_m(Z_{m,L1}) with Z_{m,0} = X_{m-1}; block l uses
/// shifted windows iff l is odd.
ad::Var module_forward(ad::Var x, const BoundParams& params, std::size_t module_index, const GridContext& grid,
                       const ModelConfig& cfg);

class Backbone {
 public:
  explicit Backbone(ModelConfig cfg);
  const ModelConfig& config() const noexcept { return cfg_; }

  /// input: (rows, cols, in_channels) real DDA features; validity: rows*cols
  /// flags or empty for "all valid". Returns [rows*cols, in_channels].
  ad::Var forward(ad::Graph& graph, const BoundParams& params, const Tensor& input, const FrameStructure& frame,
                  std::span<const std::uint8_t> validity = {}) const;

  /// Convenience inference without gradients; returns (rows, cols, in_channels).
  Tensor infer(const ParamStore& params, const Tensor& input, const FrameStructure& frame,
               std::span<const std::uint8_t> validity = {}) const;

 private:
  ModelConfig cfg_;
};

}  // namespace ddafm

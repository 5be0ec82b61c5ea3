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

#include "ddafm/model.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "ddafm/channel.hpp"

namespace ddafm {

// ---- config ------------------------------------------------------------

void ModelConfig::validate() const {
  auto fail = [](const char* field, const std::string& why) {
    throw std::invalid_argument(std::string("model.") + field + ": " + why);
  };
  if (patch_size < 1) fail("patch_size", "must be >= 1");
  if (window_size < 1) fail("window_size", "must be >= 1");
  if (embed_dim < 4 || embed_dim % 4 != 0) fail("embed_dim", "must be a positive multiple of 4");
  if (heads < 1 || embed_dim % heads != 0) fail("heads", "must divide embed_dim");
  if (blocks_per_module < 1) fail("blocks_per_module", "must be >= 1");
  if (module_count < 1) fail("module_count", "must be >= 1");
  if (!(mlp_ratio > 0.0)) fail("mlp_ratio", "must be positive");
  if (in_channels < 2 || in_channels % 2 != 0) fail("in_channels", "must be a positive even number");
  if (conv_kernel < 1 || conv_kernel % 2 == 0) fail("conv_kernel", "must be odd");
  if (n_t_max % (patch_size * window_size) != 0)
    fail("n_t_max", "must be divisible by patch_size * window_size");
  if (n_f_max % (patch_size * window_size) != 0)
    fail("n_f_max", "must be divisible by patch_size * window_size");
  if (!(ref_res_tau > 0.0)) fail("ref_res_tau", "must be positive");
  if (!(ref_res_nu > 0.0)) fail("ref_res_nu", "must be positive");
  if (!(pe_sigma > 1.0)) fail("pe_sigma", "must exceed 1");
}

std::size_t ModelConfig::mlp_hidden() const {
  return static_cast<std::size_t>(std::llround(mlp_ratio * static_cast<double>(embed_dim)));
}

FsPeConfig ModelConfig::fspe() const {
  FsPeConfig pe;
  pe.ref_res_tau = ref_res_tau;
  pe.ref_res_nu = ref_res_nu;
  pe.embed_dim = embed_dim;
  pe.patch_size = patch_size;
  pe.sigma = pe_sigma;
  return pe;
}

namespace {
ModelConfig scaled(std::size_t c, std::size_t h) {
  ModelConfig cfg;
  cfg.embed_dim = c;
  cfg.heads = h;
  cfg.blocks_per_module = 6;
  cfg.module_count = 4;
  cfg.mlp_ratio = 2.0;
  cfg.in_channels = 64;
  cfg.n_t_max = 80;
  cfg.n_f_max = 128;
  return cfg;
}
}  // namespace

ModelConfig ModelConfig::small() { return scaled(512, 4); }
ModelConfig ModelConfig::base() { return scaled(640, 5); }
ModelConfig ModelConfig::large() { return scaled(768, 6); }

// ---- parameters --------------------------------------------------------

void ParamStore::add(std::string name, Tensor value) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  index_.emplace(name, names_.size());
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
}

bool ParamStore::contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

std::size_t ParamStore::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

Tensor& ParamStore::at(std::string_view name) { return tensors_[index_of(name)]; }
const Tensor& ParamStore::at(std::string_view name) const { return tensors_[index_of(name)]; }

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors_) n += t.size();
  return n;
}

namespace {
std::string block_prefix(std::size_t m, std::size_t l) {
  return "modules." + std::to_string(m) + ".blocks." + std::to_string(l);
}
}  // namespace

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t c = cfg.embed_dim;
  const std::size_t k = cfg.conv_kernel;
  const std::size_t hidden = cfg.mlp_hidden();
  const std::size_t bias_rows = (2 * cfg.window_size - 1) * (2 * cfg.window_size - 1);
  std::vector<std::pair<std::string, Shape>> layout;
  layout.emplace_back("embed.weight", Shape{k, k, cfg.in_channels, c});
  layout.emplace_back("embed.bias", Shape{c});
  for (std::size_t m = 0; m < cfg.module_count; ++m) {
    for (std::size_t l = 0; l < cfg.blocks_per_module; ++l) {
      const std::string p = block_prefix(m, l);
      layout.emplace_back(p + ".norm1.gain", Shape{c});
      layout.emplace_back(p + ".norm1.bias", Shape{c});
      layout.emplace_back(p + ".attn.qkv.weight", Shape{c, 3 * c});
      layout.emplace_back(p + ".attn.qkv.bias", Shape{3 * c});
      layout.emplace_back(p + ".attn.rel_bias", Shape{bias_rows, cfg.heads});
      layout.emplace_back(p + ".attn.proj.weight", Shape{c, c});
      layout.emplace_back(p + ".attn.proj.bias", Shape{c});
      layout.emplace_back(p + ".norm2.gain", Shape{c});
      layout.emplace_back(p + ".norm2.bias", Shape{c});
      layout.emplace_back(p + ".mlp.fc1.weight", Shape{c, hidden});
      layout.emplace_back(p + ".mlp.fc1.bias", Shape{hidden});
      layout.emplace_back(p + ".mlp.fc2.weight", Shape{hidden, c});
      layout.emplace_back(p + ".mlp.fc2.bias", Shape{c});
    }
    const std::string mp = "modules." + std::to_string(m) + ".conv";
    layout.emplace_back(mp + ".weight", Shape{k, k, c, c});
    layout.emplace_back(mp + ".bias", Shape{c});
  }
  layout.emplace_back("proj.weight", Shape{k, k, c, cfg.in_channels});
  layout.emplace_back("proj.bias", Shape{cfg.in_channels});
  return layout;
}

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void fill_truncated_normal(Tensor& t, double stddev, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (double& v : t.data()) {
    double z;
    do {
      z = gauss(rng);
    } while (std::abs(z) > 2.0);
    v = z * stddev;
  }
}

}  // namespace

ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  ParamStore store;
  for (auto& [name, shape] : parameter_layout(cfg)) {
    Tensor t(shape, 0.0);
    if (ends_with(name, ".gain")) {
      t.fill(1.0);
    } else if (ends_with(name, ".weight")) {
      if (shape.size() == 4) {
        const double fan_in = static_cast<double>(shape[0] * shape[1] * shape[2]);
        fill_truncated_normal(t, 1.0 / std::sqrt(fan_in), rng);
      } else {
        fill_truncated_normal(t, 0.02, rng);
      }
    }
    store.add(name, std::move(t));
  }
  return store;
}

std::size_t count_params(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t c = cfg.embed_dim;
  const std::size_t k2 = cfg.conv_kernel * cfg.conv_kernel;
  const std::size_t hidden = cfg.mlp_hidden();
  const std::size_t bias_rows = (2 * cfg.window_size - 1) * (2 * cfg.window_size - 1);
  const std::size_t norms = 2 * 2 * c;
  const std::size_t attention = c * 3 * c + 3 * c + bias_rows * cfg.heads + c * c + c;
  const std::size_t mlp = c * hidden + hidden + hidden * c + c;
  const std::size_t block = norms + attention + mlp;
  const std::size_t module = cfg.blocks_per_module * block + k2 * c * c + c;
  const std::size_t embed = k2 * cfg.in_channels * c + c;
  const std::size_t proj = k2 * c * cfg.in_channels + cfg.in_channels;
  return embed + cfg.module_count * module + proj;
}

BoundParams::BoundParams(ad::Graph& graph, const ParamStore& store, bool requires_grad) : store_(&store) {
  vars_.reserve(store.size());
  for (const Tensor& t : store.tensors()) vars_.push_back(graph.leaf(t, requires_grad));
}

// ---- windows -----------------------------------------------------------

std::vector<std::size_t> relative_position_index(std::size_t window) {
  const std::size_t m = window * window;
  const std::size_t span = 2 * window - 1;
  std::vector<std::size_t> index(m * m);
  for (std::size_t a = 0; a < m; ++a) {
    const std::size_t ai = a / window, aj = a % window;
    for (std::size_t b = 0; b < m; ++b) {
      const std::size_t bi = b / window, bj = b % window;
      index[a * m + b] = (ai + window - 1 - bi) * span + (aj + window - 1 - bj);
    }
  }
  return index;
}

namespace {

void require_divisible(std::size_t rows, std::size_t cols, std::size_t window) {
  if (window == 0 || rows % window != 0 || cols % window != 0)
    throw std::invalid_argument("grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                                " is not divisible by window size " + std::to_string(window));
}

std::vector<std::size_t> window_order(std::size_t rows, std::size_t cols, std::size_t window, ShiftMode shift) {
  require_divisible(rows, cols, window);
  const std::size_t s = shift == ShiftMode::Half ? window / 2 : 0;
  const std::size_t wc = cols / window;
  const std::size_t m = window * window;
  std::vector<std::size_t> order(rows * cols);
  for (std::size_t w = 0; w < (rows / window) * wc; ++w) {
    const std::size_t wi = w / wc, wj = w % wc;
    for (std::size_t t = 0; t < m; ++t) {
      const std::size_t i = (wi * window + t / window + s) % rows;
      const std::size_t j = (wj * window + t % window + s) % cols;
      order[w * m + t] = i * cols + j;
    }
  }
  return order;
}

// Region label of a coordinate in shifted space; tokens with different labels
// were separated by the wrap-around.
std::size_t region(std::size_t pos, std::size_t extent, std::size_t window, std::size_t shift) {
  if (pos < extent - window) return 0;
  if (pos < extent - shift) return 1;
  return 2;
}

}  // namespace

WindowPlan make_window_plan(std::size_t rows, std::size_t cols, std::size_t window, ShiftMode shift,
                            std::size_t heads, std::span<const std::uint8_t> validity) {
  require_divisible(rows, cols, window);
  if (!validity.empty() && validity.size() != rows * cols)
    throw std::invalid_argument("validity mask size does not match grid");
  WindowPlan plan;
  plan.rows = rows;
  plan.cols = cols;
  plan.window = window;
  plan.shift = shift;
  auto order = window_order(rows, cols, window, shift);
  std::vector<std::size_t> inverse(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) inverse[order[i]] = i;

  const std::size_t m = window * window;
  const std::size_t nw = rows * cols / m;
  plan.layout.heads = heads;
  plan.layout.window_tokens = m;
  plan.layout.windows = nw;
  plan.layout.bias_index = std::make_shared<const std::vector<std::size_t>>(relative_position_index(window));

  const std::size_t s = window / 2;
  if (shift == ShiftMode::Half && s > 0) {
    const std::size_t wc = cols / window;
    auto mask = std::make_shared<std::vector<double>>(nw * m * m, 0.0);
    std::vector<std::size_t> label(m);
    for (std::size_t w = 0; w < nw; ++w) {
      const std::size_t wi = w / wc, wj = w % wc;
      for (std::size_t t = 0; t < m; ++t) {
        const std::size_t i = wi * window + t / window;
        const std::size_t j = wj * window + t % window;
        label[t] = region(i, rows, window, s) * 3 + region(j, cols, window, s);
      }
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b)
          if (label[a] != label[b]) (*mask)[(w * m + a) * m + b] = -std::numeric_limits<double>::infinity();
    }
    plan.layout.additive_mask = std::move(mask);
  }
  if (!validity.empty()) {
    auto keys = std::make_shared<std::vector<std::uint8_t>>(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) (*keys)[i] = validity[order[i]] ? 1 : 0;
    plan.layout.key_valid = std::move(keys);
  }
  plan.to_windows = std::make_shared<const std::vector<std::size_t>>(std::move(order));
  plan.from_windows = std::make_shared<const std::vector<std::size_t>>(std::move(inverse));
  return plan;
}

Tensor window_partition(const Tensor& grid, std::size_t window, ShiftMode shift) {
  if (grid.rank() != 3) throw std::invalid_argument("window_partition expects (rows, cols, C)");
  const std::size_t rows = grid.dim(0), cols = grid.dim(1), c = grid.dim(2);
  const auto order = window_order(rows, cols, window, shift);
  const std::size_t m = window * window;
  Tensor out({rows * cols / m, m, c});
  for (std::size_t i = 0; i < order.size(); ++i) std::copy_n(grid.raw() + order[i] * c, c, out.raw() + i * c);
  return out;
}

Tensor window_reverse(const Tensor& windows, std::size_t rows, std::size_t cols, std::size_t window, ShiftMode shift) {
  if (windows.rank() != 3 || windows.dim(0) * windows.dim(1) != rows * cols || windows.dim(1) != window * window)
    throw std::invalid_argument("window_reverse: windows tensor does not match the grid");
  const std::size_t c = windows.dim(2);
  const auto order = window_order(rows, cols, window, shift);
  Tensor out({rows, cols, c});
  for (std::size_t i = 0; i < order.size(); ++i) std::copy_n(windows.raw() + i * c, c, out.raw() + order[i] * c);
  return out;
}

// ---- forward -----------------------------------------------------------

ad::Var wmsa(ad::Var tokens, const BoundParams& params, const std::string& prefix,
             const ad::WindowAttentionLayout& layout) {
  ad::Var qkv = ad::linear(tokens, params[prefix + ".qkv.weight"], params[prefix + ".qkv.bias"]);
  ad::Var heads = ad::window_attention(qkv, params[prefix + ".rel_bias"], layout);
  return ad::linear(heads, params[prefix + ".proj.weight"], params[prefix + ".proj.bias"]);
}

ad::Var block_forward(ad::Var x, const BoundParams& params, const std::string& prefix, const WindowPlan& plan) {
  ad::Var h = ad::layer_norm(x, params[prefix + ".norm1.gain"], params[prefix + ".norm1.bias"]);
  h = ad::gather_rows(h, plan.to_windows);
  h = wmsa(h, params, prefix + ".attn", plan.layout);
  h = ad::gather_rows(h, plan.from_windows);
  x = ad::add(x, h);
  ad::Var f = ad::layer_norm(x, params[prefix + ".norm2.gain"], params[prefix + ".norm2.bias"]);
  f = ad::gelu(ad::linear(f, params[prefix + ".mlp.fc1.weight"], params[prefix + ".mlp.fc1.bias"]));
  f = ad::linear(f, params[prefix + ".mlp.fc2.weight"], params[prefix + ".mlp.fc2.bias"]);
  return ad::add(x, f);
}

GridContext GridContext::make(const ModelConfig& cfg, std::size_t rows, std::size_t cols,
                              std::span<const std::uint8_t> validity) {
  GridContext g;
  g.rows = rows;
  g.cols = cols;
  g.plain = make_window_plan(rows, cols, cfg.window_size, ShiftMode::None, cfg.heads, validity);
  g.shifted = make_window_plan(rows, cols, cfg.window_size, ShiftMode::Half, cfg.heads, validity);
  if (!validity.empty()) {
    bool all = true;
    for (std::uint8_t v : validity) all = all && v;
    if (!all) {
      auto mask = std::make_shared<std::vector<double>>(validity.size());
      for (std::size_t i = 0; i < validity.size(); ++i) (*mask)[i] = validity[i] ? 1.0 : 0.0;
      g.row_mask = std::move(mask);
    }
  }
  return g;
}

namespace {
ad::Var masked(ad::Var x, const GridContext& grid) { return grid.row_mask ? ad::mul_rows(x, grid.row_mask) : x; }
}  // namespace

ad::Var module_forward(ad::Var x, const BoundParams& params, std::size_t module_index, const GridContext& grid,
                       const ModelConfig& cfg) {
  ad::Var z = x;
  for (std::size_t l = 0; l < cfg.blocks_per_module; ++l) {
    const WindowPlan& plan = (l % 2 == 1) ? grid.shifted : grid.plain;
    z = block_forward(z, params, block_prefix(module_index, l), plan);
  }
  const std::string mp = "modules." + std::to_string(module_index) + ".conv";
  z = ad::conv2d(masked(z, grid), grid.rows, grid.cols, params[mp + ".weight"], params[mp + ".bias"]);
  return ad::add(x, masked(z, grid));
}

Backbone::Backbone(ModelConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

ad::Var Backbone::forward(ad::Graph& graph, const BoundParams& params, const Tensor& input, const FrameStructure& frame,
                          std::span<const std::uint8_t> validity) const {
  if (cfg_.patch_size != 1) throw std::invalid_argument("backbone forward supports patch_size 1 only");
  if (input.rank() != 3 || input.dim(2) != cfg_.in_channels)
    throw std::invalid_argument("backbone input " + shape_to_string(input.shape()) + " does not have " +
                                std::to_string(cfg_.in_channels) + " channels");
  const std::size_t rows = input.dim(0), cols = input.dim(1);
  if (frame.n_t > rows || frame.n_f > cols) throw std::invalid_argument("frame exceeds the input grid");
  if (2 * frame.n_rx() != cfg_.in_channels)
    throw std::invalid_argument("frame array size does not match model in_channels");

  const GridContext grid = GridContext::make(cfg_, rows, cols, validity);
  ad::Var x = graph.constant(input.reshaped({rows * cols, cfg_.in_channels}));
  x = masked(x, grid);
  x = ad::conv2d(x, rows, cols, params["embed.weight"], params["embed.bias"]);
  Tensor pe = fs_pe(frame, cfg_.fspe(), rows, cols);
  x = ad::add(x, graph.constant(std::move(pe).reshaped({rows * cols, cfg_.embed_dim})));
  x = masked(x, grid);
  for (std::size_t m = 0; m < cfg_.module_count; ++m) x = module_forward(x, params, m, grid, cfg_);
  x = ad::conv2d(masked(x, grid), rows, cols, params["proj.weight"], params["proj.bias"]);
  return masked(x, grid);
}

Tensor Backbone::infer(const ParamStore& params, const Tensor& input, const FrameStructure& frame,
                       std::span<const std::uint8_t> validity) const {
  ad::Graph graph;
  BoundParams bound(graph, params, false);
  ad::Var out = forward(graph, bound, input, frame, validity);
  return out.value().reshaped({input.dim(0), input.dim(1), cfg_.in_channels});
}

}  // namespace ddafm

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

#include "ddafm/autodiff.hpp"

#include <Eigen/Core>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace ddafm::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using Strided = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using CStrided = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

std::atomic<std::uint64_t> g_score_ops{0};

Graph* graph_of(Var a) {
  if (a.graph == nullptr) throw std::invalid_argument("variable is not attached to a graph");
  return a.graph;
}

Graph* common_graph(Var a, Var b) {
  if (graph_of(a) != graph_of(b)) throw std::invalid_argument("variables belong to different graphs");
  return a.graph;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                                " vs " + shape_to_string(b.shape()));
}

void require_rank2(const Tensor& a, const char* op) {
  if (a.rank() != 2) throw std::invalid_argument(std::string(op) + ": expected a 2-D tensor");
}

CMapMat as_mat(const Tensor& t) { return CMapMat(t.raw(), t.dim(0), t.dim(1)); }
MapMat as_mat(Tensor& t) { return MapMat(t.raw(), t.dim(0), t.dim(1)); }

template <typename F>
Var unary(Var a, F&& f, Graph::BackwardFn backward) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return graph_of(a)->record(std::move(out), {a}, std::move(backward));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

const Tensor& Var::value() const { return graph_of(*this)->value(*this); }

Var Graph::leaf(Tensor value, bool requires_grad) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return Var{this, nodes_.size() - 1};
}

Var Graph::record(Tensor value, std::vector<Var> parents, BackwardFn backward) {
  if (consumed_) throw std::logic_error("graph already consumed by backward()");
  Node n;
  n.value = std::move(value);
  n.parents.reserve(parents.size());
  for (Var p : parents) {
    if (p.graph != this) throw std::invalid_argument("parent belongs to a different graph");
    n.parents.push_back(p.id);
    n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Tensor* Graph::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  return &n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw std::invalid_argument("loss belongs to a different graph");
  if (consumed_) throw std::logic_error("graph already consumed by backward()");
  Node& root = nodes_.at(loss.id);
  if (root.value.size() != 1)
    throw std::logic_error("backward() requires a scalar loss, got shape " + shape_to_string(root.value.shape()));
  consumed_ = true;
  if (!root.requires_grad) return;
  grad_slot(loss.id)->fill(1.0);

  std::vector<Tensor*> slots;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.backward) continue;
    slots.clear();
    for (std::size_t p : n.parents) slots.push_back(grad_slot(p));
    n.backward(n.value, n.grad, slots);
    n.backward = nullptr;
    // Interior gradients are no longer needed once propagated.
    if (!n.parents.empty()) {
      n.grad = Tensor();
      n.has_grad = false;
    }
  }
}

const Tensor* Graph::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.has_grad ? &n.grad : nullptr;
}

// ---- elementwise -------------------------------------------------------

Var add(Var a, Var b) {
  Graph* g = common_graph(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  return g->record(std::move(out), {a, b}, [](const Tensor&, const Tensor& go, std::span<Tensor* const> pg) {
    for (Tensor* p : pg)
      if (p)
        for (std::size_t i = 0; i < go.size(); ++i) (*p)[i] += go[i];
  });
}

Var sub(Var a, Var b) {
  Graph* g = common_graph(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& y = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  return g->record(std::move(out), {a, b}, [](const Tensor&, const Tensor& go, std::span<Tensor* const> pg) {
    if (pg[0])
      for (std::size_t i = 0; i < go.size(); ++i) (*pg[0])[i] += go[i];
    if (pg[1])
      for (std::size_t i = 0; i < go.size(); ++i) (*pg[1])[i] -= go[i];
  });
}

Var mul(Var a, Var b) {
  Graph* g = common_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same_shape(x, y, "mul");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return g->record(std::move(out), {a, b}, [&x, &y](const Tensor&, const Tensor& go, std::span<Tensor* const> pg) {
    if (pg[0])
      for (std::size_t i = 0; i < go.size(); ++i) (*pg[0])[i] += go[i] * y[i];
    if (pg[1])
      for (std::size_t i = 0; i < go.size(); ++i) (*pg[1])[i] += go[i] * x[i];
  });
}

Var scale(Var a, double s) {
  return unary(a, [s](double v) { return s * v; },
               [s](const Tensor&, const Tensor& go, std::span<Tensor* const> pg) {
                 for (std::size_t i = 0; i < go.size(); ++i) (*pg[0])[i] += s * go[i];
               });
}

Var square(Var a) {
  const Tensor& x = a.value();
  return unary(a, [](double v) { return v * v; },
               [&x](const Tensor&, const Tensor& go, std::span<Tensor* const> pg) {
                 for (std::size_t i = 0; i < go.size(); ++i) (*pg[0])[i] += 2.0 * x[i] * go[i];
               });
}

Var sum(Var a) {
  const Tensor& x = a.value();
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return graph_of(a)->record(Tensor({1}, acc), {a}, [](const Tensor&, const Tensor& go, std::span<Tensor* const> pg) {
    const double g = go[0];
    for (double& v : pg[0]->data()) v += g;
  });
}

Var gelu(Var a) {
  const Tensor& x = a.value();
  return unary(a, [](double v) { return v * normal_cdf(v); },
               [&x](const Tensor&, const Tensor& go, std::span<Tensor* const> pg) {
                 for (std::size_t i = 0; i < go.size(); ++i) {
                   const double v = x[i];
                   (*pg[0])[i] += go[i] * (normal_cdf(v) + v * normal_pdf(v));
                 }
               });
}

Var tanh(Var a) {
  return unary(a, [](double v) { return std::tanh(v); },
               [](const Tensor& out, const Tensor& go, std::span<Tensor* const> pg) {
                 for (std::size_t i = 0; i < go.size(); ++i) (*pg[0])[i] += go[i] * (1.0 - out[i] * out[i]);
               });
}

Var exp(Var a) {
  return unary(a, [](double v) { return std::exp(v); },
               [](const Tensor& out, const Tensor& go, std::span<Tensor* const> pg) {
                 for (std::size_t i = 0; i < go.size(); ++i) (*pg[0])[i] += go[i] * out[i];
               });
}

// ---- row-matrix ops ----------------------------------------------------

Var matmul(Var a, Var b) {
  Graph* g = common_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& w = b.value();
  require_rank2(x, "matmul");
  require_rank2(w, "matmul");
  if (x.dim(1) != w.dim(0)) throw std::invalid_argument("matmul: inner dimensions differ");
  Tensor out({x.dim(0), w.dim(1)});
  as_mat(out).noalias() = as_mat(x) * as_mat(w);
  return g->record(std::move(out), {a, b}, [&x, &w](const Tensor&, const Tensor& go, std::span<Tensor* const> pg) {
    if (pg[0]) as_mat(*pg[0]).noalias() += as_mat(go) * as_mat(w).transpose();
    if (pg[1]) as_mat(*pg[1]).noalias() += as_mat(x).transpose() * as_mat(go);
  });
}

Var linear(Var x_var, Var w_var, Var b_var) {
  Graph* g = common_graph(x_var, w_var);
  common_graph(x_var, b_var);
  const Tensor& x = x_var.value();
  const Tensor& w = w_var.value();
  const Tensor& b = b_var.value();
  require_rank2(x, "linear");
  require_rank2(w, "linear");
  if (x.dim(1) != w.dim(0)) throw std::invalid_argument("linear: input width does not match weight rows");
  if (b.size() != w.dim(1)) throw std::invalid_argument("linear: bias length does not match weight columns");
  Tensor out({x.dim(0), w.dim(1)});
  auto om = as_mat(out);
  om.noalias() = as_mat(x) * as_mat(w);
  om.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.raw(), static_cast<Eigen::Index>(b.size()));
  return g->record(std::move(out), {x_var, w_var, b_var},
                   [&x, &w](const Tensor&, const Tensor& go, std::span<Tensor* const> pg) {
                     if (pg[0]) as_mat(*pg[0]).noalias() += as_mat(go) * as_mat(w).transpose();
                     if (pg[1]) as_mat(*pg[1]).noalias() += as_mat(x).transpose() * as_mat(go);
                     if (pg[2])
                       Eigen::Map<Eigen::RowVectorXd>(pg[2]->raw(), static_cast<Eigen::Index>(pg[2]->size())) +=
                           as_mat(go).colwise().sum();
                   });
}

Var add_row_vector(Var x_var, Var b_var) {
  Graph* g = common_graph(x_var, b_var);
  const Tensor& x = x_var.value();
  const Tensor& b = b_var.value();
  require_rank2(x, "add_row_vector");
  if (b.size() != x.dim(1)) throw std::invalid_argument("add_row_vector: length mismatch");
  Tensor out = x;
  as_mat(out).rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.raw(), static_cast<Eigen::Index>(b.size()));
  return g->record(std::move(out), {x_var, b_var}, [](const Tensor&, const Tensor& go, std::span<Tensor* const> pg) {
    if (pg[0]) as_mat(*pg[0]) += as_mat(go);
    if (pg[1])
      Eigen::Map<Eigen::RowVectorXd>(pg[1]->raw(), static_cast<Eigen::Index>(pg[1]->size())) +=
          as_mat(go).colwise().sum();
  });
}

Var mul_rows(Var x_var, std::shared_ptr<const std::vector<double>> mask) {
  const Tensor& x = x_var.value();
  require_rank2(x, "mul_rows");
  if (!mask || mask->size() != x.dim(0)) throw std::invalid_argument("mul_rows: mask length mismatch");
  const std::size_t cols = x.dim(1);
  Tensor out = x;
  for (std::size_t r = 0; r < x.dim(0); ++r) {
    const double m = (*mask)[r];
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] *= m;
  }
  return graph_of(x_var)->record(std::move(out), {x_var},
                                 [mask, cols](const Tensor&, const Tensor& go, std::span<Tensor* const> pg) {
                                   for (std::size_t r = 0; r < mask->size(); ++r) {
                                     const double m = (*mask)[r];
                                     for (std::size_t c = 0; c < cols; ++c) (*pg[0])[r * cols + c] += m * go[r * cols + c];
                                   }
                                 });
}

Var gather_rows(Var x_var, std::shared_ptr<const std::vector<std::size_t>> index) {
  const Tensor& x = x_var.value();
  require_rank2(x, "gather_rows");
  if (!index) throw std::invalid_argument("gather_rows: null index");
  const std::size_t cols = x.dim(1);
  Tensor out({index->size(), cols});
  for (std::size_t r = 0; r < index->size(); ++r) {
    const std::size_t src = (*index)[r];
    if (src >= x.dim(0)) throw std::out_of_range("gather_rows: index out of range");
    std::copy_n(x.raw() + src * cols, cols, out.raw() + r * cols);
  }
  return graph_of(x_var)->record(std::move(out), {x_var},
                                 [index, cols](const Tensor&, const Tensor& go, std::span<Tensor* const> pg) {
                                   for (std::size_t r = 0; r < index->size(); ++r) {
                                     double* dst = pg[0]->raw() + (*index)[r] * cols;
                                     const double* src = go.raw() + r * cols;
                                     for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
                                   }
                                 });
}

Var layer_norm(Var x_var, Var gain_var, Var bias_var, double eps) {
  Graph* g = common_graph(x_var, gain_var);
  common_graph(x_var, bias_var);
  const Tensor& x = x_var.value();
  const Tensor& gain = gain_var.value();
  const Tensor& bias = bias_var.value();
  require_rank2(x, "layer_norm");
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  if (gain.size() != cols || bias.size() != cols) throw std::invalid_argument("layer_norm: parameter length mismatch");

  auto xhat = std::make_shared<Tensor>(x.shape());
  auto rstd = std::make_shared<std::vector<double>>(rows);
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.raw() + r * cols;
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += xr[c];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= static_cast<double>(cols);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (xr[c] - mean) * rs;
      (*xhat)[r * cols + c] = h;
      out[r * cols + c] = h * gain[c] + bias[c];
    }
  }
  return g->record(std::move(out), {x_var, gain_var, bias_var},
                   [xhat, rstd, &gain, rows, cols](const Tensor&, const Tensor& go, std::span<Tensor* const> pg) {
                     const double inv_n = 1.0 / static_cast<double>(cols);
                     for (std::size_t r = 0; r < rows; ++r) {
                       const double* gr = go.raw() + r * cols;
                       const double* hr = xhat->raw() + r * cols;
                       if (pg[1])
                         for (std::size_t c = 0; c < cols; ++c) (*pg[1])[c] += gr[c] * hr[c];
                       if (pg[2])
                         for (std::size_t c = 0; c < cols; ++c) (*pg[2])[c] += gr[c];
                       if (pg[0]) {
                         double mean_dh = 0.0;
                         double mean_dh_h = 0.0;
                         for (std::size_t c = 0; c < cols; ++c) {
                           const double dh = gr[c] * gain[c];
                           mean_dh += dh;
                           mean_dh_h += dh * hr[c];
                         }
                         mean_dh *= inv_n;
                         mean_dh_h *= inv_n;
                         double* dx = pg[0]->raw() + r * cols;
                         const double rs = (*rstd)[r];
                         for (std::size_t c = 0; c < cols; ++c)
                           dx[c] += rs * (gr[c] * gain[c] - mean_dh - hr[c] * mean_dh_h);
                       }
                     }
                   });
}

Var softmax_rows(Var a) {
  const Tensor& x = a.value();
  require_rank2(x, "softmax_rows");
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.raw() + r * cols;
    double* yr = out.raw() + r * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, xr[c]);
    if (!std::isfinite(mx)) continue;
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (yr[c] = std::exp(xr[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) yr[c] /= z;
  }
  return graph_of(a)->record(std::move(out), {a}, [rows, cols](const Tensor& p, const Tensor& go, std::span<Tensor* const> pg) {
    for (std::size_t r = 0; r < rows; ++r) {
      const double* pr = p.raw() + r * cols;
      const double* gr = go.raw() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += pr[c] * gr[c];
      double* dx = pg[0]->raw() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) dx[c] += pr[c] * (gr[c] - dot);
    }
  });
}

// ---- convolution -------------------------------------------------------

namespace {

// col[(r*cols + c), ((dy*k + dx)*cin + ci)] = x[(r+dy-h, c+dx-h), ci] or 0.
void im2col(const Tensor& x, std::size_t rows, std::size_t cols, std::size_t k, RowMat& col) {
  const std::size_t cin = x.dim(1);
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(k / 2);
  col.setZero(static_cast<Eigen::Index>(rows * cols), static_cast<Eigen::Index>(k * k * cin));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double* dst = col.data() + (r * cols + c) * k * k * cin;
      for (std::size_t dy = 0; dy < k; ++dy) {
        const std::ptrdiff_t sr = static_cast<std::ptrdiff_t>(r + dy) - half;
        if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(rows)) continue;
        for (std::size_t dx = 0; dx < k; ++dx) {
          const std::ptrdiff_t sc = static_cast<std::ptrdiff_t>(c + dx) - half;
          if (sc < 0 || sc >= static_cast<std::ptrdiff_t>(cols)) continue;
          std::copy_n(x.raw() + (static_cast<std::size_t>(sr) * cols + static_cast<std::size_t>(sc)) * cin, cin,
                      dst + (dy * k + dx) * cin);
        }
      }
    }
  }
}

void col2im_add(const RowMat& col, std::size_t rows, std::size_t cols, std::size_t k, Tensor& dx) {
  const std::size_t cin = dx.dim(1);
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(k / 2);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double* src = col.data() + (r * cols + c) * k * k * cin;
      for (std::size_t dy = 0; dy < k; ++dy) {
        const std::ptrdiff_t sr = static_cast<std::ptrdiff_t>(r + dy) - half;
        if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(rows)) continue;
        for (std::size_t dxi = 0; dxi < k; ++dxi) {
          const std::ptrdiff_t sc = static_cast<std::ptrdiff_t>(c + dxi) - half;
          if (sc < 0 || sc >= static_cast<std::ptrdiff_t>(cols)) continue;
          double* dst = dx.raw() + (static_cast<std::size_t>(sr) * cols + static_cast<std::size_t>(sc)) * cin;
          const double* s = src + (dy * k + dxi) * cin;
          for (std::size_t ci = 0; ci < cin; ++ci) dst[ci] += s[ci];
        }
      }
    }
  }
}

}  // namespace

Var conv2d(Var x_var, std::size_t rows, std::size_t cols, Var w_var, Var b_var) {
  Graph* g = common_graph(x_var, w_var);
  common_graph(x_var, b_var);
  const Tensor& x = x_var.value();
  const Tensor& w = w_var.value();
  const Tensor& b = b_var.value();
  require_rank2(x, "conv2d");
  if (x.dim(0) != rows * cols) throw std::invalid_argument("conv2d: token count does not match grid");
  if (w.rank() != 4 || w.dim(0) != w.dim(1) || w.dim(0) % 2 == 0)
    throw std::invalid_argument("conv2d: weight must be [k,k,cin,cout] with odd k");
  const std::size_t k = w.dim(0);
  const std::size_t cin = w.dim(2);
  const std::size_t cout = w.dim(3);
  if (x.dim(1) != cin) throw std::invalid_argument("conv2d: channel mismatch");
  if (b.size() != cout) throw std::invalid_argument("conv2d: bias length mismatch");

  RowMat col;
  im2col(x, rows, cols, k, col);
  CMapMat wm(w.raw(), static_cast<Eigen::Index>(k * k * cin), static_cast<Eigen::Index>(cout));
  Tensor out({rows * cols, cout});
  auto om = as_mat(out);
  om.noalias() = col * wm;
  om.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.raw(), static_cast<Eigen::Index>(cout));

  return g->record(std::move(out), {x_var, w_var, b_var},
                   [&x, &w, rows, cols, k, cin, cout](const Tensor&, const Tensor& go, std::span<Tensor* const> pg) {
                     CMapMat wmat(w.raw(), static_cast<Eigen::Index>(k * k * cin), static_cast<Eigen::Index>(cout));
                     if (pg[1]) {
                       RowMat c;
                       im2col(x, rows, cols, k, c);
                       MapMat(pg[1]->raw(), wmat.rows(), wmat.cols()).noalias() += c.transpose() * as_mat(go);
                     }
                     if (pg[2])
                       Eigen::Map<Eigen::RowVectorXd>(pg[2]->raw(), static_cast<Eigen::Index>(cout)) +=
                           as_mat(go).colwise().sum();
                     if (pg[0]) {
                       RowMat dcol = as_mat(go) * wmat.transpose();
                       col2im_add(dcol, rows, cols, k, *pg[0]);
                     }
                   });
}

// ---- window attention --------------------------------------------------

Var window_attention(Var qkv_var, Var table_var, const WindowAttentionLayout& layout) {
  Graph* g = common_graph(qkv_var, table_var);
  const Tensor& qkv = qkv_var.value();
  const Tensor& table = table_var.value();
  require_rank2(qkv, "window_attention");
  const std::size_t m = layout.window_tokens;
  const std::size_t nw = layout.windows;
  const std::size_t heads = layout.heads;
  if (m == 0 || heads == 0) throw std::invalid_argument("window_attention: empty layout");
  if (qkv.dim(0) != nw * m) throw std::invalid_argument("window_attention: token count does not match windows*M");
  if (qkv.dim(1) % (3 * heads) != 0) throw std::invalid_argument("window_attention: width not divisible by 3*heads");
  const std::size_t c = qkv.dim(1) / 3;
  const std::size_t dh = c / heads;
  if (!layout.bias_index || layout.bias_index->size() != m * m)
    throw std::invalid_argument("window_attention: bias index must have M*M entries");
  if (table.rank() != 2 || table.dim(1) != heads)
    throw std::invalid_argument("window_attention: bias table must be [rows, heads]");
  for (std::size_t idx : *layout.bias_index)
    if (idx >= table.dim(0)) throw std::out_of_range("window_attention: bias index out of range");
  if (layout.additive_mask && layout.additive_mask->size() != nw * m * m)
    throw std::invalid_argument("window_attention: additive mask size mismatch");
  if (layout.key_valid && layout.key_valid->size() != nw * m)
    throw std::invalid_argument("window_attention: key validity size mismatch");

  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const Eigen::Index ld = static_cast<Eigen::Index>(3 * c);
  const Eigen::Index em = static_cast<Eigen::Index>(m);
  const Eigen::Index edh = static_cast<Eigen::Index>(dh);
  const double neg_inf = -std::numeric_limits<double>::infinity();

  auto probs = std::make_shared<Tensor>(Shape{nw, heads, m, m});
  Tensor out({nw * m, c});
  RowMat scores(em, em);
  for (std::size_t w = 0; w < nw; ++w) {
    const double* base = qkv.raw() + w * m * 3 * c;
    for (std::size_t h = 0; h < heads; ++h) {
      CStrided q(base + h * dh, em, edh, Eigen::OuterStride<>(ld));
      CStrided kk(base + c + h * dh, em, edh, Eigen::OuterStride<>(ld));
      CStrided v(base + 2 * c + h * dh, em, edh, Eigen::OuterStride<>(ld));
      scores.noalias() = inv_sqrt * (q * kk.transpose());
      double* p = probs->raw() + (w * heads + h) * m * m;
      for (std::size_t i = 0; i < m; ++i) {
        double mx = neg_inf;
        for (std::size_t j = 0; j < m; ++j) {
          double s = scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +
                     table[(*layout.bias_index)[i * m + j] * heads + h];
          if (layout.additive_mask) s += (*layout.additive_mask)[(w * m + i) * m + j];
          if (layout.key_valid && !(*layout.key_valid)[w * m + j]) s = neg_inf;
          p[i * m + j] = s;
          mx = std::max(mx, s);
        }
        if (!std::isfinite(mx)) {
          std::fill_n(p + i * m, m, 0.0);
          continue;
        }
        double z = 0.0;
        for (std::size_t j = 0; j < m; ++j) z += (p[i * m + j] = std::exp(p[i * m + j] - mx));
        for (std::size_t j = 0; j < m; ++j) p[i * m + j] /= z;
      }
      Strided o(out.raw() + w * m * c + h * dh, em, edh, Eigen::OuterStride<>(static_cast<Eigen::Index>(c)));
      o.noalias() = CMapMat(p, em, em) * v;
    }
  }
  g_score_ops.fetch_add(static_cast<std::uint64_t>(nw * heads * m * m * dh), std::memory_order_relaxed);

  auto bias_index = layout.bias_index;
  return g->record(
      std::move(out), {qkv_var, table_var},
      [probs, bias_index, &qkv, nw, heads, m, c, dh, inv_sqrt](const Tensor&, const Tensor& go,
                                                               std::span<Tensor* const> pg) {
        const Eigen::Index ld = static_cast<Eigen::Index>(3 * c);
        const Eigen::Index em = static_cast<Eigen::Index>(m);
        const Eigen::Index edh = static_cast<Eigen::Index>(dh);
        RowMat dp(em, em);
        for (std::size_t w = 0; w < nw; ++w) {
          const double* base = qkv.raw() + w * m * 3 * c;
          for (std::size_t h = 0; h < heads; ++h) {
            CStrided q(base + h * dh, em, edh, Eigen::OuterStride<>(ld));
            CStrided kk(base + c + h * dh, em, edh, Eigen::OuterStride<>(ld));
            CStrided v(base + 2 * c + h * dh, em, edh, Eigen::OuterStride<>(ld));
            CStrided dout(go.raw() + w * m * c + h * dh, em, edh, Eigen::OuterStride<>(static_cast<Eigen::Index>(c)));
            CMapMat p(probs->raw() + (w * heads + h) * m * m, em, em);

            dp.noalias() = dout * v.transpose();
            // dS = P .* (dP - rowsum(dP .* P))
            for (Eigen::Index i = 0; i < em; ++i) {
              const double dot = p.row(i).dot(dp.row(i));
              for (Eigen::Index j = 0; j < em; ++j) dp(i, j) = p(i, j) * (dp(i, j) - dot);
            }
            if (pg[0]) {
              double* gbase = pg[0]->raw() + w * m * 3 * c;
              Strided dq(gbase + h * dh, em, edh, Eigen::OuterStride<>(ld));
              Strided dk(gbase + c + h * dh, em, edh, Eigen::OuterStride<>(ld));
              Strided dv(gbase + 2 * c + h * dh, em, edh, Eigen::OuterStride<>(ld));
              dv.noalias() += p.transpose() * dout;
              dq.noalias() += inv_sqrt * (dp * kk);
              dk.noalias() += inv_sqrt * (dp.transpose() * q);
            }
            if (pg[1]) {
              double* tb = pg[1]->raw();
              for (std::size_t ij = 0; ij < m * m; ++ij) tb[(*bias_index)[ij] * heads + h] += dp.data()[ij];
            }
          }
        }
      });
}

std::uint64_t attention_score_ops() { return g_score_ops.load(std::memory_order_relaxed); }
void reset_attention_score_ops() { g_score_ops.store(0, std::memory_order_relaxed); }

}  // namespace ddafm::ad

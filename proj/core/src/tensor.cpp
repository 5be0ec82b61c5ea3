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

#include "ddafm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ddafm {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

double frobenius_norm(const Tensor& t) {
  double acc = 0.0;
  for (double v : t.data()) acc += v * v;
  return std::sqrt(acc);
}

double squared_norm(const CTensor& t) {
  double acc = 0.0;
  for (const cdouble& v : t.data()) acc += std::norm(v);
  return acc;
}

double frobenius_norm(const CTensor& t) { return std::sqrt(squared_norm(t)); }

namespace {
template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("shape mismatch: " + shape_to_string(a.shape()) + " vs " +
                                shape_to_string(b.shape()));
}
}  // namespace

double max_relative_error(const CTensor& a, const CTensor& b) {
  require_same_shape(a, b);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return num / std::max(den, 1e-300);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs_diff(const CTensor& a, const CTensor& b) {
  require_same_shape(a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace ddafm

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

#include "ddafm/fft.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace ddafm {
namespace {

struct FftPlan {
  std::size_t n = 0;
  std::vector<std::size_t> factors;
  std::vector<cdouble> twiddle;  // exp(-j2*pi*i/n)
};

FftPlan make_plan(std::size_t n) {
  FftPlan plan;
  plan.n = n;
  std::size_t rest = n;
  for (std::size_t p = 2; p * p <= rest; ++p) {
    while (rest % p == 0) {
      plan.factors.push_back(p);
      rest /= p;
    }
  }
  if (rest > 1) plan.factors.push_back(rest);
  plan.twiddle.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    plan.twiddle[i] = {std::cos(angle), std::sin(angle)};
  }
  return plan;
}

const FftPlan& plan_for(std::size_t n) {
  thread_local std::unordered_map<std::size_t, FftPlan> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_plan(n)).first;
  return it->second;
}

class Recursion {
 public:
  Recursion(const FftPlan& plan, bool inverse) : plan_(plan), inverse_(inverse) {}

  void run(const cdouble* in, std::size_t stride, cdouble* out, std::size_t n, std::size_t level) {
    if (n == 1) {
      out[0] = in[0];
      return;
    }
    const std::size_t p = plan_.factors[level];
    const std::size_t m = n / p;
    for (std::size_t q = 0; q < p; ++q) run(in + q * stride, stride * p, out + q * m, m, level + 1);

    const std::size_t step = plan_.n / n;
    if (p == 2) {
      for (std::size_t k = 0; k < m; ++k) {
        const cdouble a = out[k];
        const cdouble b = out[m + k] * w(k * step);
        out[k] = a + b;
        out[m + k] = a - b;
      }
      return;
    }
    std::vector<cdouble> t(p);
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t q = 0; q < p; ++q) t[q] = out[q * m + k] * w(q * k * step);
      for (std::size_t r = 0; r < p; ++r) {
        cdouble acc = t[0];
        for (std::size_t q = 1; q < p; ++q) acc += t[q] * w((q * r * m * step) % plan_.n);
        out[r * m + k] = acc;
      }
    }
  }

 private:
  cdouble w(std::size_t i) const { return inverse_ ? std::conj(plan_.twiddle[i]) : plan_.twiddle[i]; }

  const FftPlan& plan_;
  bool inverse_;
};

}  // namespace

namespace fault {
namespace {
std::atomic<bool> g_sign_flip{false};
}
void set_fft_sign_flip(bool on) noexcept { g_sign_flip.store(on, std::memory_order_relaxed); }
bool fft_sign_flip() noexcept { return g_sign_flip.load(std::memory_order_relaxed); }
}  // namespace fault

void fft_inplace(std::span<cdouble> x, FftDirection direction) {
  const std::size_t n = x.size();
  if (n <= 1) return;
  const FftPlan& plan = plan_for(n);
  std::vector<cdouble> in(x.begin(), x.end());
  Recursion(plan, (direction == FftDirection::Inverse) != fault::fft_sign_flip()).run(in.data(), 1, x.data(), n, 0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (cdouble& v : x) v *= scale;
}

void fft_axis_inplace(CTensor& t, std::size_t axis, FftDirection direction) {
  if (axis >= t.rank())
    throw std::out_of_range("fft axis " + std::to_string(axis) + " out of range for rank " +
                            std::to_string(t.rank()));
  const Shape& shape = t.shape();
  const std::size_t n = shape[axis];
  if (n == 0) throw std::invalid_argument("fft axis extent must be >= 1");
  if (n == 1) return;
  std::size_t inner = 1;
  for (std::size_t a = axis + 1; a < shape.size(); ++a) inner *= shape[a];
  std::size_t outer = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= shape[a];

  std::vector<cdouble> line(n);
  cdouble* base = t.raw();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      cdouble* start = base + o * n * inner + i;
      for (std::size_t k = 0; k < n; ++k) line[k] = start[k * inner];
      fft_inplace(line, direction);
      for (std::size_t k = 0; k < n; ++k) start[k * inner] = line[k];
    }
  }
}

CTensor fft_axis(const CTensor& t, std::size_t axis, FftDirection direction) {
  CTensor out = t;
  fft_axis_inplace(out, axis, direction);
  return out;
}

}  // namespace ddafm

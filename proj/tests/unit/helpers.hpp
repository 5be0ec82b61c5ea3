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

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "ddafm/autodiff.hpp"
#include "ddafm/channel.hpp"
#include "ddafm/csi.hpp"
#include "ddafm/tensor.hpp"

namespace ddafm::testing {

inline CTensor random_ctensor(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  CTensor t(shape);
  for (auto& v : t.data()) v = {g(rng), g(rng)};
  return t;
}

inline Tensor random_tensor(const Shape& shape, std::uint64_t seed, double stddev = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, stddev);
  Tensor t(shape);
  for (auto& v : t.data()) v = g(rng);
  return t;
}

inline CsiTensor random_stf(const FrameStructure& f, std::uint64_t seed) {
  return CsiTensor(Domain::STF, f, random_ctensor(f.tensor_shape(), seed));
}

inline FrameStructure small_frame(std::size_t n_t, std::size_t n_f, std::size_t r1 = 2, std::size_t r2 = 2) {
  return {n_t, 0.5e-3, n_f, 0.36e6, r1, r2};
}

/// O(N^2) DFT with the given exponent sign and 1/sqrt(N).
inline std::vector<cdouble> naive_dft(const std::vector<cdouble>& x, int sign) {
  const std::size_t n = x.size();
  std::vector<cdouble> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cdouble acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = sign * 2.0 * std::numbers::pi * static_cast<double>((k * i) % n) / static_cast<double>(n);
      acc += x[i] * cdouble(std::cos(a), std::sin(a));
    }
    out[k] = acc / std::sqrt(static_cast<double>(n));
  }
  return out;
}

/// Direct quadruple sum of the STF -> DDA map.
inline CTensor naive_stf_to_dda(const CTensor& h) {
  const std::size_t nt = h.dim(0), nf = h.dim(1), r1 = h.dim(2), r2 = h.dim(3);
  CTensor out(h.shape());
  const double pref = 1.0 / std::sqrt(static_cast<double>(nt * nf * r1 * r2));
  const double tau = 2.0 * std::numbers::pi;
  for (std::size_t v = 0; v < nt; ++v)
    for (std::size_t t = 0; t < nf; ++t)
      for (std::size_t q1 = 0; q1 < r1; ++q1)
        for (std::size_t q2 = 0; q2 < r2; ++q2) {
          cdouble acc = 0.0;
          for (std::size_t s = 0; s < nt; ++s)
            for (std::size_t k = 0; k < nf; ++k)
              for (std::size_t n1 = 0; n1 < r1; ++n1)
                for (std::size_t n2 = 0; n2 < r2; ++n2) {
                  const double ph = -tau * (static_cast<double>(v * s) / nt - static_cast<double>(t * k) / nf +
                                            static_cast<double>(q1 * n1) / r1 + static_cast<double>(q2 * n2) / r2);
                  acc += h.at({s, k, n1, n2}) * cdouble(std::cos(ph), std::sin(ph));
                }
          out.at({v, t, q1, q2}) = pref * acc;
        }
  return out;
}

inline double rel_err(const CTensor& a, const CTensor& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

/// Builds a graph from leaves, reduces the output to a scalar with a fixed
/// random weighting, and compares reverse-mode gradients against central
/// differences on `probes` random entries. Returns the worst relative error
/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline double finite_difference_error(const std::function<ad::Var(ad::Graph&, const std::vector<ad::Var>&)>& build,
                                      std::vector<Tensor> inputs, std::size_t probes, std::uint64_t seed,
                                      double h = 1e-6, double floor = 1e-6) {
  Tensor weights;
  auto evaluate = [&](const std::vector<Tensor>& in, std::vector<Tensor>* grads) {
    ad::Graph g;
    std::vector<ad::Var> leaves;
    for (const Tensor& t : in) leaves.push_back(g.leaf(t, grads != nullptr));
    ad::Var out = build(g, leaves);
    if (weights.empty()) weights = random_tensor(out.shape(), seed ^ 0x5eed);
    ad::Var loss = ad::sum(ad::mul(out, g.constant(weights)));
    const double value = loss.value()[0];
    if (grads) {
      g.backward(loss);
      for (const ad::Var& l : leaves) {
        const Tensor* gr = g.grad(l);
        grads->push_back(gr ? *gr : Tensor(l.shape(), 0.0));
      }
    }
    return value;
  };
  std::vector<Tensor> grads;
  evaluate(inputs, &grads);

  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t p = 0; p < probes; ++p) {
    const std::size_t which = std::uniform_int_distribution<std::size_t>(0, inputs.size() - 1)(rng);
    const std::size_t idx = std::uniform_int_distribution<std::size_t>(0, inputs[which].size() - 1)(rng);
    const double keep = inputs[which][idx];
    inputs[which][idx] = keep + h;
    const double up = evaluate(inputs, nullptr);
    inputs[which][idx] = keep - h;
    const double down = evaluate(inputs, nullptr);
    inputs[which][idx] = keep;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = grads[which][idx];
    const double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace ddafm::testing

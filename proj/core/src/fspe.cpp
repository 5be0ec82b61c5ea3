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

#include "ddafm/fspe.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ddafm {

void FsPeConfig::validate() const {
  if (embed_dim == 0 || embed_dim % 4 != 0)
    throw std::invalid_argument("fspe.embed_dim must be a positive multiple of 4");
  if (!(sigma > 1.0)) throw std::invalid_argument("fspe.sigma must exceed 1");
  if (!(ref_res_tau > 0.0)) throw std::invalid_argument("fspe.ref_res_tau must be positive");
  if (!(ref_res_nu > 0.0)) throw std::invalid_argument("fspe.ref_res_nu must be positive");
  if (patch_size < 1) throw std::invalid_argument("fspe.patch_size must be >= 1");
}

Resolutions resolutions(const FrameStructure& frame) {
  frame.validate();
  return {1.0 / (static_cast<double>(frame.n_f) * frame.df), 1.0 / (static_cast<double>(frame.n_t) * frame.dt)};
}

Tensor fs_pe(const FrameStructure& frame, const FsPeConfig& cfg, std::size_t rows, std::size_t cols) {
  cfg.validate();
  const std::size_t p = cfg.patch_size;
  if (frame.n_t % p != 0 || frame.n_f % p != 0)
    throw std::invalid_argument("frame extents " + std::to_string(frame.n_t) + "x" + std::to_string(frame.n_f) +
                                " are not divisible by patch size " + std::to_string(p));
  if (rows == 0) rows = frame.n_t / p;
  if (cols == 0) cols = frame.n_f / p;

  const Resolutions r = resolutions(frame);
  const double step_nu = static_cast<double>(p) * r.nu / cfg.ref_res_nu;
  const double step_tau = static_cast<double>(p) * r.tau / cfg.ref_res_tau;
  const std::size_t c = cfg.embed_dim;
  const std::size_t pairs = c / 4;

  std::vector<double> omega(pairs);
  for (std::size_t l = 0; l < pairs; ++l)
    omega[l] = std::pow(cfg.sigma, -static_cast<double>(l) / static_cast<double>(pairs));

  Tensor out({rows, cols, c});
  for (std::size_t i = 0; i < rows; ++i) {
    const double u = static_cast<double>(i) * step_nu;
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = static_cast<double>(j) * step_tau;
      double* cell = out.raw() + (i * cols + j) * c;
      for (std::size_t l = 0; l < pairs; ++l) {
        cell[2 * l] = std::sin(u * omega[l]);
        cell[2 * l + 1] = std::cos(u * omega[l]);
        cell[c / 2 + 2 * l] = std::sin(v * omega[l]);
        cell[c / 2 + 2 * l + 1] = std::cos(v * omega[l]);
      }
    }
  }
  return out;
}

}  // namespace ddafm

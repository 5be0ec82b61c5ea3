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

#include "ddafm/csi.hpp"

namespace ddafm {

/// Frame-structure positional encoding settings.
struct FsPeConfig {
  double ref_res_tau = 1.36e-9;  // s
  double ref_res_nu = 3.15;      // Hz
  std::size_t embed_dim = 64;    // C, divisible by 4
  std::size_t patch_size = 1;    // P
  double sigma = 10000.0;        // frequency base

  void validate() const;
};

struct Resolutions {
  double tau;  // 1 / (N_f df), s
  double nu;   // 1 / (N_t dt), Hz
};

Resolutions resolutions(const FrameStructure& frame);

/// Sinusoidal encoding of resolution-normalized Doppler/delay coordinates.
///
/// Output is (rows, cols, C). The patch at (n_v, n_t) sits at continuous
/// coordinates u = n_v P r_nu/r_nu_ref and v = n_t P r_tau/r_tau_ref. With
/// L = C/4 and w_l = sigma^(-l/L), channels [0, C/2) hold
/// (sin(u w_l), cos(u w_l)) pairs for l = 0..L-1 and [C/2, C) the same for v.
/// rows/cols default to N_t/P and N_f/P; larger values extend the grid (for
/// padded batches). Throws std::invalid_argument when N_t or N_f is not
/// divisible by P.
Tensor fs_pe(const FrameStructure& frame, const FsPeConfig& cfg, std::size_t rows = 0, std::size_t cols = 0);

}  // namespace ddafm

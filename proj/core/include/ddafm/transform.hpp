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

/// STF -> DDA reparameterization:
///   H_dda[v,t,q1,q2] = (N_t N_f N_rx)^-1/2 sum H_stf[s,k,n1,n2]
///                      exp(-j2pi(v s/N_t - t k/N_f + q1 n1/N_rx1 + q2 n2/N_rx2))
/// i.e. unitary forward DFTs along time and both array axes and a unitary
/// inverse DFT along frequency. Throws std::invalid_argument unless h is STF.
CsiTensor stf_to_dda(const CsiTensor& h);

/// Exact inverse of stf_to_dda. Throws std::invalid_argument unless h is DDA.
CsiTensor dda_to_stf(const CsiTensor& h);

/// Packs a complex (A, B, n_rx1, n_rx2) tensor into a real (A, B, 2*n_rx)
/// tensor: the array axes are flattened n1-major, real parts fill channels
/// [0, n_rx) and imaginary parts [n_rx, 2 n_rx).
Tensor realify(const CTensor& h);
/// realify for DDA-domain CSI. Throws unless h is DDA.
Tensor realify(const CsiTensor& h);

/// Inverse of realify onto the array geometry of `frame`.
/// Throws std::invalid_argument for an odd channel extent or a shape that does
/// not match the frame.
CsiTensor complexify(const Tensor& x, const FrameStructure& frame);

}  // namespace ddafm

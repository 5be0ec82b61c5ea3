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

#include "ddafm/transform.hpp"

#include <stdexcept>

#include "ddafm/fft.hpp"

namespace ddafm {

CsiTensor stf_to_dda(const CsiTensor& h) {
  if (h.domain != Domain::STF) throw std::invalid_argument("stf_to_dda expects an STF-domain tensor");
  CsiTensor out(Domain::DDA, h.frame, h.data);
  fft_axis_inplace(out.data, 0, FftDirection::Forward);
  fft_axis_inplace(out.data, 1, FftDirection::Inverse);
  fft_axis_inplace(out.data, 2, FftDirection::Forward);
  fft_axis_inplace(out.data, 3, FftDirection::Forward);
  return out;
}

CsiTensor dda_to_stf(const CsiTensor& h) {
  if (h.domain != Domain::DDA) throw std::invalid_argument("dda_to_stf expects a DDA-domain tensor");
  CsiTensor out(Domain::STF, h.frame, h.data);
  fft_axis_inplace(out.data, 0, FftDirection::Inverse);
  fft_axis_inplace(out.data, 1, FftDirection::Forward);
  fft_axis_inplace(out.data, 2, FftDirection::Inverse);
  fft_axis_inplace(out.data, 3, FftDirection::Inverse);
  return out;
}

Tensor realify(const CTensor& h) {
  if (h.rank() != 4) throw std::invalid_argument("realify expects a rank-4 tensor");
  const std::size_t cells = h.dim(0) * h.dim(1);
  const std::size_t nrx = h.dim(2) * h.dim(3);
  Tensor out({h.dim(0), h.dim(1), 2 * nrx});
  for (std::size_t c = 0; c < cells; ++c) {
    const cdouble* src = h.raw() + c * nrx;
    double* dst = out.raw() + c * 2 * nrx;
    for (std::size_t r = 0; r < nrx; ++r) {
      dst[r] = src[r].real();
      dst[nrx + r] = src[r].imag();
    }
  }
  return out;
}

Tensor realify(const CsiTensor& h) {
  if (h.domain != Domain::DDA) throw std::invalid_argument("realify expects a DDA-domain tensor");
  return realify(h.data);
}

CsiTensor complexify(const Tensor& x, const FrameStructure& frame) {
  if (x.rank() != 3) throw std::invalid_argument("complexify expects a rank-3 tensor");
  if (x.dim(2) % 2 != 0) throw std::invalid_argument("complexify: channel extent must be even");
  const std::size_t nrx = x.dim(2) / 2;
  if (x.dim(0) != frame.n_t || x.dim(1) != frame.n_f || nrx != frame.n_rx())
    throw std::invalid_argument("complexify: tensor " + shape_to_string(x.shape()) + " does not match frame");
  CsiTensor out(Domain::DDA, frame);
  const std::size_t cells = x.dim(0) * x.dim(1);
  for (std::size_t c = 0; c < cells; ++c) {
    const double* src = x.raw() + c * 2 * nrx;
    cdouble* dst = out.data.raw() + c * nrx;
    for (std::size_t r = 0; r < nrx; ++r) dst[r] = {src[r], src[nrx + r]};
  }
  return out;
}

}  // namespace ddafm

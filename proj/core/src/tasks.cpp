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

#include "ddafm/tasks.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ddafm {

std::string_view to_string(Task t) {
  switch (t) {
    case Task::TP: return "TP";
    case Task::FP: return "FP";
    case Task::CE: return "CE";
  }
  return "?";
}

Task parse_task(std::string_view s) {
  if (s == "TP" || s == "tp") return Task::TP;
  if (s == "FP" || s == "fp") return Task::FP;
  if (s == "CE" || s == "ce") return Task::CE;
  throw std::invalid_argument("unknown task '" + std::string(s) + "' (expected TP, FP or CE)");
}

void MaskSpec::validate(const FrameStructure& frame) const {
  if (task == Task::TP && axis != MaskAxis::Time) throw std::invalid_argument("TP masks act on the time axis");
  if (task != Task::TP && axis != MaskAxis::Frequency)
    throw std::invalid_argument("FP/CE masks act on the frequency axis");
  if (task == Task::CE) {
    if (pilot_spacing < 1) throw std::invalid_argument("pilot spacing must be >= 1");
    if (frame.n_f % pilot_spacing != 0)
      throw std::invalid_argument("pilot spacing " + std::to_string(pilot_spacing) + " does not divide N_f=" +
                                  std::to_string(frame.n_f));
  } else if (!(obs_ratio > 0.0 && obs_ratio <= 1.0)) {
    throw std::invalid_argument("observation ratio must lie in (0, 1]");
  }
}

std::size_t Mask::observed() const {
  std::size_t n = 0;
  for (double v : values) n += v != 0.0;
  return n;
}

Mask build_mask(const MaskSpec& spec, const FrameStructure& frame) {
  spec.validate(frame);
  Mask m;
  m.axis = spec.axis;
  const std::size_t n = spec.axis == MaskAxis::Time ? frame.n_t : frame.n_f;
  m.values.assign(n, 0.0);
  if (spec.task == Task::CE) {
    for (std::size_t k = 0; k < n; k += spec.pilot_spacing) m.values[k] = 1.0;
  } else {
    const auto observed = static_cast<std::size_t>(std::floor(spec.obs_ratio * static_cast<double>(n) + 1e-9));
    for (std::size_t i = 0; i < std::min(observed, n); ++i) m.values[i] = 1.0;
  }
  return m;
}

CsiTensor apply_mask(const CsiTensor& h, const Mask& mask) {
  const FrameStructure& f = h.frame;
  const std::size_t n = mask.axis == MaskAxis::Time ? f.n_t : f.n_f;
  if (mask.values.size() != n)
    throw std::invalid_argument("mask length " + std::to_string(mask.values.size()) + " does not match axis extent " +
                                std::to_string(n));
  CsiTensor out = h;
  const std::size_t nrx = f.n_rx();
  for (std::size_t s = 0; s < f.n_t; ++s) {
    for (std::size_t k = 0; k < f.n_f; ++k) {
      const double m = mask.axis == MaskAxis::Time ? mask.values[s] : mask.values[k];
      if (m == 1.0) continue;
      cdouble* cell = out.data.raw() + (s * f.n_f + k) * nrx;
      for (std::size_t r = 0; r < nrx; ++r) cell[r] *= m;
    }
  }
  return out;
}

DualKernel dual_kernel(const Mask& mask) {
  const std::size_t n = mask.values.size();
  if (n == 0) throw std::invalid_argument("empty mask");
  DualKernel w;
  w.axis = mask.axis;
  w.kernel.assign(n, cdouble{});
  // Time runs through a forward DFT, frequency through an inverse one.
  const double sign = mask.axis == MaskAxis::Time ? -1.0 : 1.0;
  const double nn = static_cast<double>(n);
  for (std::size_t u = 0; u < n; ++u) {
    cdouble acc{};
    for (std::size_t i = 0; i < n; ++i) {
      if (mask.values[i] == 0.0) continue;
      const double turns = static_cast<double>((u * i) % n) / nn;
      acc += mask.values[i] * std::polar(1.0, sign * 2.0 * std::numbers::pi * turns);
    }
    w.kernel[u] = acc / nn;
  }
  return w;
}

CsiTensor circular_convolve(const CsiTensor& dda, const DualKernel& w) {
  if (dda.domain != Domain::DDA) throw std::invalid_argument("circular_convolve expects a DDA-domain tensor");
  const FrameStructure& f = dda.frame;
  const bool doppler = w.axis == MaskAxis::Time;
  const std::size_t n = doppler ? f.n_t : f.n_f;
  if (w.kernel.size() != n) throw std::invalid_argument("kernel length does not match the dual axis");
  const std::size_t nrx = f.n_rx();
  CsiTensor out(Domain::DDA, f);
  for (std::size_t v = 0; v < f.n_t; ++v) {
    for (std::size_t t = 0; t < f.n_f; ++t) {
      cdouble* dst = out.data.raw() + (v * f.n_f + t) * nrx;
      const std::size_t pos = doppler ? v : t;
      for (std::size_t u = 0; u < n; ++u) {
        const cdouble wu = w.kernel[u];
        if (wu == cdouble{}) continue;
        const std::size_t src_pos = (pos + n - u) % n;
        const std::size_t sv = doppler ? src_pos : v;
        const std::size_t st = doppler ? t : src_pos;
        const cdouble* src = dda.data.raw() + (sv * f.n_f + st) * nrx;
        for (std::size_t r = 0; r < nrx; ++r) dst[r] += wu * src[r];
      }
    }
  }
  return out;
}

CsiTensor alias_superpose(const CsiTensor& dda, std::size_t d) {
  if (dda.domain != Domain::DDA) throw std::invalid_argument("alias_superpose expects a DDA-domain tensor");
  const FrameStructure& f = dda.frame;
  if (d < 1 || f.n_f % d != 0)
    throw std::invalid_argument("pilot spacing " + std::to_string(d) + " does not divide N_tau=" + std::to_string(f.n_f));
  const std::size_t period = f.n_f / d;
  const std::size_t nrx = f.n_rx();
  const double inv_d = 1.0 / static_cast<double>(d);
  CsiTensor out(Domain::DDA, f);
  for (std::size_t v = 0; v < f.n_t; ++v) {
    for (std::size_t t = 0; t < f.n_f; ++t) {
      cdouble* dst = out.data.raw() + (v * f.n_f + t) * nrx;
      for (std::size_t s = 0; s < d; ++s) {
        const std::size_t src_t = (t + f.n_f - (s * period) % f.n_f) % f.n_f;
        const cdouble* src = dda.data.raw() + (v * f.n_f + src_t) * nrx;
        for (std::size_t r = 0; r < nrx; ++r) dst[r] += src[r];
      }
      for (std::size_t r = 0; r < nrx; ++r) dst[r] *= inv_d;
    }
  }
  return out;
}

std::size_t PaddedSample::valid_count() const {
  std::size_t n = 0;
  for (std::uint8_t v : validity) n += v;
  return n;
}

PaddedSample pad_and_mark(const CsiTensor& h, std::size_t n_t_max, std::size_t n_f_max) {
  const FrameStructure& f = h.frame;
  if (f.n_t > n_t_max || f.n_f > n_f_max)
    throw std::invalid_argument("frame " + std::to_string(f.n_t) + "x" + std::to_string(f.n_f) +
                                " exceeds padded grid " + std::to_string(n_t_max) + "x" + std::to_string(n_f_max));
  PaddedSample p;
  p.domain = h.domain;
  p.frame = f;
  p.data = CTensor({n_t_max, n_f_max, f.n_rx1, f.n_rx2});
  p.validity.assign(n_t_max * n_f_max, 0);
  const std::size_t nrx = f.n_rx();
  for (std::size_t s = 0; s < f.n_t; ++s) {
    std::copy_n(h.data.raw() + s * f.n_f * nrx, f.n_f * nrx, p.data.raw() + s * n_f_max * nrx);
    std::fill_n(p.validity.begin() + static_cast<std::ptrdiff_t>(s * n_f_max), f.n_f, std::uint8_t{1});
  }
  return p;
}

CsiTensor crop(const PaddedSample& p) {
  const FrameStructure& f = p.frame;
  CsiTensor out(p.domain, f);
  const std::size_t nrx = f.n_rx();
  for (std::size_t s = 0; s < f.n_t; ++s)
    std::copy_n(p.data.raw() + s * p.cols() * nrx, f.n_f * nrx, out.data.raw() + s * f.n_f * nrx);
  return out;
}

}  // namespace ddafm

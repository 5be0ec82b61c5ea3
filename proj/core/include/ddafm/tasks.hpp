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

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ddafm/csi.hpp"

namespace ddafm {

enum class Task { TP, FP, CE };
enum class MaskAxis { Time, Frequency };

std::string_view to_string(Task t);
Task parse_task(std::string_view s);

/// Reconstruction task and its sampling parameters.
struct MaskSpec {
  Task task = Task::TP;
  MaskAxis axis = MaskAxis::Time;
  double obs_ratio = 1.0;          // TP/FP: observed prefix fraction; 1 means fully observed
  std::size_t pilot_spacing = 1;   // CE: comb period D

  static MaskSpec time_prediction(double x) { return {Task::TP, MaskAxis::Time, x, 1}; }
  static MaskSpec frequency_prediction(double x) { return {Task::FP, MaskAxis::Frequency, x, 1}; }
  static MaskSpec channel_estimation(std::size_t d) { return {Task::CE, MaskAxis::Frequency, 1.0, d}; }

  /// Checks the task/axis pairing, the ratio range and D | N_f.
  void validate(const FrameStructure& frame) const;
};

/// One-dimensional binary sampling pattern along `axis`.
struct Mask {
  MaskAxis axis = MaskAxis::Time;
  std::vector<double> values;

  std::size_t observed() const;
};

/// TP: ones on [0, floor(x N_t)); FP: ones on [0, floor(x N_f)); CE: ones at
/// multiples of D.
Mask build_mask(const MaskSpec& spec, const FrameStructure& frame);

/// M_d (.) H with the pattern broadcast over every other axis.
/// Throws std::invalid_argument when the mask length does not match the axis.
CsiTensor apply_mask(const CsiTensor& h, const Mask& mask);

/// Circular-convolution kernel along the dual (Doppler or delay) axis such
/// that stf_to_dda(mask (.) H) == stf_to_dda(H) (*) kernel exactly.
struct DualKernel {
  MaskAxis axis = MaskAxis::Time;
  std::vector<cdouble> kernel;
};

/// Time masks: w[u] = (1/N_t) sum_s m[s] exp(-j2pi u s / N_t).
/// Frequency masks: w[u] = (1/N_f) sum_k m[k] exp(+j2pi u k / N_f).
DualKernel dual_kernel(const Mask& mask);

/// out[.., t, ..] = sum_u w[u] in[.., (t - u) mod N, ..] along the kernel's dual axis.
CsiTensor circular_convolve(const CsiTensor& dda, const DualKernel& w);

/// Comb folding: out[v, t] = (1/D) sum_{s<D} in[v, (t - s N_f/D) mod N_f].
/// Throws std::invalid_argument unless D divides the delay extent.
CsiTensor alias_superpose(const CsiTensor& dda, std::size_t d);

/// Sample padded to a common (n_t_max, n_f_max) grid.
struct PaddedSample {
  Domain domain = Domain::STF;
  FrameStructure frame;            // original frame
  CTensor data;                    // (n_t_max, n_f_max, n_rx1, n_rx2)
  std::vector<std::uint8_t> validity;  // n_t_max * n_f_max, row-major

  std::size_t rows() const { return data.dim(0); }
  std::size_t cols() const { return data.dim(1); }
  std::size_t valid_count() const;
};

/// Zero-pads h and marks the rectangle [0, n_t) x [0, n_f) valid.
/// Throws std::invalid_argument when the frame exceeds the target grid.
PaddedSample pad_and_mark(const CsiTensor& h, std::size_t n_t_max, std::size_t n_f_max);

/// Recovers the valid rectangle of a padded sample.
CsiTensor crop(const PaddedSample& p);

}  // namespace ddafm

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

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ddafm/tensor.hpp"

namespace ddafm {

/// Sampling grid of one CSI sample plus the receive array geometry.
struct FrameStructure {
  std::size_t n_t = 1;   // time samples (OFDM symbols)
  double dt = 1.0;       // seconds between time samples
  std::size_t n_f = 1;   // frequency samples (subcarriers)
  double df = 1.0;       // Hz between frequency samples
  std::size_t n_rx1 = 1; // horizontal UPA elements
  std::size_t n_rx2 = 1; // vertical UPA elements

  std::size_t n_rx() const noexcept { return n_rx1 * n_rx2; }
  std::size_t volume() const noexcept { return n_t * n_f * n_rx(); }
  Shape tensor_shape() const { return {n_t, n_f, n_rx1, n_rx2}; }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  friend bool operator==(const FrameStructure&, const FrameStructure&) = default;
};

/// Named frame structures of the evaluation cities (8x4 UPA):
/// fs-{a,b}-{denver,oklahoma,beijing,rio}.
std::optional<FrameStructure> frame_preset(std::string_view name);
std::vector<std::string> frame_preset_names();

enum class Domain { STF, DDA };

std::string_view to_string(Domain d);

/// Complex CSI tensor shaped (time|Doppler, freq|delay, n_rx1, n_rx2).
struct CsiTensor {
  Domain domain = Domain::STF;
  FrameStructure frame;
  CTensor data;

  CsiTensor() = default;
  CsiTensor(Domain d, const FrameStructure& fs) : domain(d), frame(fs), data(fs.tensor_shape()) {}
  CsiTensor(Domain d, const FrameStructure& fs, CTensor values);

  cdouble& at(std::size_t a, std::size_t b, std::size_t n1, std::size_t n2) {
    return data[((a * frame.n_f + b) * frame.n_rx1 + n1) * frame.n_rx2 + n2];
  }
  const cdouble& at(std::size_t a, std::size_t b, std::size_t n1, std::size_t n2) const {
    return data[((a * frame.n_f + b) * frame.n_rx1 + n1) * frame.n_rx2 + n2];
  }
};

}  // namespace ddafm

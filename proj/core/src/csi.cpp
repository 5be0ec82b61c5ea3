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

#include "ddafm/csi.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace ddafm {

void FrameStructure::validate() const {
  auto fail = [](const char* field, const char* why) {
    throw std::invalid_argument(std::string("frame.") + field + ": " + why);
  };
  if (n_t < 1) fail("n_t", "must be >= 1");
  if (n_f < 1) fail("n_f", "must be >= 1");
  if (n_rx1 < 1) fail("n_rx1", "must be >= 1");
  if (n_rx2 < 1) fail("n_rx2", "must be >= 1");
  if (!(dt > 0.0) || !std::isfinite(dt)) fail("dt", "must be positive");
  if (!(df > 0.0) || !std::isfinite(df)) fail("df", "must be positive");
}

namespace {
struct Preset {
  const char* name;
  FrameStructure frame;
};

// 30 kHz subcarrier spacing sampled every 48 (FS-A) or 12 (FS-B) subcarriers.
const std::array<Preset, 8> kPresets{{
    {"fs-a-denver", {80, 0.5e-3, 32, 1.44e6, 8, 4}},
    {"fs-b-denver", {80, 0.5e-3, 64, 0.36e6, 8, 4}},
    {"fs-a-oklahoma", {80, 0.5e-3, 32, 1.44e6, 8, 4}},
    {"fs-b-oklahoma", {80, 0.5e-3, 72, 0.36e6, 8, 4}},
    {"fs-a-beijing", {40, 0.5e-3, 32, 1.44e6, 8, 4}},
    {"fs-b-beijing", {40, 0.5e-3, 32, 0.36e6, 8, 4}},
    {"fs-a-rio", {80, 0.5e-3, 64, 1.44e6, 8, 4}},
    {"fs-b-rio", {80, 0.5e-3, 128, 0.36e6, 8, 4}},
}};
}  // namespace

std::optional<FrameStructure> frame_preset(std::string_view name) {
  for (const Preset& p : kPresets)
    if (name == p.name) return p.frame;
  return std::nullopt;
}

std::vector<std::string> frame_preset_names() {
  std::vector<std::string> names;
  for (const Preset& p : kPresets) names.emplace_back(p.name);
  return names;
}

std::string_view to_string(Domain d) { return d == Domain::STF ? "stf" : "dda"; }

CsiTensor::CsiTensor(Domain d, const FrameStructure& fs, CTensor values)
    : domain(d), frame(fs), data(std::move(values)) {
  if (data.shape() != fs.tensor_shape())
    throw std::invalid_argument("CSI tensor shape " + shape_to_string(data.shape()) +
                                " does not match frame " + shape_to_string(fs.tensor_shape()));
}

}  // namespace ddafm

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
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "ddafm/csi.hpp"

namespace ddafm {

inline constexpr double kSpeedOfLight = 299792458.0;

using Rng = std::mt19937_64;

/// One propagation path.
struct Path {
  cdouble beta{1.0, 0.0};  // complex gain
  double nu = 0.0;         // Doppler shift, Hz
  double tau = 0.0;        // delay, s
  double theta = 0.0;      // azimuth AoA, rad
  double phi = 0.0;        // elevation AoA, rad

  friend bool operator==(const Path&, const Path&) = default;
};

struct PathSet {
  std::vector<Path> paths;

  /// At least one path, tau >= 0, |theta| <= pi, |phi| <= pi/2.
  void validate() const;
  double total_power() const;

  friend bool operator==(const PathSet&, const PathSet&) = default;
};

/// Statistical multipath recipe for synthetic samples.
struct ScenarioConfig {
  double carrier_hz = 3.5e9;
  double speed_min_mps = 0.0;
  double speed_max_mps = 120.0 / 3.6;
  std::size_t path_count_min = 1;
  std::size_t path_count_max = 12;
  double delay_scale_s = 100e-9;  // mean of the exponential delay draw
  double elevation_max_rad = 1.0471975511965976;  // pi/3
  /// When set, sample_paths returns these paths untouched.
  std::optional<PathSet> fixed_paths;

  void validate() const;
  double max_doppler_hz() const { return carrier_hz * speed_max_mps / kSpeedOfLight; }
};

/// Ground-truth metadata drawn alongside the paths.
struct PathDraw {
  PathSet paths;
  double speed_mps = 0.0;
  double heading_rad = 0.0;  // horizontal velocity azimuth
};

/// Draws paths: count ~ U{min..max}; delays ~ Exp(delay_scale_s); powers
/// proportional to exp(-tau/delay_scale_s) then normalized to unit total;
/// uniform phases; azimuth ~ U[-pi, pi]; elevation ~ U[-el_max, el_max];
/// one horizontal velocity per draw projected on each arrival direction.
PathDraw sample_path_draw(const ScenarioConfig& cfg, Rng& rng);
PathSet sample_paths(const ScenarioConfig& cfg, Rng& rng);

/// UPA response for half-wavelength spacing:
/// A[n1, n2] = exp(j*pi*(n1*sin(theta)*cos(phi) + n2*sin(phi))).
CTensor array_response(double theta, double phi, std::size_t n_rx1, std::size_t n_rx2);

/// H[s,k,n1,n2] = sum_p beta_p exp(j2pi(nu_p s dt - tau_p k df)) A(theta_p, phi_p)[n1,n2].
CsiTensor synth_stf(const PathSet& paths, const FrameStructure& frame);

/// Rescales to unit Frobenius norm. Throws std::domain_error on an all-zero tensor.
CsiTensor normalize_energy(const CsiTensor& h);

/// Sentinel for noiseless injection.
inline constexpr double kNoiselessSnrDb = std::numeric_limits<double>::infinity();

/// h + n with n circular complex Gaussian of total expected power
/// ||h||^2 * 10^(-snr_db/10).
CsiTensor add_noise(const CsiTensor& h, double snr_db, Rng& rng);

/// Moves every path onto the DDA grid of `frame`: nu and tau to the nearest
/// resolution multiple and the spatial frequencies to the nearest FFT bin.
/// Intended for exact-impulse checks.
PathSet snap_to_grid(const PathSet& paths, const FrameStructure& frame);

}  // namespace ddafm

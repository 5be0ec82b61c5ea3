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

#include "ddafm/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ddafm {

using std::numbers::pi;

void PathSet::validate() const {
  if (paths.empty()) throw std::invalid_argument("path set must contain at least one path");
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const Path& p = paths[i];
    const std::string where = "path " + std::to_string(i) + ": ";
    if (!(p.tau >= 0.0)) throw std::invalid_argument(where + "tau must be >= 0");
    if (!(std::abs(p.theta) <= pi)) throw std::invalid_argument(where + "|theta| must be <= pi");
    if (!(std::abs(p.phi) <= pi / 2)) throw std::invalid_argument(where + "|phi| must be <= pi/2");
  }
}

double PathSet::total_power() const {
  double acc = 0.0;
  for (const Path& p : paths) acc += std::norm(p.beta);
  return acc;
}

void ScenarioConfig::validate() const {
  auto fail = [](const char* field, const char* why) {
    throw std::invalid_argument(std::string("scenario.") + field + ": " + why);
  };
  if (!(carrier_hz > 0.0)) fail("carrier_hz", "must be positive");
  if (!(speed_min_mps >= 0.0)) fail("speed_min_mps", "must be >= 0");
  if (!(speed_max_mps >= speed_min_mps)) fail("speed_max_mps", "must be >= speed_min_mps");
  if (path_count_min < 1 || path_count_max < path_count_min) fail("path_count_min", "empty path-count range");
  if (!(delay_scale_s > 0.0)) fail("delay_scale_s", "must be positive");
  if (!(elevation_max_rad >= 0.0 && elevation_max_rad <= pi / 2)) fail("elevation_max_rad", "must lie in [0, pi/2]");
  if (fixed_paths) fixed_paths->validate();
}

PathDraw sample_path_draw(const ScenarioConfig& cfg, Rng& rng) {
  cfg.validate();
  PathDraw draw;
  if (cfg.fixed_paths) {
    draw.paths = *cfg.fixed_paths;
    return draw;
  }
  std::uniform_int_distribution<std::size_t> count_dist(cfg.path_count_min, cfg.path_count_max);
  std::exponential_distribution<double> delay_dist(1.0 / cfg.delay_scale_s);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  draw.speed_mps = cfg.speed_min_mps + (cfg.speed_max_mps - cfg.speed_min_mps) * unit(rng);
  draw.heading_rad = -pi + 2.0 * pi * unit(rng);
  const double doppler_max = cfg.carrier_hz * draw.speed_mps / kSpeedOfLight;

  const std::size_t n = count_dist(rng);
  draw.paths.paths.resize(n);
  double power_sum = 0.0;
  for (Path& p : draw.paths.paths) {
    p.tau = delay_dist(rng);
    p.theta = -pi + 2.0 * pi * unit(rng);
    p.phi = cfg.elevation_max_rad * (2.0 * unit(rng) - 1.0);
    const double phase = 2.0 * pi * unit(rng);
    const double power = std::exp(-p.tau / cfg.delay_scale_s);
    p.beta = std::polar(std::sqrt(power), phase);
    power_sum += power;
    // cos of the angle between the arrival direction and a horizontal velocity.
    const double cos_psi = std::cos(p.phi) * std::cos(p.theta - draw.heading_rad);
    p.nu = doppler_max * cos_psi;
  }
  const double norm = 1.0 / std::sqrt(power_sum);
  for (Path& p : draw.paths.paths) p.beta *= norm;
  return draw;
}

PathSet sample_paths(const ScenarioConfig& cfg, Rng& rng) { return sample_path_draw(cfg, rng).paths; }

CTensor array_response(double theta, double phi, std::size_t n_rx1, std::size_t n_rx2) {
  CTensor a({n_rx1, n_rx2});
  const double u1 = std::sin(theta) * std::cos(phi);
  const double u2 = std::sin(phi);
  for (std::size_t n1 = 0; n1 < n_rx1; ++n1)
    for (std::size_t n2 = 0; n2 < n_rx2; ++n2)
      a[n1 * n_rx2 + n2] = std::polar(1.0, pi * (static_cast<double>(n1) * u1 + static_cast<double>(n2) * u2));
  return a;
}

CsiTensor synth_stf(const PathSet& paths, const FrameStructure& frame) {
  paths.validate();
  frame.validate();
  CsiTensor h(Domain::STF, frame);
  const std::size_t nrx = frame.n_rx();
  std::vector<cdouble> time_ramp(frame.n_t);
  std::vector<cdouble> freq_ramp(frame.n_f);
  for (const Path& p : paths.paths) {
    for (std::size_t s = 0; s < frame.n_t; ++s)
      time_ramp[s] = p.beta * std::polar(1.0, 2.0 * pi * p.nu * static_cast<double>(s) * frame.dt);
    for (std::size_t k = 0; k < frame.n_f; ++k)
      freq_ramp[k] = std::polar(1.0, -2.0 * pi * p.tau * static_cast<double>(k) * frame.df);
    const CTensor a = array_response(p.theta, p.phi, frame.n_rx1, frame.n_rx2);
    cdouble* out = h.data.raw();
    for (std::size_t s = 0; s < frame.n_t; ++s) {
      for (std::size_t k = 0; k < frame.n_f; ++k) {
        const cdouble tf = time_ramp[s] * freq_ramp[k];
        cdouble* cell = out + (s * frame.n_f + k) * nrx;
        for (std::size_t r = 0; r < nrx; ++r) cell[r] += tf * a[r];
      }
    }
  }
  return h;
}

CsiTensor normalize_energy(const CsiTensor& h) {
  const double norm = frobenius_norm(h.data);
  if (!(norm > 0.0)) throw std::domain_error("cannot normalize an all-zero CSI tensor");
  CsiTensor out = h;
  for (cdouble& v : out.data.data()) v /= norm;
  return out;
}

CsiTensor add_noise(const CsiTensor& h, double snr_db, Rng& rng) {
  if (std::isinf(snr_db) && snr_db > 0) return h;
  if (std::isnan(snr_db)) throw std::invalid_argument("snr_db must not be NaN");
  const double signal = squared_norm(h.data);
  const double per_entry = signal * std::pow(10.0, -snr_db / 10.0) / static_cast<double>(h.data.size());
  std::normal_distribution<double> gauss(0.0, std::sqrt(per_entry / 2.0));
  CsiTensor out = h;
  for (cdouble& v : out.data.data()) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    v += cdouble(re, im);
  }
  return out;
}

PathSet snap_to_grid(const PathSet& paths, const FrameStructure& frame) {
  frame.validate();
  PathSet out = paths;
  const double nu_res = 1.0 / (static_cast<double>(frame.n_t) * frame.dt);
  const double tau_res = 1.0 / (static_cast<double>(frame.n_f) * frame.df);
  const double n1 = static_cast<double>(frame.n_rx1);
  const double n2 = static_cast<double>(frame.n_rx2);
  for (Path& p : out.paths) {
    p.nu = std::round(p.nu / nu_res) * nu_res;
    p.tau = std::max(0.0, std::round(p.tau / tau_res) * tau_res);
    // Spatial frequencies in cycles per element: u1 = sin(theta)cos(phi)/2, u2 = sin(phi)/2.
    const double q2 = std::round(std::sin(p.phi) / 2.0 * n2);
    const double sin_phi = std::clamp(2.0 * q2 / n2, -1.0, 1.0);
    p.phi = std::asin(sin_phi);
    const double cos_phi = std::cos(p.phi);
    const double q1_max = std::floor(cos_phi * n1 / 2.0 + 1e-12);
    const double q1 = std::clamp(std::round(std::sin(p.theta) * std::cos(p.phi) / 2.0 * n1), -q1_max, q1_max);
    p.theta = cos_phi > 0.0 ? std::asin(std::clamp(2.0 * q1 / n1 / cos_phi, -1.0, 1.0)) : 0.0;
  }
  return out;
}

}  // namespace ddafm

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
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ddafm/channel.hpp"
#include "ddafm/tasks.hpp"

namespace ddafm {

struct Record;
struct ModelConfig;
class ParamStore;

inline constexpr double kNmseFloorDb = -100.0;

/// 10 log10(ratio), floored at kNmseFloorDb.
double to_db(double ratio);

/// Energy ratio ||gt - pred||^2 / ||gt||^2 on the scored region: the
/// unobserved part of the masked axis for TP/FP, every valid entry for CE.
/// Tensors are (A, B, n_rx1, n_rx2); validity indexes (A, B) or is empty.
/// Throws std::invalid_argument when the region is empty or has no energy.
double nmse_ratio(const CTensor& gt, const CTensor& pred, Task task, const Mask& mask,
                  std::span<const std::uint8_t> validity = {});
double nmse_eval(const CTensor& gt, const CTensor& pred, Task task, const Mask& mask,
                 std::span<const std::uint8_t> validity = {});

/// Power-weighted RMS delay spread in seconds.
double rms_delay_spread(const PathSet& p);
/// Half-open bins [0,10) [10,30) [30,100) [100,300) [300,1000) ns; larger
/// spreads fall in "beyond".
std::string_view delay_spread_bin(double seconds);
const std::vector<std::string>& delay_spread_bin_labels();

/// 20 km/h wide bins over 0-120 km/h; faster speeds fall in the last bin.
std::string speed_bin(double speed_mps);
const std::vector<std::string>& speed_bin_labels();

enum class SensitivityKind { RegionReduction, ResolutionCoarsening };
std::string_view to_string(SensitivityKind k);

struct SensitivityCase {
  std::size_t kappa = 1;
  SensitivityKind kind = SensitivityKind::RegionReduction;
};

/// RegionReduction: (df, dt) * kappa and (N_f, N_t) / kappa, resolutions kept.
/// ResolutionCoarsening: (N_f, N_t) / kappa only, unambiguous ranges kept.
/// Throws std::invalid_argument unless kappa divides N_t and N_f.
FrameStructure sensitivity_frame(const FrameStructure& fs, const SensitivityCase& c);

/// Comb-pilot DFT estimator: per (time, antenna) line, take the pilot DFT,
/// keep the first N_f/D delay taps and resynthesize every subcarrier. Exact
/// for on-grid delays below 1/(D df). Reads only pilot entries.
CsiTensor baseline_ce_dft(const CsiTensor& h_obs, std::size_t d);

/// Linear interpolation between observed entries along the mask axis and
/// hold-last beyond the last one (hold-first before the first).
/// Throws std::invalid_argument with fewer than two observed entries.
CsiTensor baseline_interp_linear(const CsiTensor& h_obs, const Mask& mask);

/// Running linear-mean NMSE of one report cell.
struct EvalCell {
  double sum_ratio = 0.0;
  std::size_t count = 0;
  void add(double ratio) {
    sum_ratio += ratio;
    ++count;
  }
  double mean() const { return count ? sum_ratio / static_cast<double>(count) : 0.0; }
  double db() const { return to_db(mean()); }
};

/// NMSE tables keyed by (table, task label, bin, method).
struct EvalReport {
  std::size_t records = 0;
  std::vector<std::string> methods;
  std::vector<std::string> tasks;
  std::map<std::string, std::vector<std::string>> bins;  // per table, display order
  std::map<std::string, std::map<std::string, std::map<std::string, std::map<std::string, EvalCell>>>> cells;

  void add(const std::string& table, const std::string& task, const std::string& bin, const std::string& method,
           double ratio);
  const EvalCell* find(const std::string& table, const std::string& task, const std::string& bin,
                       const std::string& method) const;
  /// Sample count of every (table, task, method) summed over bins.
  std::size_t table_count(const std::string& table, const std::string& task, const std::string& method) const;

  void write_text(std::ostream& out) const;
  /// Machine-readable record, one entry per cell.
  std::string to_json() const;
  /// table,task,bin,method,nmse_db,count rows for plotting.
  void write_csv(std::ostream& out) const;
};

std::string task_label(const MaskSpec& spec);

struct EvalOptions {
  std::vector<MaskSpec> tasks;
  bool run_model = true;
  bool run_baselines = true;
  bool pred_equals_gt = false;  // debug: score the ground truth as the prediction
  bool kappa_sweep = false;
  std::vector<std::size_t> kappas{1, 2, 4, 8};
  unsigned threads = 1;
  std::uint64_t seed = 0;  // noise for resynthesized sensitivity samples
};

/// Evaluates model and classical baselines on every record and task.
/// `cfg`/`params` may be null when run_model is false.
EvalReport evaluate(std::span<const Record> records, const ModelConfig* cfg, const ParamStore* params,
                    const EvalOptions& opt);

}  // namespace ddafm

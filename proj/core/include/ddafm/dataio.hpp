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
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ddafm/channel.hpp"
#include "ddafm/errors.hpp"
#include "ddafm/model.hpp"

namespace ddafm {

inline constexpr int kDatasetVersion = 1;
inline constexpr int kCheckpointVersion = 1;

/// One paired sample: noisy observation and noiseless ground truth (STF).
struct Record {
  FrameStructure frame;
  std::uint64_t seed = 0;
  double snr_db = kNoiselessSnrDb;
  double speed_mps = 0.0;
  double heading_rad = 0.0;
  double rms_delay_spread_s = 0.0;
  PathSet paths;
  CTensor obs;
  CTensor gt;
};

struct Dataset {
  ScenarioConfig scenario;
  std::vector<Record> records;
};

/// Bytes of one record's payload: obs and gt, (re, im) float32 each.
std::size_t record_payload_bytes(const FrameStructure& frame);

/// Text header terminated by "end-header\n", then the little-endian float32
/// payload. The header carries a SHA-256 of the payload.
void write_dataset(const Dataset& ds, std::ostream& out);
void write_dataset(const Dataset& ds, const std::filesystem::path& path);
/// Throws DataError on version mismatch, truncation or digest failure.
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::filesystem::path& path);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

struct GenerateOptions {
  ScenarioConfig scenario;
  std::vector<FrameStructure> frames;  // record i uses frames[i % size]
  std::size_t count = 1;
  std::uint64_t seed = 0;
  /// Fixed SNR when set (eval-style files); otherwise U[snr_min, snr_max].
  std::optional<double> fixed_snr_db;
  double snr_min_db = 5.0;
  double snr_max_db = 20.0;
  unsigned threads = 1;
};

/// Per record: sample paths, synthesize, normalize to unit energy, add noise.
/// Record i draws from its own stream seeded by derive_seed(seed, i), so the
/// output is independent of `threads`.
Dataset generate_dataset(const GenerateOptions& opt);

/// SplitMix64 mixing of a base seed with a sequence of counters.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> counters);

/// Adam moments in canonical parameter order.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Where a curriculum run stands; enough to resume it.
struct TrainCursor {
  std::size_t stage = 0;          // 0 or 1
  std::size_t epoch = 0;          // within stage
  std::size_t batch = 0;          // next batch within epoch
  std::size_t stage_step = 0;     // optimizer steps taken in this stage
  std::uint64_t global_step = 0;
  bool finished = false;
  friend bool operator==(const TrainCursor&, const TrainCursor&) = default;
};

struct Checkpoint {
  ModelConfig model;
  ParamStore params;
  AdamState adam;
  TrainCursor cursor;
  std::uint64_t seed = 0;
};

/// Text header (version, config JSON, tensor directory) then float64
/// little-endian parameters and Adam moments in canonical order.
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ddafm

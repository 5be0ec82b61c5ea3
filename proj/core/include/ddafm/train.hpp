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

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "ddafm/dataio.hpp"
#include "ddafm/model.hpp"
#include "ddafm/tasks.hpp"

namespace ddafm {

/// Schedule and task ranges for one curriculum stage.
struct TrainPlan {
  double data_fraction = 1.0;  // share of the pool used by the stage
  std::size_t epochs = 1;
  double initial_lr = 3e-5;
  double min_lr = 5e-6;
  double decay_factor = 0.9;
  std::size_t decay_interval_steps = 5000;
  std::size_t batch_size = 176;
  double obs_ratio_min = 0.5;
  double obs_ratio_max = 0.75;
  std::vector<std::size_t> pilot_spacings{2, 4};

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  /// Stage I: 6e-5 -> 3e-5, x0.8 every 400 steps, x = 0.75, D = 2.
  static TrainPlan full_stage1();
  /// Stage II: 3e-5 -> 5e-6, x0.9 every 5000 steps, x in [0.5, 0.75], D in {2, 4}.
  static TrainPlan full_stage2();

  friend bool operator==(const TrainPlan&, const TrainPlan&) = default;
};

struct Curriculum {
  TrainPlan stage1 = TrainPlan::full_stage1();
  TrainPlan stage2 = TrainPlan::full_stage2();
  double clip_norm = 1.0;  // global gradient norm; <= 0 disables
  std::uint64_t seed = 0;

  void validate() const;
  static Curriculum full();
  /// Small-batch, higher-lr schedule sized for a single CPU core.
  static Curriculum desk();

  friend bool operator==(const Curriculum&, const Curriculum&) = default;
};

/// max(min_lr, initial_lr * factor^floor(step / interval)).
double lr_at(std::size_t step, const TrainPlan& plan);

/// Per-sample ||gt - pred||^2 / ||gt||^2 over entries whose (a, b) cell is
/// valid (validity indexes the first two axes; empty means all valid).
/// Throws std::domain_error when the ground truth has no energy there.
double nmse_loss(const CTensor& gt, const CTensor& pred, std::span<const std::uint8_t> validity = {});

/// Samples, tasks and masks of one mini-batch on a common padded grid.
struct BatchSpec {
  std::vector<std::size_t> indices;
  std::vector<MaskSpec> masks;
  std::vector<FrameStructure> frames;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

/// Draws a task per sample uniformly from {TP, FP, CE}, x ~ U[x_min, x_max]
/// and D uniformly from the allowed spacings.
MaskSpec draw_mask(const TrainPlan& plan, Rng& rng);

/// Throws std::invalid_argument when a frame does not fit the grid or a drawn
/// pilot spacing does not divide its N_f.
BatchSpec build_batch(std::span<const Record> pool, std::span<const std::size_t> indices, const TrainPlan& plan,
                      Rng& rng, std::size_t rows, std::size_t cols);

/// Network-ready view of one masked observation.
struct PreparedSample {
  FrameStructure frame;
  MaskSpec spec;
  Mask mask;
  Tensor input;                        // (rows, cols, 2 N_rx), scaled DDA
  std::vector<std::uint8_t> validity;  // rows * cols
  double scale = 1.0;                  // input = scale * realify(DDA)
};

/// Mask the noisy STF observation, transform to DDA, pad to the grid, pack
/// real/imaginary channels and scale by sqrt(N_t N_f N_rx).
PreparedSample prepare_sample(const Record& rec, const MaskSpec& spec, std::size_t rows, std::size_t cols);

/// Network output [rows*cols, 2 N_rx] -> STF prediction on the sample's frame.
CsiTensor decode_prediction(const Tensor& output, const PreparedSample& sample);

/// Scalar graph node holding nmse_loss(gt, decode_prediction(output)).
ad::Var nmse_loss_node(ad::Var output, const PreparedSample& sample, const CTensor& gt);

struct SampleGradient {
  double loss = 0.0;
  std::vector<Tensor> grads;  // canonical parameter order
};

SampleGradient sample_gradient(const Backbone& model, const ParamStore& params, const PreparedSample& sample,
                               const CTensor& gt);

AdamState make_adam_state(const ParamStore& params);

/// One Adam update. Throws NumericError naming the first parameter with a
/// non-finite gradient; parameters are left untouched in that case.
void adam_step(ParamStore& params, std::span<const Tensor> grads, AdamState& state, double lr);

/// Scales grads in place so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(std::span<Tensor> grads, double max_norm);

struct StepMetrics {
  std::size_t stage = 0;
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
  std::array<double, 3> task_nmse{};       // mean linear NMSE per task in the batch
  std::array<std::size_t, 3> task_count{};
};

struct ValidationMetrics {
  std::size_t stage = 0;
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  double loss = 0.0;
  std::array<double, 3> task_nmse{};
  std::array<std::size_t, 3> task_count{};
};

struct TrainOptions {
  unsigned threads = 1;
  std::filesystem::path checkpoint_path;  // empty: no checkpoints
  std::size_t checkpoint_every = 0;       // optimizer steps; 0: stage ends only
  std::ostream* metrics = nullptr;        // JSON lines
  std::optional<std::uint64_t> stop_after_steps;  // pause after this global step
  std::size_t validation_limit = 0;       // 0: whole validation set
  std::function<void(const StepMetrics&)> on_step;
};

struct TrainResult {
  ParamStore params;
  AdamState adam;
  TrainCursor cursor;
  std::vector<StepMetrics> steps;
  std::vector<ValidationMetrics> validation;
};

/// Fixed validation masks: sample j gets its task/mask from a stream derived
/// from (seed, j) under the stage-2 ranges.
std::vector<MaskSpec> validation_masks(const Curriculum& plan, std::span<const Record> val);

ValidationMetrics validate_model(const Backbone& model, const ParamStore& params, std::span<const Record> val,
                                 std::span<const MaskSpec> masks, unsigned threads);

/// Stage 1 trains on a fixed data_fraction subset with the easy ranges, stage 2
/// on the whole pool. Randomness is a pure function of (seed, stage, epoch,
/// batch) and per-sample gradients are summed in index order, so runs are
/// bit-reproducible for any thread count and resumable from a checkpoint.
TrainResult run_curriculum(const Curriculum& plan, const ModelConfig& cfg, std::span<const Record> train,
                           std::span<const Record> val, const TrainOptions& opt,
                           const std::optional<Checkpoint>& resume = std::nullopt);

}  // namespace ddafm

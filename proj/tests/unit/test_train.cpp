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

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ddafm/dataio.hpp"
#include "ddafm/train.hpp"
#include "ddafm/transform.hpp"
#include "helpers.hpp"

using namespace ddafm;
using namespace ddafm::testing;

namespace {

std::vector<Record> tiny_pool(std::size_t n, std::uint64_t seed) {
  GenerateOptions opt;
  opt.frames = {small_frame(8, 8, 2, 2), small_frame(8, 16, 2, 2)};
  opt.count = n;
  opt.seed = seed;
  return generate_dataset(opt).records;
}

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.embed_dim = 8;
  cfg.heads = 2;
  cfg.blocks_per_module = 2;
  cfg.module_count = 1;
  cfg.window_size = 4;
  cfg.in_channels = 8;
  cfg.n_t_max = 8;
  cfg.n_f_max = 16;
  return cfg;
}

Curriculum tiny_plan() {
  Curriculum c = Curriculum::desk();
  c.stage1.batch_size = 2;
  c.stage2.batch_size = 2;
  c.stage2.epochs = 2;
  c.seed = 99;
  return c;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("nmse loss properties") {
    const CTensor gt = random_ctensor({4, 6, 2, 2}, 1);
    const CTensor pred = random_ctensor({4, 6, 2, 2}, 2);
    CHECK(nmse_loss(gt, gt) == 0.0);
    CHECK(nmse_loss(gt, CTensor(gt.shape())) == 1.0);
    const double base = nmse_loss(gt, pred);
    for (cdouble a : {cdouble(3.0, 0.0), cdouble(-0.25, 0.0), cdouble(0.6, -2.0)}) {
      CTensor g2 = gt, p2 = pred;
      for (auto& v : g2.data()) v *= a;
      for (auto& v : p2.data()) v *= a;
      CHECK(nmse_loss(g2, p2) == doctest::Approx(base).epsilon(1e-12));
    }
    CHECK_THROWS_AS(nmse_loss(CTensor(gt.shape()), pred), std::domain_error);
  }

  TEST_CASE("padded entries never reach the loss") {
    const CTensor gt = random_ctensor({4, 6, 1, 2}, 3);
    CTensor pred = random_ctensor({4, 6, 1, 2}, 4);
    std::vector<std::uint8_t> valid(24, 0);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 4; ++j) valid[i * 6 + j] = 1;
    const double a = nmse_loss(gt, pred, valid);
    CTensor g2 = gt;
    for (std::size_t cell = 0; cell < 24; ++cell)
      if (!valid[cell])
        for (std::size_t q = 0; q < 2; ++q) {
          g2[cell * 2 + q] = {1e3, -7.0};
          pred[cell * 2 + q] = {-5.0, 42.0};
        }
    CHECK(std::abs(nmse_loss(g2, pred, valid) - a) <= 1e-12);
  }

  TEST_CASE("learning-rate schedule") {
    const TrainPlan s1 = TrainPlan::full_stage1();
    CHECK(lr_at(0, s1) == 6e-5);
    CHECK(lr_at(399, s1) == 6e-5);
    CHECK(lr_at(400, s1) == doctest::Approx(4.8e-5).epsilon(1e-12));
    CHECK(lr_at(1000000, s1) == 3e-5);
    const TrainPlan s2 = TrainPlan::full_stage2();
    CHECK(lr_at(0, s2) == 3e-5);
    double prev = lr_at(0, s2);
    for (std::size_t step = 1; step < 200000; step += 997) {
      const double lr = lr_at(step, s2);
      CHECK(lr <= prev);
      CHECK(lr >= s2.min_lr);
      prev = lr;
    }
  }

  TEST_CASE("stage-1 masks use the fixed easy parameters") {
    const TrainPlan s1 = TrainPlan::full_stage1();
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
      const MaskSpec m = draw_mask(s1, rng);
      if (m.task == Task::CE)
        CHECK(m.pilot_spacing == 2);
      else
        CHECK(m.obs_ratio == 0.75);
    }
  }

  TEST_CASE("task draws are uniform over TP, FP and CE") {
    const TrainPlan s2 = TrainPlan::full_stage2();
    Rng rng(6);
    const int n = 10000;
    std::array<int, 3> counts{};
    std::array<int, 2> spacing{};
    for (int i = 0; i < n; ++i) {
      const MaskSpec m = draw_mask(s2, rng);
      ++counts[static_cast<int>(m.task)];
      if (m.task == Task::CE) ++spacing[m.pilot_spacing == 4];
      else {
        CHECK(m.obs_ratio >= 0.5);
        CHECK(m.obs_ratio <= 0.75);
      }
    }
    const double p = 1.0 / 3.0, sigma = std::sqrt(n * p * (1 - p));
    for (int c : counts) CHECK(std::abs(c - n * p) <= 3 * sigma);
    CHECK(spacing[0] > 0);
    CHECK(spacing[1] > 0);
  }

  TEST_CASE("mixed frames share a padded batch") {
    const auto pool = tiny_pool(6, 7);
    const std::vector<std::size_t> idx{0, 1, 2, 3};
    Rng rng(8);
    const BatchSpec b = build_batch(pool, idx, TrainPlan::full_stage2(), rng, 8, 16);
    bool narrow = false, wide = false;
    for (const auto& f : b.frames) {
      narrow = narrow || f.n_f == 8;
      wide = wide || f.n_f == 16;
    }
    CHECK(narrow);
    CHECK(wide);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const PreparedSample s = prepare_sample(pool[idx[i]], b.masks[i], b.rows, b.cols);
      CHECK(s.input.shape() == Shape{8, 16, 8});
      CHECK(s.validity.size() == 128);
    }
    CHECK_THROWS_AS(build_batch(pool, idx, TrainPlan::full_stage2(), rng, 8, 8), std::invalid_argument);
  }

  TEST_CASE("prepared input is the scaled DDA observation") {
    const auto pool = tiny_pool(1, 9);
    const PreparedSample s = prepare_sample(pool[0], MaskSpec::frequency_prediction(0.5), 8, 8);
    const CsiTensor obs(Domain::STF, pool[0].frame, pool[0].obs);
    const Tensor ref = realify(stf_to_dda(apply_mask(obs, s.mask)));
    double worst = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(s.input[i] - s.scale * ref[i]));
    CHECK(worst < 1e-12);
    // Decoding the unscaled-back input recovers the masked observation.
    Tensor out = s.input.reshaped({64, 8});
    const CsiTensor back = decode_prediction(out, s);
    CHECK(rel_err(back.data, apply_mask(obs, s.mask).data) < 1e-12);
  }

  TEST_CASE("adam") {
    ParamStore p;
    p.add("w", Tensor({3}, std::vector<double>{1.0, -2.0, 0.5}));
    AdamState st = make_adam_state(p);
    st.m[0].fill(0.3);
    st.v[0].fill(0.2);
    const std::vector<Tensor> zero{Tensor({3}, 0.0)};
    const Tensor before = p.at("w");
    // Zero gradient with nonzero momentum still moves the weights; with fresh state it does not.
    AdamState fresh = make_adam_state(p);
    adam_step(p, zero, fresh, 1e-2);
    CHECK(p.at("w") == before);
    adam_step(p, zero, st, 1e-2);
    CHECK(st.m[0][0] == doctest::Approx(0.27));
    CHECK(st.v[0][0] == doctest::Approx(0.1998));

    // Quadratic (w - 1)^2 converges within 500 steps.
    ParamStore q;
    q.add("w", Tensor({1}, 0.0));
    AdamState qs = make_adam_state(q);
    for (int i = 0; i < 500; ++i) {
      const std::vector<Tensor> g{Tensor({1}, 2.0 * (q.at("w")[0] - 1.0))};
      adam_step(q, g, qs, 1e-2);
    }
    CHECK(std::abs(q.at("w")[0] - 1.0) < 1e-2);

    const std::vector<Tensor> bad{Tensor({3}, std::vector<double>{0.0, NAN, 1.0})};
    const Tensor keep = p.at("w");
    CHECK_THROWS_AS(adam_step(p, bad, st, 1e-2), NumericError);
    CHECK(p.at("w") == keep);
  }

  TEST_CASE("global norm clipping") {
    std::vector<Tensor> g{Tensor({2}, std::vector<double>{3.0, 0.0}), Tensor({1}, 4.0)};
    CHECK(clip_global_norm(g, 1.0) == doctest::Approx(5.0));
    CHECK(g[0][0] == doctest::Approx(0.6));
    CHECK(g[1][0] == doctest::Approx(0.8));
    CHECK(clip_global_norm(g, 10.0) == doctest::Approx(1.0));
    CHECK(g[1][0] == doctest::Approx(0.8));
  }

  TEST_CASE("plan validation names the field") {
    TrainPlan p = TrainPlan::full_stage2();
    p.data_fraction = 1.5;
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("data_fraction"), std::invalid_argument);
    p = TrainPlan::full_stage2();
    p.min_lr = 1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }

  TEST_CASE("curriculum: learns, is reproducible, and resumes bit-exactly") {
    const auto train = tiny_pool(16, 10);
    const auto val = tiny_pool(6, 11);
    const ModelConfig cfg = tiny_model();
    const Curriculum plan = tiny_plan();

    std::ostringstream log_a, log_b;
    TrainOptions opt;
    opt.metrics = &log_a;
    const TrainResult a = run_curriculum(plan, cfg, train, val, opt);
    CHECK(a.cursor.finished);
    REQUIRE(a.validation.size() >= 2);
    CHECK(a.validation.back().loss < a.validation.front().loss);
    // Stage boundary restarts the schedule at the stage-2 initial rate.
    bool saw_stage2 = false;
    for (const auto& s : a.steps)
      if (s.stage == 1 && !saw_stage2) {
        CHECK(s.lr == plan.stage2.initial_lr);
        saw_stage2 = true;
      }
    CHECK(saw_stage2);

    TrainOptions opt2;
    opt2.metrics = &log_b;
    opt2.threads = 3;
    const TrainResult b = run_curriculum(plan, cfg, train, val, opt2);
    CHECK(b.params == a.params);
    CHECK(log_b.str() == log_a.str());

    // Pause mid stage 2, resume from the checkpoint, compare.
    const auto path = std::filesystem::temp_directory_path() / "ddafm_unit_resume.ckpt";
    std::ostringstream log_c;
    TrainOptions first;
    first.metrics = &log_c;
    first.checkpoint_path = path;
    first.stop_after_steps = a.cursor.global_step - 3;
    const TrainResult paused = run_curriculum(plan, cfg, train, val, first);
    CHECK_FALSE(paused.cursor.finished);
    TrainOptions second;
    second.metrics = &log_c;
    second.checkpoint_path = path;
    const TrainResult resumed = run_curriculum(plan, cfg, train, val, second, load_checkpoint(path));
    CHECK(resumed.cursor.finished);
    CHECK(resumed.params == a.params);
    CHECK(resumed.adam == a.adam);
    CHECK(log_c.str() == log_a.str());

    Curriculum other = plan;
    other.seed = 100;
    CHECK_THROWS_AS(run_curriculum(other, cfg, train, val, TrainOptions{}, load_checkpoint(path)), std::invalid_argument);
    std::filesystem::remove(path);
  }
}

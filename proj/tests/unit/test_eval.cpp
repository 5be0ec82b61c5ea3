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
#include "ddafm/eval.hpp"
#include "ddafm/fspe.hpp"
#include "helpers.hpp"
#include "json.hpp"

using namespace ddafm;
using namespace ddafm::testing;

TEST_SUITE("eval") {
  TEST_CASE("nmse_eval reads only the scored region") {
    const FrameStructure f{80, 0.5e-3, 16, 1.44e6, 1, 2};
    const CTensor gt = random_ctensor(f.tensor_shape(), 1);
    const Mask tp = build_mask(MaskSpec::time_prediction(0.75), f);
    CHECK(nmse_eval(gt, gt, Task::TP, tp) == kNmseFloorDb);
    CHECK(nmse_eval(gt, CTensor(gt.shape()), Task::TP, tp) == doctest::Approx(0.0).epsilon(1e-12));

    // Perturb one entry per time index: only indices 60..79 move the score.
    for (std::size_t s = 0; s < 80; ++s) {
      CTensor pred = gt;
      pred.at({s, 3, 0, 1}) += cdouble(1.0, 0.0);
      const double db = nmse_eval(gt, pred, Task::TP, tp);
      if (s < 60) CHECK(db == kNmseFloorDb);
      else CHECK(db > kNmseFloorDb);
    }
    // CE scores every valid entry.
    const Mask ce = build_mask(MaskSpec::channel_estimation(4), f);
    CTensor pred = gt;
    pred.at({0, 0, 0, 0}) += 1.0;
    CHECK(nmse_eval(gt, pred, Task::CE, ce) > kNmseFloorDb);
    CHECK_THROWS_AS(nmse_ratio(gt, gt, Task::TP, build_mask(MaskSpec::time_prediction(1.0), f)),
                    std::invalid_argument);
  }

  TEST_CASE("rms delay spread and bins") {
    CHECK(rms_delay_spread(PathSet{{Path{}}}) == 0.0);
    CHECK(delay_spread_bin(0.0) == "ultra-low");
    PathSet two{{Path{{1, 0}, 0, 0.0, 0, 0}, Path{{0, 1}, 0, 200e-9, 0, 0}}};
    CHECK(rms_delay_spread(two) == doctest::Approx(100e-9).epsilon(1e-12));
    CHECK(delay_spread_bin(100e-9) == "high");
    CHECK(delay_spread_bin(99.9e-9) == "medium");
    CHECK(delay_spread_bin(5e-6) == "beyond");

    ScenarioConfig cfg;
    cfg.path_count_min = cfg.path_count_max = 8;
    Rng rng(2);
    const PathSet p = sample_paths(cfg, rng);
    double w = 0, m1 = 0, m2 = 0;
    for (const Path& q : p.paths) {
      const double pw = std::norm(q.beta);
      w += pw;
      m1 += pw * q.tau;
      m2 += pw * q.tau * q.tau;
    }
    const double ref = std::sqrt(m2 / w - (m1 / w) * (m1 / w));
    CHECK(std::abs(rms_delay_spread(p) - ref) <= 1e-12 * std::max(ref, 1e-9));
    CHECK(speed_bin(0.0) == speed_bin_labels().front());
    CHECK(speed_bin(200.0) == speed_bin_labels().back());
  }

  TEST_CASE("sensitivity frames") {
    const FrameStructure f{80, 0.5e-3, 64, 0.36e6, 8, 4};
    const FrameStructure c1 = sensitivity_frame(f, {2, SensitivityKind::RegionReduction});
    CHECK(c1.n_f == 32);
    CHECK(c1.df == 0.72e6);
    CHECK(resolutions(c1).tau == doctest::Approx(resolutions(f).tau).epsilon(1e-15));
    CHECK(1.0 / c1.df == doctest::Approx(0.5 / f.df).epsilon(1e-15));
    for (SensitivityKind k : {SensitivityKind::RegionReduction, SensitivityKind::ResolutionCoarsening})
      CHECK(sensitivity_frame(f, {1, k}) == f);
    const FrameStructure c2 = sensitivity_frame(f, {4, SensitivityKind::ResolutionCoarsening});
    CHECK(c2.df == f.df);
    CHECK(c2.n_f == 16);
    CHECK(resolutions(c2).tau == doctest::Approx(4.0 * resolutions(f).tau).epsilon(1e-15));
    CHECK(resolutions(c2).nu == doctest::Approx(4.0 * resolutions(f).nu).epsilon(1e-15));
    CHECK_THROWS_AS(sensitivity_frame(f, {3, SensitivityKind::RegionReduction}), std::invalid_argument);
  }

  TEST_CASE("DFT channel estimator: exact without aliasing, broken at the first alias") {
    const FrameStructure f{6, 0.5e-3, 32, 1.44e6, 2, 2};
    const double r_tau = resolutions(f).tau;
    for (std::size_t d : {2, 4}) {
      const Mask comb = build_mask(MaskSpec::channel_estimation(d), f);
      // Every on-grid delay below U_tau / D.
      for (std::size_t n = 0; n < 32 / d; ++n) {
        Path p{{0.8, 0.6}, 40.0, static_cast<double>(n) * r_tau, 0.3, 0.1};
        const CsiTensor h = synth_stf(PathSet{{p}}, f);
        const CsiTensor est = baseline_ce_dft(apply_mask(h, comb), d);
        CHECK(nmse_ratio(h.data, est.data, Task::CE, comb) <= 1e-20);
      }
      Path alias{{1, 0}, 0.0, static_cast<double>(32 / d) * r_tau, 0, 0};
      const CsiTensor h = synth_stf(PathSet{{alias}}, f);
      const CsiTensor est = baseline_ce_dft(apply_mask(h, comb), d);
      CHECK(nmse_eval(h.data, est.data, Task::CE, comb) > -3.0);
    }
    const CsiTensor h = random_stf(f, 3);
    CHECK(max_abs_diff(baseline_ce_dft(h, 1).data, h.data) < 1e-12);
    CHECK_THROWS_AS(baseline_ce_dft(h, 5), std::invalid_argument);
  }

  TEST_CASE("linear interpolation baseline") {
    const FrameStructure f{10, 0.5e-3, 8, 1.44e6, 1, 1};
    CsiTensor constant(Domain::STF, f, CTensor(f.tensor_shape(), cdouble(0.3, -0.4)));
    const Mask tp = build_mask(MaskSpec::time_prediction(0.5), f);
    CHECK(max_abs_diff(baseline_interp_linear(apply_mask(constant, tp), tp).data, constant.data) < 1e-15);
    const Mask comb = build_mask(MaskSpec::channel_estimation(2), f);
    const CsiTensor ce = baseline_interp_linear(apply_mask(constant, comb), comb);
    CHECK(max_abs_diff(ce.data, constant.data) < 1e-15);

    const CsiTensor r = random_stf(f, 4);
    const Mask full = build_mask(MaskSpec::time_prediction(1.0), f);
    CHECK(baseline_interp_linear(r, full).data == r.data);
    const Mask one{MaskAxis::Time, {1, 0, 0, 0, 0, 0, 0, 0, 0, 0}};
    CHECK_THROWS_AS(baseline_interp_linear(r, one), std::invalid_argument);

    // Linear phase ramp: hold-last error grows with the horizon.
    Path p{{1, 0}, 150.0, 0.0, 0, 0};
    const CsiTensor ramp = synth_stf(PathSet{{p}}, f);
    const CsiTensor pred = baseline_interp_linear(apply_mask(ramp, tp), tp);
    double prev = 0.0;
    for (std::size_t s = 5; s < 10; ++s) {
      const double e = std::abs(pred.at(s, 0, 0, 0) - ramp.at(s, 0, 0, 0));
      CHECK(e >= prev);
      prev = e;
    }
  }

  TEST_CASE("report aggregation and pred = gt floor") {
    GenerateOptions g;
    g.frames = {*frame_preset("fs-a-beijing")};
    g.count = 6;
    g.seed = 5;
    g.fixed_snr_db = 10.0;
    const Dataset ds = generate_dataset(g);
    EvalOptions opt;
    opt.tasks = {MaskSpec::time_prediction(0.5), MaskSpec::channel_estimation(4)};
    opt.pred_equals_gt = true;
    opt.kappa_sweep = true;
    opt.kappas = {1, 2, 4, 8};
    ModelConfig cfg;
    cfg.in_channels = 64;
    cfg.n_t_max = 40;
    cfg.n_f_max = 32;
    const ParamStore none;
    const EvalReport rep = evaluate(ds.records, &cfg, &none, opt);
    CHECK(rep.records == 6);
    for (const std::string& table : {"overall", "speed", "delay_spread", "snr"})
      for (const std::string& task : rep.tasks)
        for (const std::string& method : rep.methods) {
          if (method == "ce_dft" && task.rfind("CE", 0) != 0) continue;
          CHECK(rep.table_count(table, task, method) == 6);
        }
    const EvalCell* c = rep.find("overall", "CE D=4", "all", "ce_dft");
    REQUIRE(c != nullptr);
    CHECK(c->db() == kNmseFloorDb);
    CHECK(rep.find("overall", "CE D=4", "all", "model") != nullptr);
    CHECK(rep.find("overall", "TP x=0.5", "all", "ce_dft") == nullptr);
    for (const char* t : {"kappa_region_reduction", "kappa_resolution_coarsening"}) {
      CHECK(rep.bins.count(t) == 1);
      CHECK(rep.table_count(t, "TP x=0.5", "model") == 6 * 4);
    }
    const auto j = nlohmann::json::parse(rep.to_json());
    CHECK(j.contains("records"));
    std::ostringstream csv;
    rep.write_csv(csv);
    CHECK(csv.str().rfind("table,task,bin,method,nmse_db,count", 0) == 0);
    CHECK(task_label(MaskSpec::frequency_prediction(0.75)) == "FP x=0.75");
  }
}

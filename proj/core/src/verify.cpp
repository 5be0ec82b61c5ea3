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

#include "ddafm/verify.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <random>

#include "ddafm/channel.hpp"
#include "ddafm/dataio.hpp"
#include "ddafm/fft.hpp"
#include "ddafm/fspe.hpp"
#include "ddafm/model.hpp"
#include "ddafm/tasks.hpp"
#include "ddafm/train.hpp"
#include "ddafm/transform.hpp"

namespace ddafm {

namespace {

CsiTensor random_stf(const FrameStructure& f, Rng& rng) {
  std::normal_distribution<double> g;
  CsiTensor h(Domain::STF, f);
  for (cdouble& z : h.data.data()) z = {g(rng), g(rng)};
  return h;
}

// Direct evaluation of the DDA definition, one output bin at a time.
CsiTensor naive_dda(const CsiTensor& h) {
  const FrameStructure& f = h.frame;
  CsiTensor out(Domain::DDA, f);
  const double norm = 1.0 / std::sqrt(static_cast<double>(f.volume()));
  for (std::size_t v = 0; v < f.n_t; ++v)
    for (std::size_t t = 0; t < f.n_f; ++t)
      for (std::size_t q1 = 0; q1 < f.n_rx1; ++q1)
        for (std::size_t q2 = 0; q2 < f.n_rx2; ++q2) {
          cdouble acc{};
          for (std::size_t s = 0; s < f.n_t; ++s)
            for (std::size_t k = 0; k < f.n_f; ++k)
              for (std::size_t n1 = 0; n1 < f.n_rx1; ++n1)
                for (std::size_t n2 = 0; n2 < f.n_rx2; ++n2) {
                  const double turns = static_cast<double>(v * s) / static_cast<double>(f.n_t) -
                                       static_cast<double>(t * k) / static_cast<double>(f.n_f) +
                                       static_cast<double>(q1 * n1) / static_cast<double>(f.n_rx1) +
                                       static_cast<double>(q2 * n2) / static_cast<double>(f.n_rx2);
                  acc += h.at(s, k, n1, n2) * std::polar(1.0, -2.0 * std::numbers::pi * turns);
                }
          out.at(v, t, q1, q2) = acc * norm;
        }
  return out;
}

CheckResult make(std::string name, double value, double tol, std::string detail = {}) {
  return {std::move(name), value, tol, std::isfinite(value) && value <= tol, std::move(detail)};
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

void transform_checks(Rng& rng, std::vector<CheckResult>& out) {
  const FrameStructure small{8, 1e-3, 8, 1e5, 2, 2};
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const CsiTensor h = random_stf(small, rng);
    worst = std::max(worst, max_relative_error(stf_to_dda(h).data, naive_dda(h).data));
  }
  out.push_back(make("transform.naive_sum", worst, 1e-10, "8x8x2x2, 10 draws"));

  worst = 0.0;
  for (const std::string& name : frame_preset_names()) {
    const CsiTensor h = random_stf(*frame_preset(name), rng);
    worst = std::max(worst, max_relative_error(dda_to_stf(stf_to_dda(h)).data, h.data));
  }
  out.push_back(make("transform.round_trip", worst, 1e-12, "every preset frame"));
}

void duality_checks(Rng& rng, std::vector<CheckResult>& out) {
  const std::vector<MaskSpec> specs{MaskSpec::time_prediction(0.5),      MaskSpec::time_prediction(0.75),
                                    MaskSpec::frequency_prediction(0.5), MaskSpec::frequency_prediction(0.75),
                                    MaskSpec::channel_estimation(2),     MaskSpec::channel_estimation(4)};
  const FrameStructure frames[] = {*frame_preset("fs-a-beijing"), *frame_preset("fs-b-oklahoma")};
  for (const MaskSpec& spec : specs) {
    double worst = 0.0;
    for (const FrameStructure& f : frames) {
      const CsiTensor h = random_stf(f, rng);
      const Mask m = build_mask(spec, f);
      const CsiTensor lhs = stf_to_dda(apply_mask(h, m));
      const CsiTensor rhs = circular_convolve(stf_to_dda(h), dual_kernel(m));
      worst = std::max(worst, max_relative_error(lhs.data, rhs.data));
    }
    char name[64];
    std::snprintf(name, sizeof name, "duality.%s", spec.task == Task::CE
                                                       ? ("CE D=" + std::to_string(spec.pilot_spacing)).c_str()
                                                       : (std::string(to_string(spec.task)) + " x=" +
                                                          (spec.obs_ratio == 0.5 ? "0.5" : "0.75")).c_str());
    out.push_back(make(name, worst, 1e-10));
  }
}

void aliasing_checks(Rng& rng, std::vector<CheckResult>& out) {
  for (std::size_t d : {2u, 4u}) {
    double worst = 0.0;
    for (std::size_t nf : {32u, 64u, 72u, 128u}) {
      const FrameStructure f{8, 0.5e-3, nf, 0.36e6, 2, 2};
      const CsiTensor h = random_stf(f, rng);
      const CsiTensor lhs = alias_superpose(stf_to_dda(h), d);
      const CsiTensor rhs = stf_to_dda(apply_mask(h, build_mask(MaskSpec::channel_estimation(d), f)));
      worst = std::max(worst, max_relative_error(lhs.data, rhs.data));
    }
    out.push_back(make("aliasing.D=" + std::to_string(d), worst, 1e-10, "N_f in {32, 64, 72, 128}"));
  }
}

void gradient_check(std::uint64_t seed, std::vector<CheckResult>& out) {
  ModelConfig cfg;
  cfg.embed_dim = 16;
  cfg.heads = 2;
  cfg.blocks_per_module = 2;
  cfg.module_count = 1;
  cfg.in_channels = 8;
  cfg.n_t_max = 16;
  cfg.n_f_max = 16;
  const FrameStructure f{16, 0.5e-3, 16, 1.44e6, 2, 2};
  ParamStore params = init_params(cfg, seed);
  Rng rng(seed);
  std::normal_distribution<double> g;
  for (Tensor& t : params.tensors())
    for (double& v : t.data()) v += 0.05 * g(rng);

  ScenarioConfig sc;
  Record rec;
  rec.frame = f;
  rec.paths = sample_paths(sc, rng);
  CsiTensor gt = normalize_energy(synth_stf(rec.paths, f));
  rec.obs = add_noise(gt, 10.0, rng).data;
  rec.gt = gt.data;
  const PreparedSample s = prepare_sample(rec, MaskSpec::time_prediction(0.5), 16, 16);
  const Backbone model(cfg);
  const SampleGradient analytic = sample_gradient(model, params, s, rec.gt);

  auto loss_at = [&](const ParamStore& p) {
    Tensor y = model.infer(p, s.input, s.frame, s.validity);
    return nmse_loss(rec.gt, decode_prediction(y.reshaped({y.dim(0) * y.dim(1), y.dim(2)}), s).data);
  };
  double worst = 0.0;
  const double h = 1e-5;
  std::uniform_int_distribution<std::size_t> pick_tensor(0, params.size() - 1);
  for (int probe = 0; probe < 20; ++probe) {
    const std::size_t ti = pick_tensor(rng);
    std::uniform_int_distribution<std::size_t> pick(0, params.tensors()[ti].size() - 1);
    const std::size_t k = pick(rng);
    ParamStore p = params;
    const double x0 = p.tensors()[ti][k];
    p.tensors()[ti][k] = x0 + h;
    const double up = loss_at(p);
    p.tensors()[ti][k] = x0 - h;
    const double down = loss_at(p);
    worst = std::max(worst, rel_diff(analytic.grads[ti][k], (up - down) / (2.0 * h)));
  }
  out.push_back(make("gradient.backbone", worst, 1e-4, "C=16, 16x16 grid, 20 probes"));
}

void param_count_checks(std::vector<CheckResult>& out) {
  const std::pair<const char*, std::pair<ModelConfig, double>> cases[] = {
      {"params.small", {ModelConfig::small(), 62.62e6}},
      {"params.base", {ModelConfig::base(), 97.69e6}},
      {"params.large", {ModelConfig::large(), 140.52e6}}};
  for (const auto& [name, c] : cases) {
    const double n = static_cast<double>(count_params(c.first));
    char detail[64];
    std::snprintf(detail, sizeof detail, "%.2fM vs %.2fM", n / 1e6, c.second / 1e6);
    out.push_back(make(name, std::abs(n - c.second) / c.second, 0.05, detail));
  }
}

void fspe_check(std::vector<CheckResult>& out) {
  FsPeConfig cfg;
  const FrameStructure f{8, 1.0 / (8 * cfg.ref_res_nu), 16, 1.0 / (16 * cfg.ref_res_tau), 1, 1};
  const Tensor pe = fs_pe(f, cfg);
  const std::size_t c = cfg.embed_dim, pairs = c / 4;
  double worst = 0.0;
  for (std::size_t i = 0; i < f.n_t; ++i)
    for (std::size_t j = 0; j < f.n_f; ++j)
      for (std::size_t l = 0; l < pairs; ++l) {
        const double w = 1.0 / std::pow(10000.0, static_cast<double>(l) / static_cast<double>(pairs));
        const double* cell = pe.raw() + (i * f.n_f + j) * c;
        worst = std::max({worst, std::abs(cell[2 * l] - std::sin(static_cast<double>(i) * w)),
                          std::abs(cell[2 * l + 1] - std::cos(static_cast<double>(i) * w)),
                          std::abs(cell[c / 2 + 2 * l] - std::sin(static_cast<double>(j) * w)),
                          std::abs(cell[c / 2 + 2 * l + 1] - std::cos(static_cast<double>(j) * w))});
      }
  out.push_back(make("fspe.classical", worst, 1e-12));
}

void attention_cost_check(std::vector<CheckResult>& out) {
  ModelConfig cfg;
  cfg.embed_dim = 16;
  cfg.heads = 2;
  cfg.blocks_per_module = 2;
  cfg.module_count = 1;
  cfg.in_channels = 2;
  cfg.n_t_max = 80;
  cfg.n_f_max = 128;
  const ParamStore params = init_params(cfg, 3);
  const Backbone model(cfg);
  auto ops = [&](std::size_t rows) {
    const FrameStructure f{rows, 0.5e-3, 128, 0.36e6, 1, 1};
    ad::reset_attention_score_ops();
    model.infer(params, Tensor({rows, 128, 2}, 0.1), f);
    return static_cast<double>(ad::attention_score_ops());
  };
  const double ratio = ops(80) / ops(40);
  char detail[64];
  std::snprintf(detail, sizeof detail, "80x128 / 40x128 = %.4f", ratio);
  out.push_back(make("attention.linearity", std::abs(ratio - 2.0) / 2.0, 0.05, detail));
}

}  // namespace

std::vector<CheckResult> run_verify_suite(const VerifyOptions& opt) {
  fault::set_fft_sign_flip(opt.inject_fft_sign_fault);
  std::vector<CheckResult> out;
  try {
    Rng rng(opt.seed);
    transform_checks(rng, out);
    duality_checks(rng, out);
    aliasing_checks(rng, out);
    gradient_check(opt.seed, out);
    param_count_checks(out);
    fspe_check(out);
    attention_cost_check(out);
  } catch (...) {
    fault::set_fft_sign_flip(false);
    throw;
  }
  fault::set_fft_sign_flip(false);
  return out;
}

bool write_verify_report(const std::vector<CheckResult>& results, std::ostream& out) {
  char buf[256];
  std::size_t failed = 0;
  for (const CheckResult& r : results) {
    std::snprintf(buf, sizeof buf, "%-4s %-26s value=%-11.3e tol=%-9.1e %s\n", r.passed ? "PASS" : "FAIL",
                  r.name.c_str(), r.value, r.tolerance, r.detail.c_str());
    out << buf;
    failed += !r.passed;
  }
  out << (failed ? "verify: " + std::to_string(failed) + " check(s) failed\n"
                 : "verify: all " + std::to_string(results.size()) + " checks passed\n");
  return failed == 0;
}

}  // namespace ddafm

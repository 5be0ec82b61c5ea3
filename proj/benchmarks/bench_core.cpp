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

#include <benchmark/benchmark.h>

#include <random>

#include "ddafm/dataio.hpp"
#include "ddafm/fft.hpp"
#include "ddafm/model.hpp"
#include "ddafm/train.hpp"
#include "ddafm/transform.hpp"

namespace {

using namespace ddafm;

std::vector<cdouble> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<cdouble> x(n);
  for (cdouble& z : x) z = {g(rng), g(rng)};
  return x;
}

void BM_Fft(benchmark::State& state) {
  std::vector<cdouble> x = noise(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) {
    fft_inplace(x, FftDirection::Forward);
    benchmark::DoNotOptimize(x.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
// Powers of two, the mixed-radix 72 and 80, and a prime that takes the fallback path.
BENCHMARK(BM_Fft)->Arg(32)->Arg(72)->Arg(80)->Arg(97)->Arg(128)->Arg(1024);

void BM_StfToDda(benchmark::State& state, const char* preset) {
  const FrameStructure f = *frame_preset(preset);
  CsiTensor h(Domain::STF, f);
  const auto x = noise(h.data.size(), 2);
  std::copy(x.begin(), x.end(), h.data.raw());
  for (auto _ : state) benchmark::DoNotOptimize(stf_to_dda(h));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.volume()));
}
BENCHMARK_CAPTURE(BM_StfToDda, fs_a_beijing, "fs-a-beijing");
BENCHMARK_CAPTURE(BM_StfToDda, fs_b_rio, "fs-b-rio");

Record desk_record() {
  GenerateOptions g;
  g.frames = {*frame_preset("fs-a-beijing")};
  g.count = 1;
  g.seed = 3;
  g.fixed_snr_db = 10.0;
  return generate_dataset(g).records.front();
}

ModelConfig desk_model(std::size_t window) {
  ModelConfig cfg;
  cfg.in_channels = 64;
  cfg.n_t_max = 40;
  cfg.n_f_max = 32;
  cfg.window_size = window;
  return cfg;
}

void BM_BackboneForward(benchmark::State& state) {
  const ModelConfig cfg = desk_model(static_cast<std::size_t>(state.range(0)));
  const ParamStore params = init_params(cfg, 1);
  const Backbone model(cfg);
  const PreparedSample s = prepare_sample(desk_record(), MaskSpec::channel_estimation(4), 40, 32);
  for (auto _ : state) benchmark::DoNotOptimize(model.infer(params, s.input, s.frame, s.validity));
  state.counters["tokens"] = 40 * 32;
}
BENCHMARK(BM_BackboneForward)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_SampleGradient(benchmark::State& state) {
  const ModelConfig cfg = desk_model(8);
  const ParamStore params = init_params(cfg, 1);
  const Backbone model(cfg);
  const Record rec = desk_record();
  const PreparedSample s = prepare_sample(rec, MaskSpec::time_prediction(0.5), 40, 32);
  for (auto _ : state) benchmark::DoNotOptimize(sample_gradient(model, params, s, rec.gt));
}
BENCHMARK(BM_SampleGradient)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ddafm/fspe.hpp"
#include "ddafm/model.hpp"
#include "ddafm/tasks.hpp"
#include "ddafm/train.hpp"
#include "helpers.hpp"

using namespace ddafm;
using namespace ddafm::testing;

namespace {

ModelConfig toy_config(std::size_t c = 16, std::size_t heads = 2, std::size_t blocks = 2, std::size_t modules = 1,
                       std::size_t window = 4) {
  ModelConfig cfg;
  cfg.embed_dim = c;
  cfg.heads = heads;
  cfg.blocks_per_module = blocks;
  cfg.module_count = modules;
  cfg.window_size = window;
  cfg.in_channels = 8;  // 2x2 array
  cfg.n_t_max = 16;
  cfg.n_f_max = 16;
  return cfg;
}

void zero_matching(ParamStore& p, std::initializer_list<const char*> suffixes) {
  for (std::size_t i = 0; i < p.size(); ++i)
    for (const char* s : suffixes) {
      const std::string& n = p.names()[i];
      const std::string suf(s);
      if (n.size() >= suf.size() && n.compare(n.size() - suf.size(), suf.size(), suf) == 0) p.tensors()[i].fill(0.0);
    }
}

/// Random non-trivial parameters (the default init leaves biases and tables at zero).
ParamStore noisy_params(const ModelConfig& cfg, std::uint64_t seed) {
  ParamStore p = init_params(cfg, seed);
  Rng rng(seed + 1);
  std::normal_distribution<double> g(0.0, 0.05);
  for (auto& t : p.tensors())
    for (double& v : t.data()) v += g(rng);
  return p;
}

}  // namespace

TEST_SUITE("fspe") {
  TEST_CASE("resolutions") {
    const FrameStructure denver = *frame_preset("fs-a-denver");
    const Resolutions r = resolutions(denver);
    CHECK(r.tau == doctest::Approx(21.70e-9).epsilon(5e-4));
    CHECK(r.nu == doctest::Approx(25.0).epsilon(1e-12));
    FrameStructure wide = denver;
    wide.n_f *= 2;
    CHECK(resolutions(wide).tau == r.tau / 2.0);
  }

  TEST_CASE("origin cell alternates (0, 1)") {
    FsPeConfig cfg;
    const Tensor pe = fs_pe(*frame_preset("fs-b-rio"), cfg);
    CHECK(pe.shape() == Shape{80, 128, 64});
    for (std::size_t c = 0; c < 64; ++c) CHECK(pe[c] == (c % 2 == 0 ? 0.0 : 1.0));
    for (double v : pe.data()) CHECK(std::abs(v) <= 1.0);
  }

  TEST_CASE("reference resolutions reproduce the classical encoding") {
    FsPeConfig cfg;
    cfg.embed_dim = 32;
    // A frame whose resolutions equal the references exactly.
    FrameStructure f{10, 1.0 / (10 * cfg.ref_res_nu), 12, 1.0 / (12 * cfg.ref_res_tau), 1, 1};
    const Tensor pe = fs_pe(f, cfg);
    const std::size_t pairs = 8;
    double worst = 0.0;
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = 0; j < 12; ++j)
        for (std::size_t l = 0; l < pairs; ++l) {
          const double w = 1.0 / std::pow(10000.0, static_cast<double>(l) / pairs);
          const double* cell = pe.raw() + (i * 12 + j) * 32;
          worst = std::max({worst, std::abs(cell[2 * l] - std::sin(i * w)), std::abs(cell[2 * l + 1] - std::cos(i * w)),
                            std::abs(cell[16 + 2 * l] - std::sin(j * w)),
                            std::abs(cell[16 + 2 * l + 1] - std::cos(j * w))});
        }
    CHECK(worst <= 1e-12);
  }

  TEST_CASE("scale covariance and axis separability") {
    FsPeConfig cfg;
    // Same N*df and N*dt products, different (N, delta) splits.
    const FrameStructure a{80, 0.5e-3, 32, 1.44e6, 8, 4};
    const FrameStructure b{40, 1.0e-3, 128, 0.36e6, 8, 4};
    CHECK(fs_pe(a, cfg, 80, 128) == fs_pe(b, cfg, 80, 128));

    const Tensor pe = fs_pe(a, cfg);
    for (std::size_t i : {0, 7, 41})
      for (std::size_t j : {1, 20}) {
        const double* x = pe.raw() + (i * 32 + j) * 64;
        const double* y = pe.raw() + (i * 32 + 3) * 64;
        const double* z = pe.raw() + (2 * 32 + j) * 64;
        CHECK(std::equal(x, x + 32, y));
        CHECK(std::equal(x + 32, x + 64, z + 32));
      }
  }

  TEST_CASE("configuration errors") {
    FsPeConfig cfg;
    cfg.embed_dim = 30;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.embed_dim = 64;
    cfg.patch_size = 3;
    CHECK_THROWS_AS(fs_pe(*frame_preset("fs-a-denver"), cfg), std::invalid_argument);
  }
}

TEST_SUITE("model") {
  TEST_CASE("window partition geometry") {
    const Tensor grid = random_tensor({80, 128, 3}, 1);
    const Tensor w = window_partition(grid, 8, ShiftMode::None);
    CHECK(w.shape() == Shape{160, 64, 3});
    for (ShiftMode mode : {ShiftMode::None, ShiftMode::Half})
      CHECK(window_reverse(window_partition(grid, 8, mode), 80, 128, 8, mode) == grid);
    CHECK_THROWS_AS(window_partition(random_tensor({20, 16, 1}, 2), 8, ShiftMode::None), std::invalid_argument);

    const Tensor small = random_tensor({8, 8, 2}, 3);
    const Tensor s = window_partition(small, 8, ShiftMode::Half);
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j)
        for (std::size_t c = 0; c < 2; ++c)
          CHECK(s.at({0, i * 8 + j, c}) == small.at({(i + 4) % 8, (j + 4) % 8, c}));
  }

  TEST_CASE("relative position table rows") {
    const auto idx = relative_position_index(8);
    CHECK(idx.size() == 64 * 64);
    CHECK(*std::max_element(idx.begin(), idx.end()) == 15 * 15 - 1);
    const ModelConfig cfg = toy_config();
    for (const auto& [name, shape] : parameter_layout(cfg))
      if (name.find("rel_bias") != std::string::npos) CHECK(shape == Shape{49, 2});
  }

  TEST_CASE("wmsa: zero Q and K give the mean of V; permutation equivariance") {
    const ModelConfig cfg = toy_config();
    ParamStore p = noisy_params(cfg, 5);
    const std::string pre = "modules.0.blocks.0.attn";
    p.at(pre + ".rel_bias").fill(0.0);
    const WindowPlan plan = make_window_plan(4, 4, 4, ShiftMode::None, 2);
    const Tensor tokens = random_tensor({16, 16}, 6);

    SUBCASE("permutation") {
      std::vector<std::size_t> perm(16);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), Rng(7));
      Tensor permuted({16, 16});
      for (std::size_t r = 0; r < 16; ++r) std::copy_n(tokens.raw() + perm[r] * 16, 16, permuted.raw() + r * 16);
      ad::Graph g;
      BoundParams b(g, p, false);
      const Tensor out = wmsa(g.constant(tokens), b, pre, plan.layout).value();
      const Tensor outp = wmsa(g.constant(permuted), b, pre, plan.layout).value();
      double worst = 0.0;
      for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t c = 0; c < 16; ++c) worst = std::max(worst, std::abs(outp.at({r, c}) - out.at({perm[r], c})));
      CHECK(worst <= 1e-12);
    }
    SUBCASE("uniform attention") {
      Tensor& w = p.at(pre + ".qkv.weight");
      Tensor& bias = p.at(pre + ".qkv.bias");
      for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t c = 0; c < 32; ++c) w.at({r, c}) = 0.0;
      for (std::size_t c = 0; c < 32; ++c) bias[c] = 0.0;
      p.at(pre + ".proj.weight").fill(0.0);
      for (std::size_t c = 0; c < 16; ++c) p.at(pre + ".proj.weight").at({c, c}) = 1.0;
      p.at(pre + ".proj.bias").fill(0.0);
      ad::Graph g;
      BoundParams b(g, p, false);
      const Tensor out = wmsa(g.constant(tokens), b, pre, plan.layout).value();
      // V = tokens * Wv + bv; every output row is the column mean of V.
      const Tensor v = ad::linear(g.constant(tokens), b[pre + ".qkv.weight"], b[pre + ".qkv.bias"]).value();
      for (std::size_t c = 0; c < 16; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < 16; ++r) mean += v.at({r, 32 + c});
        mean /= 16.0;
        for (std::size_t r = 0; r < 16; ++r) CHECK(out.at({r, c}) == doctest::Approx(mean).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("block, module and stack residual identities") {
    const ModelConfig cfg = toy_config();
    ParamStore p = noisy_params(cfg, 8);
    zero_matching(p, {".attn.proj.weight", ".attn.proj.bias", ".mlp.fc2.weight", ".mlp.fc2.bias"});
    const GridContext grid = GridContext::make(cfg, 8, 8);
    const Tensor x0 = random_tensor({64, 16}, 9);
    ad::Graph g;
    BoundParams b(g, p, false);
    ad::Var x = g.constant(x0);
    CHECK(block_forward(x, b, "modules.0.blocks.0", grid.shifted).value() == x0);

    ParamStore q = noisy_params(cfg, 10);
    zero_matching(q, {".conv.weight", ".conv.bias"});
    ad::Graph g2;
    BoundParams b2(g2, q, false);
    CHECK(module_forward(g2.constant(x0), b2, 0, grid, cfg).value() == x0);

    // Full stack with zeroed module convs: projection of (embedding + encoding).
    const FrameStructure f = small_frame(8, 8);
    const Tensor input = random_tensor({8, 8, 8}, 11);
    const Tensor out = Backbone(cfg).infer(q, input, f);
    ad::Graph g3;
    BoundParams b3(g3, q, false);
    ad::Var e = ad::conv2d(g3.constant(input.reshaped({64, 8})), 8, 8, b3["embed.weight"], b3["embed.bias"]);
    e = ad::add(e, g3.constant(fs_pe(f, cfg.fspe(), 8, 8).reshaped({64, 16})));
    const Tensor ref = ad::conv2d(e, 8, 8, b3["proj.weight"], b3["proj.bias"]).value();
    CHECK(out.reshaped({64, 8}) == ref);
  }

  TEST_CASE("single-block module is block, conv, residual") {
    ModelConfig cfg = toy_config(16, 2, 1, 1);
    const ParamStore p = noisy_params(cfg, 12);
    const GridContext grid = GridContext::make(cfg, 8, 8);
    const Tensor x0 = random_tensor({64, 16}, 13);
    ad::Graph g;
    BoundParams b(g, p, false);
    ad::Var x = g.constant(x0);
    ad::Var z = block_forward(x, b, "modules.0.blocks.0", grid.plain);
    z = ad::add(x, ad::conv2d(z, 8, 8, b["modules.0.conv.weight"], b["modules.0.conv.bias"]));
    CHECK(module_forward(x, b, 0, grid, cfg).value() == z.value());
  }

  TEST_CASE("block gradient matches finite differences") {
    // 16x16 grid, 32 channels, shifted windows.
    ModelConfig cfg = toy_config(32, 2, 2, 1, 8);
    const ParamStore p0 = noisy_params(cfg, 14);
    const WindowPlan plan = make_window_plan(16, 16, 8, ShiftMode::Half, 2);
    const Tensor x0 = random_tensor({256, 32}, 15);
    const Tensor weights = random_tensor({256, 32}, 16);
    const std::string pre = "modules.0.blocks.1";

    auto loss_of = [&](const ParamStore& p, const Tensor& x, std::vector<Tensor>* grads, Tensor* gx) {
      ad::Graph g;
      BoundParams b(g, p, grads != nullptr);
      ad::Var xv = g.leaf(x, gx != nullptr);
      ad::Var out = block_forward(xv, b, pre, plan);
      ad::Var loss = ad::sum(ad::mul(out, g.constant(weights)));
      const double value = loss.value()[0];
      if (grads) {
        g.backward(loss);
        for (const ad::Var& v : b.vars()) grads->push_back(g.grad(v) ? *g.grad(v) : Tensor(v.shape(), 0.0));
        *gx = *g.grad(xv);
      }
      return value;
    };
    std::vector<Tensor> grads;
    Tensor gx;
    loss_of(p0, x0, &grads, &gx);

    Rng rng(17);
    const double h = 1e-6;
    double worst = 0.0;
    std::vector<std::size_t> block_params;
    for (std::size_t i = 0; i < p0.size(); ++i)
      if (p0.names()[i].rfind(pre, 0) == 0) block_params.push_back(i);
    for (int probe = 0; probe < 40; ++probe) {
      ParamStore p = p0;
      Tensor x = x0;
      double* slot;
      double analytic;
      if (probe % 4 == 0) {
        const std::size_t idx = std::uniform_int_distribution<std::size_t>(0, x.size() - 1)(rng);
        slot = &x[idx];
        analytic = gx[idx];
      } else {
        const std::size_t t = block_params[std::uniform_int_distribution<std::size_t>(0, block_params.size() - 1)(rng)];
        const std::size_t idx = std::uniform_int_distribution<std::size_t>(0, p.tensors()[t].size() - 1)(rng);
        slot = &p.tensors()[t][idx];
        analytic = grads[t][idx];
      }
      const double keep = *slot;
      *slot = keep + h;
      const double up = loss_of(p, x, nullptr, nullptr);
      *slot = keep - h;
      const double down = loss_of(p, x, nullptr, nullptr);
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-6}));
    }
    CHECK(worst <= 1e-5);
  }

  TEST_CASE("shifted windows carry information across window boundaries") {
    ModelConfig cfg = toy_config(16, 2, 2, 1, 4);
    const ParamStore p = noisy_params(cfg, 18);
    const GridContext grid = GridContext::make(cfg, 8, 8);
    Tensor x0 = random_tensor({64, 16}, 19);
    // A per-channel random kick; a constant shift would vanish under layer norm.
    const Tensor kick = random_tensor({16}, 23);
    Tensor x1 = x0;
    for (std::size_t c = 0; c < 16; ++c) x1.at({3 * 8 + 3, c}) += kick[c];  // last token of window 0

    auto run = [&](const Tensor& x, const WindowPlan& second) {
      ad::Graph g;
      BoundParams b(g, p, false);
      ad::Var v = block_forward(g.constant(x), b, "modules.0.blocks.0", grid.plain);
      return block_forward(v, b, "modules.0.blocks.1", second).value();
    };
    auto change_at = [](const Tensor& a, const Tensor& b, std::size_t token) {
      double d = 0.0;
      for (std::size_t c = 0; c < 16; ++c) d = std::max(d, std::abs(a.at({token, c}) - b.at({token, c})));
      return d;
    };
    const std::size_t neighbour = 4 * 8 + 4;  // first token of the diagonal window
    CHECK(change_at(run(x0, grid.shifted), run(x1, grid.shifted), neighbour) > 1e-6);
    CHECK(change_at(run(x0, grid.plain), run(x1, grid.plain), neighbour) == 0.0);
    // Tokens separated only by the wrap-around stay isolated in the shifted layer.
    const std::size_t wrapped = 7 * 8 + 7;
    Tensor x2 = x0;
    for (std::size_t c = 0; c < 16; ++c) x2.at({0, c}) += kick[c];
    const Tensor a = run(x0, grid.shifted), b2 = run(x2, grid.shifted);
    CHECK(change_at(a, b2, wrapped) == 0.0);
  }

  TEST_CASE("attention cost is linear in the token count") {
    ModelConfig cfg = toy_config(16, 2, 2, 1, 8);
    cfg.n_t_max = 80;
    cfg.n_f_max = 64;
    const ParamStore p = init_params(cfg, 20);
    const Backbone model(cfg);
    auto ops = [&](std::size_t rows) {
      const FrameStructure f = small_frame(rows, 64);
      const Tensor in = random_tensor({rows, 64, 8}, 21);
      ad::reset_attention_score_ops();
      model.infer(p, in, f);
      return ad::attention_score_ops();
    };
    const auto small = ops(40), large = ops(80);
    CHECK(small > 0);
    CHECK(static_cast<double>(large) / static_cast<double>(small) == doctest::Approx(2.0).epsilon(0.05));
  }

  TEST_CASE("backbone shape, purity and padded-token isolation") {
    const ModelConfig cfg = toy_config();
    const ParamStore p = noisy_params(cfg, 22);
    const Backbone model(cfg);
    const FrameStructure f = small_frame(12, 10);
    Tensor in = random_tensor({16, 16, 8}, 23);
    std::vector<std::uint8_t> valid(256, 0);
    for (std::size_t i = 0; i < 12; ++i)
      for (std::size_t j = 0; j < 10; ++j) valid[i * 16 + j] = 1;

    const Tensor a = model.infer(p, in, f, valid);
    CHECK(a.shape() == in.shape());
    CHECK(model.infer(p, in, f, valid) == a);

    Tensor junk = in;
    Rng rng(24);
    std::uniform_real_distribution<double> u(-100, 100);
    for (std::size_t cell = 0; cell < 256; ++cell)
      if (!valid[cell])
        for (std::size_t c = 0; c < 8; ++c) junk[cell * 8 + c] = u(rng);
    const Tensor b = model.infer(p, junk, f, valid);
    double worst = 0.0;
    for (std::size_t cell = 0; cell < 256; ++cell)
      for (std::size_t c = 0; c < 8; ++c) {
        if (valid[cell])
          worst = std::max(worst, std::abs(a[cell * 8 + c] - b[cell * 8 + c]));
        else
          CHECK(b[cell * 8 + c] == 0.0);
      }
    CHECK(worst <= 1e-10);
    CHECK_THROWS_AS(model.infer(p, random_tensor({16, 16, 6}, 1), f), std::invalid_argument);
  }

  TEST_CASE("pipeline loss gradient on the tiny config") {
    ModelConfig cfg = toy_config(16, 2, 2, 1, 8);
    const ParamStore p0 = noisy_params(cfg, 25);
    const Backbone model(cfg);
    Record rec;
    rec.frame = small_frame(16, 16);
    rec.gt = random_ctensor(rec.frame.tensor_shape(), 26);
    rec.obs = rec.gt;
    const PreparedSample s = prepare_sample(rec, MaskSpec::time_prediction(0.5), 16, 16);
    const SampleGradient sg = sample_gradient(model, p0, s, rec.gt);

    Rng rng(27);
    // Roundoff in the loss difference dominates below this step.
    const double h = 1e-4;
    double worst = 0.0;
    for (int probe = 0; probe < 30; ++probe) {
      const std::size_t t = std::uniform_int_distribution<std::size_t>(0, p0.size() - 1)(rng);
      const std::size_t idx = std::uniform_int_distribution<std::size_t>(0, p0.tensors()[t].size() - 1)(rng);
      ParamStore p = p0;
      const double keep = p.tensors()[t][idx];
      p.tensors()[t][idx] = keep + h;
      const double up = sample_gradient(model, p, s, rec.gt).loss;
      p.tensors()[t][idx] = keep - h;
      const double down = sample_gradient(model, p, s, rec.gt).loss;
      const double numeric = (up - down) / (2 * h);
      const double analytic = sg.grads[t][idx];
      worst = std::max(worst, std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-6}));
    }
    CHECK(worst <= 1e-4);
  }

  TEST_CASE("parameter counts") {
    const ModelConfig tiny = toy_config();
    CHECK(count_params(tiny) == init_params(tiny, 1).scalar_count());
    ModelConfig desk = toy_config(64, 2, 2, 2, 8);
    desk.in_channels = 64;
    CHECK(count_params(desk) == init_params(desk, 1).scalar_count());

    auto within = [](std::size_t n, double target) { return std::abs(static_cast<double>(n) / target - 1.0) <= 0.05; };
    CHECK(within(count_params(ModelConfig::small()), 62.62e6));
    CHECK(within(count_params(ModelConfig::base()), 97.69e6));
    CHECK(within(count_params(ModelConfig::large()), 140.52e6));

    // Attention + MLP mass grows ~4x when C doubles.
    auto block_mass = [](const ModelConfig& c) {
      std::size_t n = 0;
      for (const auto& [name, shape] : parameter_layout(c))
        if (name.find(".attn.") != std::string::npos || name.find(".mlp.") != std::string::npos)
          n += shape_numel(shape);
      return static_cast<double>(n);
    };
    ModelConfig wide = ModelConfig::small();
    wide.embed_dim *= 2;
    CHECK(block_mass(wide) / block_mass(ModelConfig::small()) == doctest::Approx(4.0).epsilon(0.02));
  }

  TEST_CASE("configuration validation names the field") {
    ModelConfig cfg = toy_config();
    cfg.heads = 3;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("heads"), std::invalid_argument);
    cfg = toy_config();
    cfg.n_f_max = 18;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("n_f_max"), std::invalid_argument);
  }
}

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
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ddafm/config.hpp"
#include "ddafm/dataio.hpp"
#include "ddafm/train.hpp"
#include "helpers.hpp"

using namespace ddafm;
using namespace ddafm::testing;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("ddafm_unit_" + name); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("dataio") {
  TEST_CASE("payload size formula") {
    const FrameStructure denver = *frame_preset("fs-a-denver");
    CHECK(record_payload_bytes(denver) == 2u * 2u * 80u * 32u * 32u * 4u);
    GenerateOptions g;
    g.frames = {denver};
    g.count = 100;
    g.seed = 7;
    g.threads = 2;
    std::ostringstream out;
    write_dataset(generate_dataset(g), out);
    const std::string bytes = out.str();
    const auto end = bytes.find("end-header\n");
    REQUIRE(end != std::string::npos);
    CHECK(bytes.size() - (end + 11) == 100u * 2u * 2u * 80u * 32u * 32u * 4u);
  }

  TEST_CASE("round trip, corruption and truncation") {
    GenerateOptions g;
    g.frames = {small_frame(4, 8), small_frame(8, 4, 1, 2)};
    g.count = 5;
    g.seed = 3;
    const Dataset ds = generate_dataset(g);
    std::stringstream buf;
    write_dataset(ds, buf);
    const std::string bytes = buf.str();

    std::istringstream in(bytes);
    const Dataset back = read_dataset(in);
    REQUIRE(back.records.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      const Record& a = ds.records[i];
      const Record& b = back.records[i];
      CHECK(a.frame == b.frame);
      CHECK(a.seed == b.seed);
      CHECK(a.snr_db == b.snr_db);
      CHECK(a.speed_mps == b.speed_mps);
      CHECK(a.paths == b.paths);
      for (std::size_t k = 0; k < a.obs.size(); ++k) {
        CHECK(b.obs[k].real() == static_cast<double>(static_cast<float>(a.obs[k].real())));
        CHECK(b.gt[k].imag() == static_cast<double>(static_cast<float>(a.gt[k].imag())));
      }
    }
    CHECK(to_json(back.scenario) == to_json(ds.scenario));

    std::string corrupt = bytes;
    corrupt[corrupt.size() - 10] ^= 0x01;
    std::istringstream bad(corrupt);
    CHECK_THROWS_AS(read_dataset(bad), DataError);

    std::istringstream cut(bytes.substr(0, bytes.size() - 4));
    CHECK_THROWS_AS(read_dataset(cut), DataError);

    std::string version = bytes;
    version.replace(version.find("DDAFM-DATASET 1"), 15, "DDAFM-DATASET 9");
    std::istringstream wrong(version);
    CHECK_THROWS_AS(read_dataset(wrong), DataError);
    CHECK_THROWS_AS(read_dataset(temp_file("does_not_exist")), DataError);
  }

  TEST_CASE("generation is byte-reproducible and thread independent") {
    GenerateOptions g;
    g.frames = {small_frame(8, 8)};
    g.count = 12;
    g.seed = 21;
    std::ostringstream a, b;
    write_dataset(generate_dataset(g), a);
    g.threads = 4;
    write_dataset(generate_dataset(g), b);
    CHECK(a.str() == b.str());
    g.seed = 22;
    std::ostringstream c;
    write_dataset(generate_dataset(g), c);
    CHECK(c.str() != a.str());
  }

  TEST_CASE("record contents follow the generation pipeline") {
    GenerateOptions g;
    g.frames = {small_frame(8, 16, 2, 2)};
    g.count = 20;
    g.seed = 4;
    g.fixed_snr_db = 10.0;
    const Dataset ds = generate_dataset(g);
    for (const Record& r : ds.records) {
      CHECK(r.snr_db == 10.0);
      CHECK(squared_norm(r.gt) == doctest::Approx(1.0).epsilon(1e-12));
      const CsiTensor gt = normalize_energy(synth_stf(r.paths, r.frame));
      CHECK(max_abs_diff(gt.data, r.gt) < 1e-12);
      CHECK(r.rms_delay_spread_s >= 0.0);
    }
  }

  TEST_CASE("train-style SNR is uniform on [5, 20] dB") {
    GenerateOptions g;
    g.frames = {small_frame(1, 1, 1, 1)};
    g.count = 10000;
    g.seed = 8;
    const Dataset ds = generate_dataset(g);
    std::vector<double> snr;
    for (const Record& r : ds.records) snr.push_back(r.snr_db);
    std::sort(snr.begin(), snr.end());
    double d = 0.0;
    const double n = static_cast<double>(snr.size());
    for (std::size_t i = 0; i < snr.size(); ++i) {
      const double cdf = (snr[i] - 5.0) / 15.0;
      d = std::max({d, std::abs(cdf - i / n), std::abs(cdf - (i + 1) / n)});
    }
    // Kolmogorov-Smirnov critical value at the 1% level.
    CHECK(d < 1.628 / std::sqrt(n));
    CHECK(snr.front() >= 5.0);
    CHECK(snr.back() <= 20.0);
  }

  TEST_CASE("seed derivation") {
    CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
    CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
  }

  TEST_CASE("sha256 of a known vector") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("checkpoint round trip is forward bit-exact") {
    ModelConfig cfg;
    cfg.embed_dim = 16;
    cfg.heads = 2;
    cfg.window_size = 4;
    cfg.blocks_per_module = 2;
    cfg.module_count = 1;
    cfg.in_channels = 8;
    cfg.n_t_max = 8;
    cfg.n_f_max = 8;
    Checkpoint ck;
    ck.model = cfg;
    ck.params = init_params(cfg, 31);
    for (auto& t : ck.params.tensors())
      for (double& v : t.data()) v += 1e-3 * std::sin(v * 1e4 + 0.1);
    ck.adam = make_adam_state(ck.params);
    ck.adam.t = 17;
    ck.adam.m[3].fill(0.25);
    ck.cursor = {1, 2, 3, 4, 55, false};
    ck.seed = 77;
    const fs::path path = temp_file("roundtrip.ckpt");
    save_checkpoint(ck, path);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.model == cfg);
    CHECK(back.params == ck.params);
    CHECK(back.adam == ck.adam);
    CHECK(back.cursor == ck.cursor);
    CHECK(back.seed == 77);

    const Backbone model(cfg);
    const Tensor in = random_tensor({8, 8, 8}, 32);
    const FrameStructure f = small_frame(8, 8);
    CHECK(model.infer(back.params, in, f) == model.infer(ck.params, in, f));

    std::string bytes = slurp(path);
    bytes[bytes.size() - 3] ^= 0x10;
    {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out << bytes;
    }
    CHECK_THROWS_AS(load_checkpoint(path), DataError);
    fs::remove(path);
  }
}

TEST_SUITE("config") {
  TEST_CASE("JSON round trip") {
    ModelConfig m = ModelConfig::base();
    ModelConfig m2;
    merge_json(m2, to_json(m));
    CHECK(m2 == m);

    Curriculum c = Curriculum::desk();
    c.seed = 12;
    Curriculum c2;
    merge_json(c2, to_json(c));
    CHECK(c2 == c);

    ScenarioConfig s;
    s.fixed_paths = PathSet{{Path{{0.5, -0.5}, 10.0, 1e-7, 0.2, 0.1}}};
    ScenarioConfig s2;
    merge_json(s2, to_json(s));
    CHECK(s2.fixed_paths == s.fixed_paths);
    CHECK(to_json(s2) == to_json(s));
  }

  TEST_CASE("partial merge keeps other fields") {
    ModelConfig m;
    merge_json(m, R"({"embed_dim": 32, "heads": 4})");
    CHECK(m.embed_dim == 32);
    CHECK(m.heads == 4);
    CHECK(m.window_size == ModelConfig{}.window_size);
  }

  TEST_CASE("errors name the field") {
    ModelConfig m;
    CHECK_THROWS_WITH_AS(merge_json(m, R"({"embed_dims": 32})"), doctest::Contains("embed_dims"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(merge_json(m, R"({"heads": "two"})"), doctest::Contains("heads"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(merge_json(m, R"({"heads": 3})"), doctest::Contains("heads"), std::invalid_argument);
    Curriculum c;
    CHECK_THROWS_WITH_AS(merge_json(c, R"({"stage2": {"batch_size": 0}})"), doctest::Contains("batch_size"),
                         std::invalid_argument);
    FrameStructure f;
    CHECK_THROWS_WITH_AS(merge_json(f, R"({"df": -1.0})"), doctest::Contains("df"), std::invalid_argument);
    CHECK_THROWS_AS(merge_json(f, "{not json"), std::invalid_argument);
  }
}

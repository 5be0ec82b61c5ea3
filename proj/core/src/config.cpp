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

#include "ddafm/config.hpp"

#include <functional>
#include <map>
#include <stdexcept>

#include "ddafm/train.hpp"
#include "json.hpp"

namespace ddafm {

namespace {

using json = nlohmann::json;

json parse_object(std::string_view text, const std::string& section) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(section + ": malformed JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw std::invalid_argument(section + ": expected a JSON object");
  return j;
}

[[noreturn]] void type_error(const std::string& key, const char* expected) {
  throw std::invalid_argument("field '" + key + "': expected " + expected);
}

double as_double(const json& v, const std::string& key) {
  if (!v.is_number()) type_error(key, "a number");
  return v.get<double>();
}

std::size_t as_size(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() < 0) type_error(key, "a non-negative integer");
  return v.get<std::size_t>();
}

std::uint64_t as_u64(const json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    type_error(key, "a non-negative integer");
  return v.get<std::uint64_t>();
}

using Setter = std::function<void(const json&, const std::string&)>;

void apply(const json& j, const std::string& section, const std::map<std::string, Setter>& setters) {
  for (const auto& [key, value] : j.items()) {
    const std::string full = section + "." + key;
    auto it = setters.find(key);
    if (it == setters.end()) throw std::invalid_argument("unknown field '" + full + "'");
    it->second(value, full);
  }
}

#define DDAFM_DOUBLE(obj, field) {#field, [&](const json& v, const std::string& k) { obj.field = as_double(v, k); }}
#define DDAFM_SIZE(obj, field) {#field, [&](const json& v, const std::string& k) { obj.field = as_size(v, k); }}

json path_to_json(const Path& p) {
  return {{"beta_re", p.beta.real()}, {"beta_im", p.beta.imag()}, {"nu", p.nu},
          {"tau", p.tau},             {"theta", p.theta},         {"phi", p.phi}};
}

Path path_from_json(const json& j, const std::string& key) {
  if (!j.is_object()) type_error(key, "a path object");
  Path p;
  double re = 1.0, im = 0.0;
  apply(j, key,
        {{"beta_re", [&](const json& v, const std::string& k) { re = as_double(v, k); }},
         {"beta_im", [&](const json& v, const std::string& k) { im = as_double(v, k); }},
         DDAFM_DOUBLE(p, nu), DDAFM_DOUBLE(p, tau), DDAFM_DOUBLE(p, theta), DDAFM_DOUBLE(p, phi)});
  p.beta = {re, im};
  return p;
}

json scenario_json(const ScenarioConfig& c) {
  json j = {{"carrier_hz", c.carrier_hz},           {"speed_min_mps", c.speed_min_mps},
            {"speed_max_mps", c.speed_max_mps},     {"path_count_min", c.path_count_min},
            {"path_count_max", c.path_count_max},   {"delay_scale_s", c.delay_scale_s},
            {"elevation_max_rad", c.elevation_max_rad}};
  if (c.fixed_paths) {
    json arr = json::array();
    for (const Path& p : c.fixed_paths->paths) arr.push_back(path_to_json(p));
    j["fixed_paths"] = arr;
  } else {
    j["fixed_paths"] = nullptr;
  }
  return j;
}

json model_json(const ModelConfig& c) {
  return {{"patch_size", c.patch_size},   {"window_size", c.window_size},
          {"embed_dim", c.embed_dim},     {"blocks_per_module", c.blocks_per_module},
          {"module_count", c.module_count}, {"heads", c.heads},
          {"mlp_ratio", c.mlp_ratio},     {"in_channels", c.in_channels},
          {"conv_kernel", c.conv_kernel}, {"n_t_max", c.n_t_max},
          {"n_f_max", c.n_f_max},         {"ref_res_tau", c.ref_res_tau},
          {"ref_res_nu", c.ref_res_nu},   {"pe_sigma", c.pe_sigma}};
}

json frame_json(const FrameStructure& f) {
  return {{"n_t", f.n_t}, {"dt", f.dt}, {"n_f", f.n_f}, {"df", f.df}, {"n_rx1", f.n_rx1}, {"n_rx2", f.n_rx2}};
}

json plan_json(const TrainPlan& p) {
  return {{"data_fraction", p.data_fraction},
          {"epochs", p.epochs},
          {"initial_lr", p.initial_lr},
          {"min_lr", p.min_lr},
          {"decay_factor", p.decay_factor},
          {"decay_interval_steps", p.decay_interval_steps},
          {"batch_size", p.batch_size},
          {"obs_ratio_min", p.obs_ratio_min},
          {"obs_ratio_max", p.obs_ratio_max},
          {"pilot_spacings", p.pilot_spacings}};
}

void merge_plan(TrainPlan& p, const json& j, const std::string& section) {
  apply(j, section,
        {DDAFM_DOUBLE(p, data_fraction), DDAFM_SIZE(p, epochs), DDAFM_DOUBLE(p, initial_lr), DDAFM_DOUBLE(p, min_lr),
         DDAFM_DOUBLE(p, decay_factor), DDAFM_SIZE(p, decay_interval_steps), DDAFM_SIZE(p, batch_size),
         DDAFM_DOUBLE(p, obs_ratio_min), DDAFM_DOUBLE(p, obs_ratio_max),
         {"pilot_spacings", [&](const json& v, const std::string& k) {
            if (!v.is_array()) type_error(k, "an array of integers");
            p.pilot_spacings.clear();
            for (const json& d : v) p.pilot_spacings.push_back(as_size(d, k));
          }}});
}

template <typename T>
void validate_named(const T& value, const std::string& section) {
  try {
    value.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(section + ": " + e.what());
  }
}

}  // namespace

std::string to_json(const ScenarioConfig& cfg) { return scenario_json(cfg).dump(); }
std::string to_json(const ModelConfig& cfg) { return model_json(cfg).dump(); }
std::string to_json(const FrameStructure& frame) { return frame_json(frame).dump(); }
std::string to_json(const TrainPlan& plan) { return plan_json(plan).dump(); }

std::string to_json(const Curriculum& plan) {
  json j = {{"stage1", plan_json(plan.stage1)},
            {"stage2", plan_json(plan.stage2)},
            {"clip_norm", plan.clip_norm},
            {"seed", plan.seed}};
  return j.dump();
}

void merge_json(ScenarioConfig& c, std::string_view text) {
  const json j = parse_object(text, "scenario");
  ScenarioConfig next = c;
  apply(j, "scenario",
        {DDAFM_DOUBLE(next, carrier_hz), DDAFM_DOUBLE(next, speed_min_mps), DDAFM_DOUBLE(next, speed_max_mps),
         DDAFM_SIZE(next, path_count_min), DDAFM_SIZE(next, path_count_max), DDAFM_DOUBLE(next, delay_scale_s),
         DDAFM_DOUBLE(next, elevation_max_rad),
         {"fixed_paths", [&](const json& v, const std::string& k) {
            if (v.is_null()) {
              next.fixed_paths.reset();
              return;
            }
            if (!v.is_array()) type_error(k, "an array of paths or null");
            PathSet ps;
            for (const json& p : v) ps.paths.push_back(path_from_json(p, k));
            next.fixed_paths = std::move(ps);
          }}});
  validate_named(next, "scenario");
  c = std::move(next);
}

void merge_json(ModelConfig& c, std::string_view text) {
  const json j = parse_object(text, "model");
  ModelConfig next = c;
  apply(j, "model",
        {DDAFM_SIZE(next, patch_size), DDAFM_SIZE(next, window_size), DDAFM_SIZE(next, embed_dim),
         DDAFM_SIZE(next, blocks_per_module), DDAFM_SIZE(next, module_count), DDAFM_SIZE(next, heads),
         DDAFM_DOUBLE(next, mlp_ratio), DDAFM_SIZE(next, in_channels), DDAFM_SIZE(next, conv_kernel),
         DDAFM_SIZE(next, n_t_max), DDAFM_SIZE(next, n_f_max), DDAFM_DOUBLE(next, ref_res_tau),
         DDAFM_DOUBLE(next, ref_res_nu), DDAFM_DOUBLE(next, pe_sigma)});
  validate_named(next, "model");
  c = next;
}

void merge_json(FrameStructure& f, std::string_view text) {
  const json j = parse_object(text, "frame");
  FrameStructure next = f;
  apply(j, "frame",
        {DDAFM_SIZE(next, n_t), DDAFM_DOUBLE(next, dt), DDAFM_SIZE(next, n_f), DDAFM_DOUBLE(next, df),
         DDAFM_SIZE(next, n_rx1), DDAFM_SIZE(next, n_rx2)});
  validate_named(next, "frame");
  f = next;
}

void merge_json(TrainPlan& plan, std::string_view text) {
  const json j = parse_object(text, "train");
  TrainPlan next = plan;
  merge_plan(next, j, "train");
  validate_named(next, "train");
  plan = std::move(next);
}

void merge_json(Curriculum& plan, std::string_view text) {
  const json j = parse_object(text, "train");
  Curriculum next = plan;
  apply(j, "train",
        {{"stage1", [&](const json& v, const std::string& k) {
            if (!v.is_object()) type_error(k, "an object");
            merge_plan(next.stage1, v, k);
          }},
         {"stage2", [&](const json& v, const std::string& k) {
            if (!v.is_object()) type_error(k, "an object");
            merge_plan(next.stage2, v, k);
          }},
         DDAFM_DOUBLE(next, clip_norm),
         {"seed", [&](const json& v, const std::string& k) { next.seed = as_u64(v, k); }}});
  validate_named(next, "train");
  plan = std::move(next);
}

}  // namespace ddafm

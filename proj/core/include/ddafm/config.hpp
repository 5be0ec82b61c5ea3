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

#include <string>
#include <string_view>

#include "ddafm/channel.hpp"
#include "ddafm/model.hpp"

namespace ddafm {

struct TrainPlan;
struct Curriculum;

// JSON views of the configuration structs, one key per field. The merge
// functions override only the keys present and throw std::invalid_argument
// naming the key on unknown fields or wrong types; the result is validated.

std::string to_json(const ScenarioConfig& cfg);
std::string to_json(const ModelConfig& cfg);
std::string to_json(const FrameStructure& frame);
std::string to_json(const TrainPlan& plan);
std::string to_json(const Curriculum& plan);

void merge_json(ScenarioConfig& cfg, std::string_view json);
void merge_json(ModelConfig& cfg, std::string_view json);
void merge_json(FrameStructure& frame, std::string_view json);
void merge_json(TrainPlan& plan, std::string_view json);
void merge_json(Curriculum& plan, std::string_view json);

}  // namespace ddafm

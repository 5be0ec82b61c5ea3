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

#include "manifest.hpp"

#include <ctime>
#include <fstream>

#include "ddafm/dataio.hpp"

namespace ddafm::cli {

Manifest::Manifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)),
      argv_(std::move(argv)),
      started_(std::chrono::system_clock::now()),
      t0_(std::chrono::steady_clock::now()) {}

void Manifest::add_input(const std::filesystem::path& path) { inputs_.push_back(path); }
void Manifest::add_output(const std::filesystem::path& path) { outputs_.push_back(path); }

std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
  return output.string() + ".manifest.json";
}

void Manifest::write(const std::filesystem::path& path) const {
  auto files = [](const std::vector<std::filesystem::path>& paths) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : paths) arr.push_back({{"path", p.string()}, {"sha256", file_sha256(p)}});
    return arr;
  };
  const std::time_t start = std::chrono::system_clock::to_time_t(started_);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&start));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();

  nlohmann::json j = {{"tool", "ddafm"},
                      {"command", command_},
                      {"argv", argv_},
                      {"config", config_},
                      {"seeds", seeds_},
                      {"inputs", files(inputs_)},
                      {"outputs", files(outputs_)},
                      {"timing", {{"started_utc", stamp}, {"seconds", seconds}}}};
  if (!notes_.empty()) j["notes"] = notes_;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace ddafm::cli

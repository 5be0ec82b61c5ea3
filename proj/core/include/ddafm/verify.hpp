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

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ddafm {

/// Outcome of one named identity check: `value` is the measured error (or
/// ratio deviation) and passes when value <= tolerance.
struct CheckResult {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  bool inject_fft_sign_fault = false;
};

/// Runs the transform, duality, aliasing, gradient, parameter-count, encoding
/// and attention-cost checks.
std::vector<CheckResult> run_verify_suite(const VerifyOptions& opt);

/// One line per check plus a summary; returns true when all passed.
bool write_verify_report(const std::vector<CheckResult>& results, std::ostream& out);

}  // namespace ddafm

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

#include <cstddef>
#include <span>

#include "ddafm/tensor.hpp"

namespace ddafm {

enum class FftDirection { Forward, Inverse };

/// In-place unitary DFT of arbitrary length.
///
/// Forward uses exp(-j2*pi*nk/N), inverse exp(+j2*pi*nk/N); both carry 1/sqrt(N)
/// so that inverse(forward(x)) == x. Lengths are factored into primes and
/// evaluated by a recursive mixed-radix decimation in time; a prime factor p
/// costs O(p) per output (a direct DFT over that factor).
void fft_inplace(std::span<cdouble> x, FftDirection direction);

/// Unitary DFT along one axis of a complex tensor.
/// Throws std::out_of_range if `axis` >= rank.
CTensor fft_axis(const CTensor& t, std::size_t axis, FftDirection direction);

/// In-place variant of fft_axis.
void fft_axis_inplace(CTensor& t, std::size_t axis, FftDirection direction);

namespace fault {
/// Diagnostic fault injection: when set, every transform uses the opposite
/// exponent sign. Process-wide; used to show that the identity checks catch
/// a convention error.
void set_fft_sign_flip(bool on) noexcept;
bool fft_sign_flip() noexcept;
}  // namespace fault

}  // namespace ddafm

// Copyright © 2025
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

#pragma once

// Exact reference for the dot product. Everything here works on raw lane
// bits with arbitrary-precision integers and never calls into bitmath or the
// pipeline, so agreement between the two is meaningful.

#include "fedp/formats.h"

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <span>

namespace fedp::oracle {

using BigInt = boost::multiprecision::cpp_int;

// mantissa * 2^exponent, no rounding anywhere.
struct ExactFixedPoint {
  BigInt mantissa = 0;
  int32_t exponent = 0;

  bool is_zero() const { return mantissa == 0; }
  int sign() const { return mantissa < 0 ? -1 : (mantissa > 0 ? 1 : 0); }
  friend bool operator==(const ExactFixedPoint& a, const ExactFixedPoint& b);
};

ExactFixedPoint add(const ExactFixedPoint& a, const ExactFixedPoint& b);

// Round-to-nearest-even into FP32 with the datapath's output conventions:
// overflow -> ±Inf, results below 2^-126 after rounding -> ±0 (sign kept).
// Zero maps to +0 unless `negative_zero` is set.
uint32_t round_to_fp32(const ExactFixedPoint& value, bool negative_zero = false);

// Exact value of an FP lane; subnormals are zero when `flush` is set.
// Must not be called on Inf/NaN patterns.
ExactFixedPoint exact_value(uint32_t bits, const ScalarFormat& fmt, bool flush);

struct FpOracleResult {
  ExactFixedPoint exact;
  uint32_t rne_fp32 = 0;
  bool special = false;  // NaN/Inf rule table decided the result
};

// sum(a[i] * b[i]) + c over every lane given. `mul` must be an FP kind; c is
// an FP32 pattern. Special values: any NaN, Inf * 0, or +Inf meeting -Inf
// yields the canonical NaN; otherwise any Inf wins with its sign.
FpOracleResult exact_dot_fp(std::span<const uint32_t> a_lanes, std::span<const uint32_t> b_lanes,
                            uint32_t c_bits, const ScalarFormat& mul, bool flush);

// (sum(a[i] * b[i]) + c) mod 2^32, computed in 64-bit arithmetic.
uint32_t exact_dot_int(std::span<const uint32_t> a_lanes, std::span<const uint32_t> b_lanes,
                       uint32_t c_bits, const ScalarFormat& mul);

} // namespace fedp::oracle

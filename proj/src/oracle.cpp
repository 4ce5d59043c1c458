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

#include "fedp/oracle.h"

#include <boost/multiprecision/integer.hpp>

#include <algorithm>
#include <stdexcept>

namespace fedp::oracle {

namespace {

struct Fields {
  bool negative;
  uint32_t exp;
  uint32_t man;
};

Fields fields_of(uint32_t bits, const ScalarFormat& fmt) {
  return {((bits >> (fmt.total_bits - 1)) & 1) != 0, (bits >> fmt.man_bits) & ((1u << fmt.exp_bits) - 1),
          bits & ((1u << fmt.man_bits) - 1)};
}

bool is_nan(uint32_t bits, const ScalarFormat& fmt) {
  Fields f = fields_of(bits, fmt);
  uint32_t exp_ones = (1u << fmt.exp_bits) - 1;
  uint32_t man_ones = (1u << fmt.man_bits) - 1;
  if (fmt.kind == FormatKind::FP8)
    return f.exp == exp_ones && f.man == man_ones;
  return f.exp == exp_ones && f.man != 0;
}

bool is_inf(uint32_t bits, const ScalarFormat& fmt) {
  if (fmt.kind == FormatKind::FP8)
    return false;
  Fields f = fields_of(bits, fmt);
  return f.exp == (1u << fmt.exp_bits) - 1 && f.man == 0;
}

bool is_negative(uint32_t bits, const ScalarFormat& fmt) {
  return fields_of(bits, fmt).negative;
}

ExactFixedPoint mul(const ExactFixedPoint& a, const ExactFixedPoint& b) {
  return {a.mantissa * b.mantissa, a.exponent + b.exponent};
}

} // namespace

bool operator==(const ExactFixedPoint& a, const ExactFixedPoint& b) {
  ExactFixedPoint diff = add(a, {-b.mantissa, b.exponent});
  return diff.mantissa == 0;
}

ExactFixedPoint add(const ExactFixedPoint& a, const ExactFixedPoint& b) {
  if (a.mantissa == 0)
    return b;
  if (b.mantissa == 0)
    return a;
  int32_t e = std::min(a.exponent, b.exponent);
  BigInt sum = (a.mantissa << (a.exponent - e)) + (b.mantissa << (b.exponent - e));
  return {sum, e};
}

ExactFixedPoint exact_value(uint32_t bits, const ScalarFormat& fmt, bool flush) {
  if (!fmt.is_float())
    throw std::invalid_argument("exact_value: not a floating-point format");
  Fields f = fields_of(bits, fmt);
  BigInt m;
  int32_t e;
  if (f.exp == 0) {
    if (flush || f.man == 0)
      return {0, 0};
    m = f.man;
    e = 1 - fmt.bias - int32_t(fmt.man_bits);
  } else {
    m = f.man | (1u << fmt.man_bits);
    e = int32_t(f.exp) - fmt.bias - int32_t(fmt.man_bits);
  }
  if (f.negative)
    m = -m;
  return {m, e};
}

uint32_t round_to_fp32(const ExactFixedPoint& value, bool negative_zero) {
  if (value.mantissa == 0)
    return negative_zero ? 0x80000000u : 0;

  const bool negative = value.mantissa < 0;
  const uint32_t sign = negative ? 0x80000000u : 0;
  BigInt m = negative ? BigInt(-value.mantissa) : value.mantissa;
  int64_t msb = int64_t(boost::multiprecision::msb(m));

  BigInt kept;
  if (msb > 23) {
    unsigned drop = unsigned(msb - 23);
    kept = m >> drop;
    BigInt rem = m - (kept << drop);
    BigInt half = BigInt(1) << (drop - 1);
    if (rem > half || (rem == half && (kept & 1) != 0))
      kept += 1;
    if (kept == (BigInt(1) << 24)) {
      kept >>= 1;
      ++msb;
    }
  } else {
    kept = m << unsigned(23 - msb);
  }

  int64_t biased = msb + value.exponent + 127;
  if (biased >= 255)
    return sign | 0x7f800000u;
  if (biased <= 0)
    return sign;
  uint32_t frac = kept.convert_to<uint32_t>() & 0x7fffffu;
  return sign | (uint32_t(biased) << 23) | frac;
}

FpOracleResult exact_dot_fp(std::span<const uint32_t> a_lanes, std::span<const uint32_t> b_lanes,
                            uint32_t c_bits, const ScalarFormat& mul_fmt, bool flush) {
  if (a_lanes.size() != b_lanes.size())
    throw std::invalid_argument("exact_dot_fp: operand lane counts differ");
  if (!mul_fmt.is_float())
    throw std::invalid_argument("exact_dot_fp: not a floating-point format");

  FpOracleResult res;
  auto zero_after_flush = [&](uint32_t bits, const ScalarFormat& fmt) {
    return exact_value(bits, fmt, flush).mantissa == 0;
  };

  // rule table for NaN/Inf
  bool nan = is_nan(c_bits, kFP32);
  bool pos_inf = is_inf(c_bits, kFP32) && !is_negative(c_bits, kFP32);
  bool neg_inf = is_inf(c_bits, kFP32) && is_negative(c_bits, kFP32);
  for (size_t i = 0; i < a_lanes.size(); ++i) {
    uint32_t a = a_lanes[i], b = b_lanes[i];
    if (is_nan(a, mul_fmt) || is_nan(b, mul_fmt)) {
      nan = true;
      continue;
    }
    bool a_inf = is_inf(a, mul_fmt), b_inf = is_inf(b, mul_fmt);
    if (!a_inf && !b_inf)
      continue;
    if ((!a_inf && zero_after_flush(a, mul_fmt)) || (!b_inf && zero_after_flush(b, mul_fmt)))
      nan = true;
    else if (is_negative(a, mul_fmt) != is_negative(b, mul_fmt))
      neg_inf = true;
    else
      pos_inf = true;
  }
  if (nan || (pos_inf && neg_inf)) {
    res.special = true;
    res.rne_fp32 = kCanonicalNaN32;
    return res;
  }
  if (pos_inf || neg_inf) {
    res.special = true;
    res.rne_fp32 = pos_inf ? kPosInf32 : kNegInf32;
    return res;
  }

  bool all_negative_zero = true;
  for (size_t i = 0; i < a_lanes.size(); ++i) {
    ExactFixedPoint p = mul(exact_value(a_lanes[i], mul_fmt, flush),
                            exact_value(b_lanes[i], mul_fmt, flush));
    bool neg = is_negative(a_lanes[i], mul_fmt) != is_negative(b_lanes[i], mul_fmt);
    all_negative_zero = all_negative_zero && p.mantissa == 0 && neg;
    res.exact = add(res.exact, p);
  }
  ExactFixedPoint c = exact_value(c_bits, kFP32, flush);
  all_negative_zero = all_negative_zero && c.mantissa == 0 && is_negative(c_bits, kFP32);
  res.exact = add(res.exact, c);

  res.rne_fp32 = round_to_fp32(res.exact, all_negative_zero);
  return res;
}

uint32_t exact_dot_int(std::span<const uint32_t> a_lanes, std::span<const uint32_t> b_lanes,
                       uint32_t c_bits, const ScalarFormat& mul_fmt) {
  if (a_lanes.size() != b_lanes.size())
    throw std::invalid_argument("exact_dot_int: operand lane counts differ");
  if (!mul_fmt.is_integer())
    throw std::invalid_argument("exact_dot_int: not an integer format");

  auto value = [&](uint32_t bits) -> int64_t {
    bits &= (1u << mul_fmt.total_bits) - 1;
    if (mul_fmt.is_signed && (bits >> (mul_fmt.total_bits - 1)))
      return int64_t(bits) - (int64_t(1) << mul_fmt.total_bits);
    return int64_t(bits);
  };

  int64_t acc = int64_t(int32_t(c_bits));
  for (size_t i = 0; i < a_lanes.size(); ++i)
    acc += value(a_lanes[i]) * value(b_lanes[i]);
  return uint32_t(uint64_t(acc));
}

} // namespace fedp::oracle

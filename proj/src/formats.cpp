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

#include "fedp/formats.h"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace fedp {

std::string_view format_name(FormatKind kind) {
  switch (kind) {
  case FormatKind::FP16:  return "fp16";
  case FormatKind::BF16:  return "bf16";
  case FormatKind::FP8:   return "fp8";
  case FormatKind::BF8:   return "bf8";
  case FormatKind::INT8:  return "int8";
  case FormatKind::UINT4: return "uint4";
  case FormatKind::FP32:  return "fp32";
  case FormatKind::INT32: return "int32";
  }
  return "?";
}

std::optional<ScalarFormat> parse_format(std::string_view name) {
  for (auto kind : {FormatKind::FP16, FormatKind::BF16, FormatKind::FP8, FormatKind::BF8,
                    FormatKind::INT8, FormatKind::UINT4, FormatKind::FP32, FormatKind::INT32}) {
    if (format_name(kind) == name)
      return ScalarFormat::of(kind);
  }
  return std::nullopt;
}

std::string_view class_name(FpClass cls) {
  switch (cls) {
  case FpClass::Zero:      return "zero";
  case FpClass::Subnormal: return "subnormal";
  case FpClass::Normal:    return "normal";
  case FpClass::Inf:       return "inf";
  case FpClass::NaN:       return "nan";
  }
  return "?";
}

static bool is_e4m3(const ScalarFormat& fmt) {
  return fmt.kind == FormatKind::FP8;
}

DecodedScalar decode(uint32_t bits, const ScalarFormat& fmt) {
  DecodedScalar out;
  bits &= fmt.lane_mask();

  if (fmt.is_integer()) {
    if (fmt.is_signed) {
      uint32_t sign_bit = 1u << (fmt.total_bits - 1);
      out.int_value = static_cast<int64_t>(bits) - ((bits & sign_bit) ? (int64_t(1) << fmt.total_bits) : 0);
    } else {
      out.int_value = bits;
    }
    out.negative = out.int_value < 0;
    out.cls = out.int_value == 0 ? FpClass::Zero : FpClass::Normal;
    return out;
  }

  uint32_t man_mask = (1u << fmt.man_bits) - 1;
  uint32_t exp = (bits >> fmt.man_bits) & fmt.exp_max();
  uint32_t man = bits & man_mask;
  out.negative = (bits >> (fmt.total_bits - 1)) & 1;
  out.biased_exp = exp;

  if (exp == 0) {
    out.significand = man;
    out.cls = man == 0 ? FpClass::Zero : FpClass::Subnormal;
  } else if (exp == fmt.exp_max() && !is_e4m3(fmt)) {
    out.significand = man;
    out.cls = man == 0 ? FpClass::Inf : FpClass::NaN;
  } else if (exp == fmt.exp_max() && man == man_mask) {
    // E4M3: the all-ones pattern is the only NaN, the rest of the top binade is finite
    out.significand = man;
    out.cls = FpClass::NaN;
  } else {
    out.significand = man | (1u << fmt.man_bits);
    out.cls = FpClass::Normal;
  }
  return out;
}

uint32_t encode(const DecodedScalar& value, const ScalarFormat& fmt) {
  if (fmt.is_integer())
    return static_cast<uint32_t>(value.int_value) & fmt.lane_mask();

  uint32_t man_mask = (1u << fmt.man_bits) - 1;
  uint32_t sign = value.negative ? (1u << (fmt.total_bits - 1)) : 0;
  uint32_t exp = 0;
  uint32_t man = 0;
  switch (value.cls) {
  case FpClass::Zero:
    break;
  case FpClass::Subnormal:
    man = value.significand & man_mask;
    break;
  case FpClass::Normal:
    exp = value.biased_exp;
    man = value.significand & man_mask;
    break;
  case FpClass::Inf:
    exp = fmt.exp_max();
    man = is_e4m3(fmt) ? man_mask : 0; // E4M3 saturates Inf into its NaN slot
    break;
  case FpClass::NaN:
    exp = fmt.exp_max();
    man = is_e4m3(fmt) ? man_mask : (value.significand & man_mask);
    if (man == 0)
      man = 1u << (fmt.man_bits - 1);
    break;
  }
  return sign | (exp << fmt.man_bits) | man;
}

double to_double(const DecodedScalar& value, const ScalarFormat& fmt) {
  if (fmt.is_integer())
    return static_cast<double>(value.int_value);
  double mag = 0.0;
  switch (value.cls) {
  case FpClass::Zero:
    break;
  case FpClass::Subnormal:
    mag = std::ldexp(double(value.significand), 1 - fmt.bias - int(fmt.man_bits));
    break;
  case FpClass::Normal:
    mag = std::ldexp(double(value.significand), int(value.biased_exp) - fmt.bias - int(fmt.man_bits));
    break;
  case FpClass::Inf:
    mag = std::numeric_limits<double>::infinity();
    break;
  case FpClass::NaN:
    return std::numeric_limits<double>::quiet_NaN();
  }
  return value.negative ? -mag : mag;
}

uint32_t encode_fp32(bool negative, int32_t unbiased_exp, uint32_t sig27) {
  uint32_t sign = negative ? 0x80000000u : 0;
  if (sig27 == 0)
    return sign;

  uint32_t kept = sig27 >> 3;           // 24 bits including the leading one
  bool guard = (sig27 >> 2) & 1;
  bool rest = (sig27 & 3) != 0;
  if (guard && (rest || (kept & 1)))
    ++kept;
  int32_t exp = unbiased_exp;
  if (kept >> 24) {
    kept >>= 1;
    ++exp;
  }

  int32_t biased = exp + 127;
  if (biased >= 255)
    return sign | kPosInf32;
  if (biased <= 0)
    return sign;
  return sign | (uint32_t(biased) << 23) | (kept & 0x7fffffu);
}

std::vector<DecodedScalar> unpack(const PackedWord& word) {
  if (!word.format.is_packed())
    throw std::invalid_argument("unpack: 32-bit formats are not packed");
  std::vector<DecodedScalar> lanes;
  lanes.reserve(word.lane_count());
  for (unsigned i = 0; i < word.lane_count(); ++i)
    lanes.push_back(decode(word.lane(i), word.format));
  return lanes;
}

PackedWord pack_bits(std::span<const uint32_t> lane_bits, const ScalarFormat& fmt) {
  if (!fmt.is_packed())
    throw std::invalid_argument("pack: 32-bit formats are not packed");
  if (lane_bits.size() != fmt.lanes_per_word())
    throw std::invalid_argument("pack: lane count does not match format");
  PackedWord word{0, fmt};
  for (unsigned i = 0; i < lane_bits.size(); ++i)
    word.bits |= (lane_bits[i] & fmt.lane_mask()) << (i * fmt.total_bits);
  return word;
}

PackedWord pack(std::span<const DecodedScalar> lanes, const ScalarFormat& fmt) {
  std::vector<uint32_t> bits;
  bits.reserve(lanes.size());
  for (const auto& lane : lanes)
    bits.push_back(encode(lane, fmt));
  return pack_bits(bits, fmt);
}

std::vector<uint32_t> lane_bits(std::span<const uint32_t> words, const ScalarFormat& fmt) {
  std::vector<uint32_t> out;
  unsigned per_word = fmt.lanes_per_word();
  out.reserve(words.size() * per_word);
  for (uint32_t w : words) {
    PackedWord word{w, fmt};
    for (unsigned i = 0; i < per_word; ++i)
      out.push_back(fmt.is_packed() ? word.lane(i) : w);
  }
  return out;
}

} // namespace fedp

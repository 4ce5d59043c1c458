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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fedp {

enum class FormatKind { FP16, BF16, FP8, BF8, INT8, UINT4, FP32, INT32 };

// Bit layout of one scalar encoding. Integer kinds carry exp_bits = man_bits = 0.
struct ScalarFormat {
  FormatKind kind;
  unsigned total_bits;
  unsigned exp_bits;
  unsigned man_bits;
  int bias;
  bool is_signed;

  static constexpr ScalarFormat of(FormatKind kind);

  constexpr bool is_float() const { return exp_bits != 0; }
  constexpr bool is_integer() const { return exp_bits == 0; }
  // FP32 and INT32 travel as whole registers, everything else is packed.
  constexpr bool is_packed() const { return total_bits < 32; }
  constexpr unsigned lanes_per_word() const { return 32 / total_bits; }
  constexpr uint32_t lane_mask() const {
    return total_bits >= 32 ? 0xffffffffu : ((1u << total_bits) - 1);
  }
  constexpr uint32_t exp_max() const { return (1u << exp_bits) - 1; }

  friend constexpr bool operator==(const ScalarFormat&, const ScalarFormat&) = default;
};

constexpr ScalarFormat ScalarFormat::of(FormatKind kind) {
  switch (kind) {
  case FormatKind::FP16:  return {kind, 16, 5, 10, 15, true};
  case FormatKind::BF16:  return {kind, 16, 8, 7, 127, true};
  case FormatKind::FP8:   return {kind, 8, 4, 3, 7, true};   // OCP E4M3
  case FormatKind::BF8:   return {kind, 8, 5, 2, 15, true};  // OCP E5M2
  case FormatKind::INT8:  return {kind, 8, 0, 0, 0, true};
  case FormatKind::UINT4: return {kind, 4, 0, 0, 0, false};
  case FormatKind::FP32:  return {kind, 32, 8, 23, 127, true};
  case FormatKind::INT32: return {kind, 32, 0, 0, 0, true};
  }
  return {kind, 0, 0, 0, 0, false};
}

inline constexpr ScalarFormat kFP16  = ScalarFormat::of(FormatKind::FP16);
inline constexpr ScalarFormat kBF16  = ScalarFormat::of(FormatKind::BF16);
inline constexpr ScalarFormat kFP8   = ScalarFormat::of(FormatKind::FP8);
inline constexpr ScalarFormat kBF8   = ScalarFormat::of(FormatKind::BF8);
inline constexpr ScalarFormat kINT8  = ScalarFormat::of(FormatKind::INT8);
inline constexpr ScalarFormat kUINT4 = ScalarFormat::of(FormatKind::UINT4);
inline constexpr ScalarFormat kFP32  = ScalarFormat::of(FormatKind::FP32);
inline constexpr ScalarFormat kINT32 = ScalarFormat::of(FormatKind::INT32);

std::string_view format_name(FormatKind kind);
// Accepts the lower-case names used on the command line ("fp16", "uint4", ...).
std::optional<ScalarFormat> parse_format(std::string_view name);

enum class FpClass { Zero, Subnormal, Normal, Inf, NaN };

std::string_view class_name(FpClass cls);

// A scalar split into its fields.
//
// For FP kinds `significand` carries the implicit leading bit when the value
// is Normal (width man_bits+1). Subnormals keep biased_exp = 0 and their raw
// mantissa. Inf/NaN keep the all-ones exponent and the raw mantissa so that
// NaN payloads survive a decode/encode round trip.
// For integer kinds only `int_value` (and `negative`) are meaningful.
struct DecodedScalar {
  bool negative = false;
  uint32_t biased_exp = 0;
  uint32_t significand = 0;
  FpClass cls = FpClass::Zero;
  int64_t int_value = 0;

  int sign() const { return negative ? -1 : 1; }
  bool is_special() const { return cls == FpClass::Inf || cls == FpClass::NaN; }

  friend bool operator==(const DecodedScalar&, const DecodedScalar&) = default;
};

// E4M3 has no infinities and a single NaN encoding per sign (S.1111.111).
DecodedScalar decode(uint32_t bits, const ScalarFormat& fmt);

// Inverse of decode().
uint32_t encode(const DecodedScalar& value, const ScalarFormat& fmt);

// Exact value of a decoded FP scalar as a double; Inf/NaN map to the
// matching double.
double to_double(const DecodedScalar& value, const ScalarFormat& fmt);

inline constexpr uint32_t kCanonicalNaN32 = 0x7fc00000u;
inline constexpr uint32_t kPosInf32 = 0x7f800000u;
inline constexpr uint32_t kNegInf32 = 0xff800000u;

// Significand layout accepted by encode_fp32: bit 26 holds the leading one,
// bits [25:3] the 23 fraction bits, bit 2 guard, bit 1 round, bit 0 sticky.
inline constexpr unsigned kGrsSignificandBits = 27;

// Packs a normalized significand into an FP32 word with round-to-nearest-even.
// The encoded value is sig27 / 2^26 * 2^unbiased_exp. A zero significand
// encodes a signed zero; exponent overflow yields ±Inf and results below the
// normal range flush to ±0 (tininess is detected after rounding).
uint32_t encode_fp32(bool negative, int32_t unbiased_exp, uint32_t sig27);

// One 32-bit operand register holding lanes_per_word() scalars.
// Lane 0 sits in the least-significant field.
struct PackedWord {
  uint32_t bits = 0;
  ScalarFormat format = kFP16;

  unsigned lane_count() const { return format.lanes_per_word(); }
  uint32_t lane(unsigned index) const {
    return (bits >> (index * format.total_bits)) & format.lane_mask();
  }
};

// Throws std::invalid_argument for FP32/INT32.
std::vector<DecodedScalar> unpack(const PackedWord& word);
// Throws std::invalid_argument for FP32/INT32 or a wrong lane count.
PackedWord pack(std::span<const DecodedScalar> lanes, const ScalarFormat& fmt);
PackedWord pack_bits(std::span<const uint32_t> lane_bits, const ScalarFormat& fmt);

// Raw lane fields of consecutive words, lane 0 of word 0 first.
std::vector<uint32_t> lane_bits(std::span<const uint32_t> words, const ScalarFormat& fmt);

} // namespace fedp

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

// Four-stage fused dot product datapath: result = sum(a[i] * b[i]) + c.
//
//   stage 1  lane multiplies (Wallace), product exponents, addend unpacking,
//            special-value detection
//   stage 2  max-exponent selection over products and addend, alignment
//   stage 3  fused carry-save accumulation + Kogge-Stone resolve
//   stage 4  LZC normalization and RNE rounding (FP), or the split-addend
//            high-bit fixup (INT)
//
// Intermediate terms use the E8M25 convention: a 25-bit magnitude M and a
// biased exponent E with value M * 2^(E - 127 - 24). A product of two
// normalized significands lies in [1, 4); the "+1" in the product exponent
// moves the binal point up one place so the product occupies M in [2^23, 2^25).
//
// Stage 2/3 accumulator layout (acc_width() bits, two's complement):
//
//   [sign][carry headroom][25-bit magnitude of the max term][guard fraction]
//
// Negative terms are negated with carry-in !sticky, which makes every
// alignment truncate toward -inf. The bits lost by all terms therefore sum to
// a non-negative residual, and the single OR-ed sticky bit always means
// "the true sum is slightly above the accumulated one".

#include "fedp/bitmath.h"
#include "fedp/formats.h"

#include <cstdint>
#include <span>
#include <vector>

namespace fedp {

inline constexpr unsigned kMagnitudeBits = 25;
inline constexpr unsigned kIntLowBits = 25;
inline constexpr unsigned kIntHighBits = 7;
// Fraction bits kept below the max term's magnitude LSB. 31 is the widest
// setting that keeps every configuration (FP8/BF8 at N=32) within 64 bits.
inline constexpr unsigned kDefaultGuardBits = 31;
// Exponent stand-in for zero terms so they never win max selection.
inline constexpr int32_t kZeroTermExponent = -4096;

struct FedpConfig {
  unsigned n_elements = 4;
  ScalarFormat mul_format = kFP16;
  ScalarFormat acc_format = kFP32;
  bool subnormal_flush = true;
  unsigned guard_bits = kDefaultGuardBits;
  // FP8/BF8 only: sum each lane pair into one E8M25 term in stage 1 instead
  // of accumulating both lane products in stage 3. The 25-bit pair sum
  // truncates when the two product exponents are far apart.
  bool presum_lane_pairs = false;

  // Picks FP32 or INT32 accumulation to match the multiplier format.
  static FedpConfig make(const ScalarFormat& mul, unsigned n, bool subnormal_flush = true);

  // Throws std::invalid_argument if the combination is unsupported.
  void validate() const;

  unsigned log2_n() const;
  bool is_integer() const { return mul_format.is_integer(); }
  // FP8/BF8 feed two lanes into each dot-product element.
  bool pairs_lanes() const { return mul_format.is_float() && mul_format.total_bits == 8; }
  unsigned lanes_per_operand() const { return pairs_lanes() ? 2 * n_elements : n_elements; }
  unsigned words_per_operand() const;
  // Operands of the stage-3 reduction: products plus the addend.
  unsigned term_count() const;

  // 25 + log2(N): magnitude growth only, no sign or rounding bits.
  unsigned nominal_acc_width() const { return kMagnitudeBits + log2_n(); }
  // Carry headroom for term_count() terms; log2(N)+1 for N products and the addend.
  unsigned headroom_bits() const;
  unsigned acc_width() const { return 1 + headroom_bits() + kMagnitudeBits + guard_bits; }
};

// E8M25 intermediate. `biased_exp` uses the FP32 bias; it exceeds 8 bits only
// for BF16 operands, whose product exponents span [-124, 382].
// `sticky` marks a magnitude that was truncated: the true magnitude is then
// strictly between magnitude and magnitude + 1.
struct RawProduct {
  bool negative = false;
  int32_t biased_exp = 0;
  uint32_t magnitude = 0;
  bool sticky = false;

  bool is_zero() const { return magnitude == 0 && !sticky; }
  friend bool operator==(const RawProduct&, const RawProduct&) = default;
};

enum class SpecialResult { None, NaN, PosInf, NegInf };

struct IntAddendSplit {
  uint32_t low25 = 0;
  uint32_t high7 = 0;
  friend bool operator==(const IntAddendSplit&, const IntAddendSplit&) = default;
};

struct Stage1Result {
  // FP path
  std::vector<RawProduct> products;          // one per lane, or per lane pair when presummed
  RawProduct addend;
  std::vector<uint32_t> significand_products; // Wallace outputs, one per lane
  std::vector<int32_t> lane_exponents;        // FP32-biased exponent of each lane product
  SpecialResult special = SpecialResult::None;
  bool all_negative_zero = false;              // every term is -0 (IEEE sign of an all-zero sum)

  // INT path
  std::vector<int32_t> int_products;
  std::vector<uint32_t> int_terms;             // products as 25-bit two's complement patterns
  std::vector<uint8_t> product_signs;
  IntAddendSplit addend_split;
};

Stage1Result stage1_multiply(std::span<const DecodedScalar> a_lanes,
                             std::span<const DecodedScalar> b_lanes,
                             const DecodedScalar& addend, const FedpConfig& cfg);

// Pairwise exponent differences. Entry (r, c) holds exp[c] - exp[r]; a column
// whose sign bits are all zero belongs to a maximum.
struct SignMatrix {
  unsigned size = 0;
  std::vector<int32_t> diffs;
  std::vector<uint8_t> signs;
  // signs with ties broken toward the lower index: entry (r, c) with r < c is
  // also set when exp[r] == exp[c].
  std::vector<uint8_t> adjusted;

  int32_t diff(unsigned row, unsigned col) const { return diffs[row * size + col]; }
  bool sign(unsigned row, unsigned col) const { return signs[row * size + col]; }
  bool adjusted_sign(unsigned row, unsigned col) const { return adjusted[row * size + col]; }
};

struct MaxExponentSelection {
  int32_t max_exp = 0;
  unsigned index = 0;
  std::vector<uint8_t> one_hot;
  std::vector<uint32_t> shift_amounts;
  SignMatrix matrix;
};

// Throws std::invalid_argument on an empty list.
MaxExponentSelection max_exponent_select(std::span<const int32_t> exps);

struct AlignedTerms {
  std::vector<uint64_t> terms;   // acc_width()-bit two's complement
  std::vector<uint8_t> sticky;   // per term, includes the stage-1 sticky
  bool any_sticky = false;
};

// Places each magnitude at the top of the guard fraction, shifts it right by
// its shift amount and applies the sign.
AlignedTerms stage2_align(std::span<const RawProduct> terms,
                          std::span<const uint32_t> shift_amounts, const FedpConfig& cfg);

struct Stage3Result {
  bitmath::CarrySavePair csa;
  uint64_t raw_sum = 0;
  unsigned csa_levels = 0;
};

Stage3Result stage3_accumulate(std::span<const uint64_t> terms, const FedpConfig& cfg);

struct Stage4Result {
  bool negative = false;
  unsigned lzc = 0;
  uint64_t magnitude = 0;
  int32_t unbiased_exp = 0;
  uint32_t pre_round = 0;   // 27-bit significand with guard/round/sticky
  bool round_up = false;
  uint32_t word = 0;
};

// `all_negative_zero` selects -0 when the sum is exactly zero and every
// term was a negative zero.
Stage4Result stage4_normalize_round(uint64_t raw_sum, int32_t max_exp, bool sticky,
                                    const FedpConfig& cfg, bool all_negative_zero = false);

IntAddendSplit int_addend_split(uint32_t c);

// Reassembles the INT32 result from the stage-3 sum of the 25-bit product
// patterns and addend low bits. Bits [acc_width-1:25] of low_sum count the
// carries out of the low field; each negative product subtracts one from the
// high part to restore the sign extension dropped above bit 24.
uint32_t int_high_fixup(uint64_t low_sum, uint32_t high7, std::span<const uint8_t> product_signs,
                        const FedpConfig& cfg);

struct PipelineTrace {
  FedpConfig cfg;
  std::vector<DecodedScalar> a_lanes;
  std::vector<DecodedScalar> b_lanes;
  DecodedScalar addend;
  Stage1Result stage1;
  MaxExponentSelection selection;
  AlignedTerms stage2;
  Stage3Result stage3;
  Stage4Result stage4;
  uint32_t result = 0;
};

struct FedpRequest {
  FedpConfig cfg;
  std::vector<uint32_t> a_words;
  std::vector<uint32_t> b_words;
  uint32_t c_word = 0;
};

struct FedpResult {
  uint32_t result = 0;
  PipelineTrace trace;
};

// Throws std::invalid_argument if the word counts do not match cfg.
// Unused upper lanes of the last word are ignored.
FedpResult fedp_execute(const FedpRequest& req);

} // namespace fedp

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

// Word-level models of the datapath's arithmetic blocks. Every W-bit vector
// is held in a uint64_t, so W ranges over [1, 64]; all results are reduced
// mod 2^W. Bit i of a vector is column i of the hardware structure, so the
// bitwise expressions below are the gate equations applied to all columns.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace fedp::bitmath {

inline constexpr unsigned kMaxWidth = 64;

constexpr uint64_t width_mask(unsigned width) {
  return width >= 64 ? ~uint64_t(0) : ((uint64_t(1) << width) - 1);
}

// Redundant (sum, carry) form; the represented value is
// (sum_vec + carry_vec) mod 2^width.
struct CarrySavePair {
  uint64_t sum_vec = 0;
  uint64_t carry_vec = 0;
  unsigned width = 0;

  uint64_t total() const { return (sum_vec + carry_vec) & width_mask(width); }
};

CarrySavePair compress_3_2(uint64_t a, uint64_t b, uint64_t c, unsigned width);

struct Compress42Result {
  CarrySavePair pair;
  // Unshifted intermediate carries of the first 3:2 stage; column i feeds cin of column i+1.
  uint64_t cout_vec = 0;
};

// Two cascaded 3:2 stages. a+b+c+d+cin_vec == sum+carry+(cout_vec<<1) mod 2^width.
Compress42Result compress_4_2(uint64_t a, uint64_t b, uint64_t c, uint64_t d, uint64_t cin_vec,
                              unsigned width);

// 4:2 compressor with its lateral carries wired column to column
// (cin_vec = cout_vec << 1), so four operands reduce to exactly two.
CarrySavePair compress_4_2_chained(uint64_t a, uint64_t b, uint64_t c, uint64_t d, unsigned width);

enum class CompressorKind { Pass, Full32, Comp42 };

std::string_view compressor_name(CompressorKind kind);

// Operand vectors before each reduction level, plus what each MOD-4 group of
// that level was reduced with. levels.front() is the input and levels.back()
// the final two (or one) vectors; group_kinds[k] describes levels[k] -> levels[k+1].
struct ReductionTrace {
  std::vector<std::vector<uint64_t>> levels;
  std::vector<std::vector<CompressorKind>> group_kinds;
  // group_index[k][i]: MOD-4 group of operand i at level k.
  std::vector<std::vector<unsigned>> group_index;
};

// Multi-operand carry-save reduction. Each level partitions its operands into
// ceil(n/4) groups of four in order, remainder group last. Full groups go
// through a chained 4:2, a group of three through a 3:2, and groups of one or
// two pass through unchanged. Levels repeat until at most two vectors remain.
// Throws std::invalid_argument on an empty operand list or bad width.
CarrySavePair csa_reduce_mod4(std::span<const uint64_t> operands, unsigned width,
                              ReductionTrace* trace = nullptr);

struct KsaResult {
  uint64_t sum = 0;
  bool cout = false;
  unsigned prefix_levels = 0;
};

// Kogge-Stone parallel-prefix adder. Generate/propagate pairs are combined
// with span doubling each level, ceil(log2 width) levels in total.
KsaResult kogge_stone_add(uint64_t a, uint64_t b, bool cin, unsigned width);

// Unsigned array multiplier: AND-array partial products reduced by
// csa_reduce_mod4 and resolved with kogge_stone_add. Product width is
// width_a + width_b, at most 64.
uint64_t wallace_multiply(uint64_t a, unsigned width_a, uint64_t b, unsigned width_b,
                          ReductionTrace* trace = nullptr);

// Zero bits above the most significant one of a width-bit vector; width for 0.
unsigned leading_zero_count(uint64_t x, unsigned width);

} // namespace fedp::bitmath

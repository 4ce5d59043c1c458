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

#include "fedp/bitmath.h"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace fedp::bitmath {

static void check_width(unsigned width) {
  if (width == 0 || width > kMaxWidth)
    throw std::invalid_argument("bitmath: width must be in [1, 64]");
}

CarrySavePair compress_3_2(uint64_t a, uint64_t b, uint64_t c, unsigned width) {
  uint64_t mask = width_mask(width);
  a &= mask;
  b &= mask;
  c &= mask;
  uint64_t majority = (a & b) | (a & c) | (b & c);
  return {(a ^ b ^ c), (majority << 1) & mask, width};
}

Compress42Result compress_4_2(uint64_t a, uint64_t b, uint64_t c, uint64_t d, uint64_t cin_vec,
                              unsigned width) {
  uint64_t mask = width_mask(width);
  a &= mask;
  b &= mask;
  c &= mask;
  uint64_t partial = a ^ b ^ c;
  uint64_t cout_vec = (a & b) | (a & c) | (b & c);
  CarrySavePair second = compress_3_2(partial, d, cin_vec, width);
  return {second, cout_vec};
}

CarrySavePair compress_4_2_chained(uint64_t a, uint64_t b, uint64_t c, uint64_t d, unsigned width) {
  uint64_t mask = width_mask(width);
  // cout depends only on (a, b, c), so the lateral chain has no loop
  uint64_t cout_vec = ((a & b) | (a & c) | (b & c)) & mask;
  return compress_4_2(a, b, c, d, (cout_vec << 1) & mask, width).pair;
}

std::string_view compressor_name(CompressorKind kind) {
  switch (kind) {
  case CompressorKind::Pass:   return "pass";
  case CompressorKind::Full32: return "3:2";
  case CompressorKind::Comp42: return "4:2";
  }
  return "?";
}

CarrySavePair csa_reduce_mod4(std::span<const uint64_t> operands, unsigned width,
                              ReductionTrace* trace) {
  check_width(width);
  if (operands.empty())
    throw std::invalid_argument("csa_reduce_mod4: empty operand list");

  uint64_t mask = width_mask(width);
  std::vector<uint64_t> level;
  level.reserve(operands.size());
  for (uint64_t x : operands)
    level.push_back(x & mask);

  if (trace) {
    trace->levels.clear();
    trace->group_kinds.clear();
    trace->group_index.clear();
    trace->levels.push_back(level);
  }

  std::vector<uint64_t> next;
  while (level.size() > 2) {
    next.clear();
    std::vector<CompressorKind> kinds;
    std::vector<unsigned> groups;
    for (size_t base = 0, g = 0; base < level.size(); base += 4, ++g) {
      size_t count = std::min<size_t>(4, level.size() - base);
      const uint64_t* x = level.data() + base;
      CompressorKind kind = CompressorKind::Pass;
      if (count == 4) {
        auto out = compress_4_2_chained(x[0], x[1], x[2], x[3], width);
        next.push_back(out.sum_vec);
        next.push_back(out.carry_vec);
        kind = CompressorKind::Comp42;
      } else if (count == 3) {
        auto out = compress_3_2(x[0], x[1], x[2], width);
        next.push_back(out.sum_vec);
        next.push_back(out.carry_vec);
        kind = CompressorKind::Full32;
      } else {
        next.insert(next.end(), x, x + count);
      }
      if (trace) {
        kinds.push_back(kind);
        groups.insert(groups.end(), count, unsigned(g));
      }
    }
    if (trace) {
      trace->group_kinds.push_back(std::move(kinds));
      trace->group_index.push_back(std::move(groups));
      trace->levels.push_back(next);
    }
    level.swap(next);
  }

  CarrySavePair out{level[0], level.size() > 1 ? level[1] : 0, width};
  return out;
}

KsaResult kogge_stone_add(uint64_t a, uint64_t b, bool cin, unsigned width) {
  check_width(width);
  uint64_t mask = width_mask(width);
  a &= mask;
  b &= mask;

  uint64_t propagate = a ^ b;
  // cin enters as a generate term on column 0
  uint64_t group_g = (a & b) | (propagate & uint64_t(cin));
  uint64_t group_p = propagate;

  unsigned levels = 0;
  for (unsigned span = 1; span < width; span <<= 1, ++levels) {
    group_g = (group_g | (group_p & (group_g << span))) & mask;
    group_p = (group_p & (group_p << span)) & mask;
  }

  // group_g bit i is now the carry out of column i
  uint64_t carries_in = ((group_g << 1) | uint64_t(cin)) & mask;
  KsaResult out;
  out.sum = (propagate ^ carries_in) & mask;
  out.cout = (group_g >> (width - 1)) & 1;
  out.prefix_levels = levels;
  return out;
}

uint64_t wallace_multiply(uint64_t a, unsigned width_a, uint64_t b, unsigned width_b,
                          ReductionTrace* trace) {
  unsigned width = width_a + width_b;
  check_width(width_a);
  check_width(width_b);
  check_width(width);
  a &= width_mask(width_a);
  b &= width_mask(width_b);

  std::vector<uint64_t> partials(width_b);
  for (unsigned j = 0; j < width_b; ++j)
    partials[j] = ((b >> j) & 1) ? (a << j) : 0;

  CarrySavePair reduced = csa_reduce_mod4(partials, width, trace);
  return kogge_stone_add(reduced.sum_vec, reduced.carry_vec, false, width).sum;
}

unsigned leading_zero_count(uint64_t x, unsigned width) {
  check_width(width);
  x &= width_mask(width);
  if (x == 0)
    return width;
  return unsigned(std::countl_zero(x)) - (64 - width);
}

} // namespace fedp::bitmath

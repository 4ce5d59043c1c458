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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fedp/oracle.h"
#include "fedp/pipeline.h"
#include "fedp/vectors.h"

#include <algorithm>
#include <random>

using namespace fedp;

namespace {

constexpr uint32_t kOne16 = 0x3C00;

uint32_t pack2(uint32_t lo, uint32_t hi) { return lo | (hi << 16); }

uint32_t run(const FedpConfig& cfg, std::vector<uint32_t> a, std::vector<uint32_t> b, uint32_t c) {
  return fedp_execute({cfg, std::move(a), std::move(b), c}).result;
}

int64_t floor_div_pow2(__int128 x, unsigned shift) {
  if (shift >= 100)
    return x < 0 ? -1 : 0;
  __int128 d = (__int128)1 << shift;
  __int128 q = x / d;
  if (x % d != 0 && x < 0)
    --q;
  return int64_t(q);
}

int64_t sign_extend(uint64_t v, unsigned width) {
  if (width < 64 && ((v >> (width - 1)) & 1))
    v |= ~bitmath::width_mask(width);
  return int64_t(v);
}

} // namespace

TEST_CASE("configuration") {
  FedpConfig cfg = FedpConfig::make(kFP16, 4);
  CHECK(cfg.acc_format == kFP32);
  CHECK(cfg.nominal_acc_width() == 27);
  CHECK(cfg.headroom_bits() == 3);
  CHECK(cfg.term_count() == 5);
  CHECK(cfg.words_per_operand() == 2);
  CHECK(FedpConfig::make(kINT8, 4).acc_format == kINT32);
  CHECK(FedpConfig::make(kUINT4, 4).words_per_operand() == 1);
  CHECK(FedpConfig::make(kUINT4, 32).words_per_operand() == 4);

  FedpConfig fp8 = FedpConfig::make(kFP8, 4);
  CHECK(fp8.lanes_per_operand() == 8);
  CHECK(fp8.term_count() == 9);
  CHECK(fp8.headroom_bits() == 4);
  fp8.presum_lane_pairs = true;
  CHECK(fp8.term_count() == 5);

  // the default fits every supported configuration
  for (auto fmt : {kFP16, kBF16, kFP8, kBF8, kINT8, kUINT4})
    for (unsigned n : {4u, 8u, 16u, 32u})
      CHECK_NOTHROW(FedpConfig::make(fmt, n).validate());

  FedpConfig bad = FedpConfig::make(kFP16, 5);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  FedpConfig wide = FedpConfig::make(kFP8, 32);
  wide.guard_bits = 32;
  CHECK_THROWS_AS(wide.validate(), std::invalid_argument);
  FedpConfig mixed = FedpConfig::make(kFP16, 4);
  mixed.acc_format = kINT32;
  CHECK_THROWS_AS(mixed.validate(), std::invalid_argument);
  CHECK_THROWS_AS(run(cfg, {0}, {0, 0}, 0), std::invalid_argument);
}

TEST_CASE("stage 1 product of FP16 ones") {
  FedpConfig cfg = FedpConfig::make(kFP16, 4);
  auto t = fedp_execute({cfg, {pack2(kOne16, kOne16), pack2(kOne16, kOne16)},
                         {pack2(kOne16, kOne16), pack2(kOne16, kOne16)}, 0}).trace;
  REQUIRE(t.stage1.products.size() == 4);
  CHECK(t.stage1.significand_products[0] == 1024u * 1024u);
  CHECK(t.stage1.products[0].biased_exp == 128);
  // 1.0 sits at bit 23 of the 25-bit magnitude
  CHECK(t.stage1.products[0].magnitude == (1u << 23));
  CHECK(t.result == 0x40800000u);
}

TEST_CASE("end-to-end examples") {
  FedpConfig fp16 = FedpConfig::make(kFP16, 4);
  uint32_t ones = pack2(kOne16, kOne16);
  CHECK(run(fp16, {ones, ones}, {ones, ones}, 0) == 0x40800000u);

  // [2^10, 1, -2^10, 1] . [1, 1, 1, 1]
  CHECK(run(fp16, {pack2(0x6400, kOne16), pack2(0xE400, kOne16)}, {ones, ones}, 0) == 0x40000000u);
  // [x, -x] . [1, 1] + 0 is exactly +0
  CHECK(run(fp16, {pack2(0x4B00, 0xCB00), 0}, {ones, ones}, 0) == 0u);
  // all -0 terms keep the sign
  CHECK(run(fp16, {pack2(0x8000, 0x8000), pack2(0x8000, 0x8000)}, {ones, ones}, 0x80000000u) ==
        0x80000000u);
  // addend only
  CHECK(run(fp16, {0, 0}, {0, 0}, 0x40490FDBu) == 0x40490FDBu);

  FedpConfig int8 = FedpConfig::make(kINT8, 4);
  CHECK(run(int8, {0x7F7F7F7F}, {0x7F7F7F7F}, 0) == 64516u);
  CHECK(run(int8, {0x00000080}, {0x0000007F}, 0) == uint32_t(-16256));
  CHECK(run(int8, {0}, {0}, 0xFE000000u) == 0xFE000000u);
}

TEST_CASE("special values short-circuit") {
  FedpConfig cfg = FedpConfig::make(kFP16, 4);
  uint32_t ones = pack2(kOne16, kOne16);
  CHECK(run(cfg, {pack2(0x7C00, kOne16), ones}, {ones, ones}, 0) == kPosInf32);
  CHECK(run(cfg, {pack2(0x7C00, 0xFC00), ones}, {ones, ones}, 0) == kCanonicalNaN32);
  CHECK(run(cfg, {pack2(0x7C00, kOne16), ones}, {pack2(0, kOne16), ones}, 0) == kCanonicalNaN32);
  CHECK(run(cfg, {pack2(0x7E00, kOne16), ones}, {ones, ones}, 0) == kCanonicalNaN32);
  CHECK(run(cfg, {ones, ones}, {ones, ones}, kNegInf32) == kNegInf32);
  FedpConfig fp8 = FedpConfig::make(kFP8, 4);
  CHECK(run(fp8, {0x7F, 0}, {0x38, 0}, 0) == kCanonicalNaN32);
}

TEST_CASE("subnormal inputs") {
  FedpConfig flush = FedpConfig::make(kFP16, 4, true);
  FedpConfig keep = FedpConfig::make(kFP16, 4, false);
  // smallest FP16 subnormal 2^-24 times 1.0
  std::vector<uint32_t> a{pack2(0x0001, 0), 0}, b{pack2(kOne16, 0), 0};
  CHECK(run(flush, a, b, 0) == 0u);
  CHECK(run(keep, a, b, 0) == 0x33800000u);
  // largest subnormal squared is below FP32 normals only for tiny factors; check a mid value
  std::vector<uint32_t> a2{pack2(0x03FF, 0), 0}, b2{pack2(0x4000, 0), 0};
  CHECK(run(keep, a2, b2, 0) == oracle_expected(keep, a2, b2, 0));
}

TEST_CASE("max exponent selection") {
  std::vector<int32_t> exps{5, 9, 2, 9, 1};
  auto sel = max_exponent_select(exps);
  CHECK(sel.max_exp == 9);
  CHECK(sel.index == 1);
  CHECK(sel.one_hot == std::vector<uint8_t>{0, 1, 0, 0, 0});
  CHECK(sel.shift_amounts == std::vector<uint32_t>{4, 0, 7, 0, 8});

  std::vector<int32_t> same(5, 17);
  auto eq = max_exponent_select(same);
  CHECK(eq.index == 0);
  CHECK(eq.one_hot == std::vector<uint8_t>{1, 0, 0, 0, 0});
  CHECK(eq.shift_amounts == std::vector<uint32_t>(5, 0));

  std::vector<int32_t> empty;
  CHECK_THROWS_AS(max_exponent_select(empty), std::invalid_argument);
}

TEST_CASE("sign matrix properties on random exponent sets") {
  std::mt19937_64 rng(30);
  for (int i = 0; i < 20000; ++i) {
    unsigned n = 1 + unsigned(rng() % 65);
    std::vector<int32_t> exps(n);
    for (auto& e : exps)
      e = int32_t(rng() % 40) - 5;
    auto sel = max_exponent_select(exps);
    auto it = std::max_element(exps.begin(), exps.end());
    REQUIRE(sel.index == unsigned(it - exps.begin()));
    REQUIRE(std::count(sel.one_hot.begin(), sel.one_hot.end(), 1) == 1);
    for (unsigned r = 0; r < n; ++r) {
      REQUIRE_FALSE(sel.matrix.adjusted_sign(r, sel.index));
      REQUIRE_FALSE(sel.matrix.sign(r, sel.index));
      REQUIRE(sel.shift_amounts[r] == uint32_t(*it - exps[r]));
    }
  }
}

TEST_CASE("alignment is a floor division of the signed term") {
  std::mt19937_64 rng(31);
  for (unsigned g : {1u, 8u, 31u}) {
    FedpConfig cfg = FedpConfig::make(kFP16, 4);
    cfg.guard_bits = g;
    const unsigned w = cfg.acc_width();
    for (int i = 0; i < 50000; ++i) {
      RawProduct p{bool(rng() & 1), 0, uint32_t(rng()) & 0x1FFFFFF, false};
      uint32_t shift = uint32_t(rng() % (w + 8));
      RawProduct terms[] = {p};
      uint32_t shifts[] = {shift};
      auto out = stage2_align(terms, shifts, cfg);
      __int128 scaled = (__int128)p.magnitude << g;
      if (p.negative)
        scaled = -scaled;
      int64_t want = floor_div_pow2(scaled, shift);
      bool lost = shift >= 100 ? p.magnitude != 0
                               : (((__int128)p.magnitude << g) & (((__int128)1 << shift) - 1)) != 0;
      REQUIRE(sign_extend(out.terms[0], w) == want);
      REQUIRE(bool(out.sticky[0]) == lost);
    }
  }
}

TEST_CASE("accumulation equals wide summation modulo the width") {
  std::mt19937_64 rng(32);
  FedpConfig cfg = FedpConfig::make(kFP16, 32);
  const unsigned w = cfg.acc_width();
  for (int i = 0; i < 20000; ++i) {
    unsigned n = 1 + unsigned(rng() % 33);
    std::vector<uint64_t> terms(n);
    unsigned __int128 total = 0;
    for (auto& t : terms) {
      t = rng() & bitmath::width_mask(w);
      total += t;
    }
    auto out = stage3_accumulate(terms, cfg);
    REQUIRE(out.raw_sum == (uint64_t(total) & bitmath::width_mask(w)));
    REQUIRE(out.csa.total() == out.raw_sum);
  }
  uint64_t pm[] = {5, bitmath::width_mask(w) - 4};   // +5 and -5
  CHECK(stage3_accumulate(pm, cfg).raw_sum == 0);
}

TEST_CASE("normalization and rounding match the exact oracle") {
  std::mt19937_64 rng(33);
  for (unsigned g : {1u, 31u}) {
    FedpConfig cfg = FedpConfig::make(kFP16, 4);
    cfg.guard_bits = g;
    const unsigned w = cfg.acc_width();
    for (int i = 0; i < 100000; ++i) {
      uint64_t raw = (rng() >> (rng() % 64)) & bitmath::width_mask(w);
      if (rng() & 1)
        raw = (~raw + 1) & bitmath::width_mask(w);
      bool sticky = rng() & 1;
      int64_t signed_raw = sign_extend(raw, w);
      // a residual below one LSB only has a single rounding outcome when the
      // leading one is at bit 24 or above; smaller sums are cancellation cases
      uint64_t mag = uint64_t(signed_raw < 0 ? -signed_raw : signed_raw);
      if (sticky && mag < (uint64_t(1) << 25))
        continue;
      int32_t max_exp = int32_t(rng() % 300) - 20;
      auto out = stage4_normalize_round(raw, max_exp, sticky, cfg);
      // a sticky residual lies strictly inside one LSB; 2^-40 of it stands for all
      oracle::BigInt value = oracle::BigInt(signed_raw) << 40;
      if (sticky)
        value += 1;
      int32_t lsb = max_exp - 127 - 24 - int32_t(g) - 40;
      bool neg_zero = value == 0 ? false : value < 0;
      uint32_t want = oracle::round_to_fp32({value, lsb}, neg_zero);
      REQUIRE_MESSAGE(out.word == want, "raw " << raw << " sticky " << sticky << " e " << max_exp);
    }
  }
}

TEST_CASE("INT addend split and high fixup") {
  CHECK(int_addend_split(0x01FFFFFFu) == IntAddendSplit{0x1FFFFFF, 0});
  CHECK(int_addend_split(0xFE000000u) == IntAddendSplit{0, 0x7F});

  std::mt19937_64 rng(34);
  for (auto fmt : {kINT8, kUINT4}) {
    for (unsigned n : {4u, 8u, 16u, 32u}) {
      FedpConfig cfg = FedpConfig::make(fmt, n);
      for (int i = 0; i < 5000; ++i) {
        std::vector<uint32_t> a(cfg.words_per_operand()), b(a.size());
        for (auto& x : a) x = uint32_t(rng());
        for (auto& x : b) x = uint32_t(rng());
        uint32_t c = uint32_t(rng());
        REQUIRE(run(cfg, a, b, c) == oracle_expected(cfg, a, b, c));
      }
    }
  }
}

TEST_CASE("UINT4 at N=4 ignores the upper half word") {
  FedpConfig cfg = FedpConfig::make(kUINT4, 4);
  CHECK(run(cfg, {0x00001111}, {0x00002222}, 7) == 15u);
  CHECK(run(cfg, {0xFFFF1111}, {0xFFFF2222}, 7) == 15u);
}

TEST_CASE("FP paths meet the accuracy contract on random vectors") {
  for (auto fmt : {kFP16, kBF16, kFP8, kBF8}) {
    for (unsigned n : {4u, 8u, 32u}) {
      FedpConfig cfg = FedpConfig::make(fmt, n);
      auto file = generate_vectors(cfg, 3000, 35 + n, {CaseClass::Uniform, CaseClass::Special});
      RunSummary summary;
      for (const auto& rec : file.records)
        summary.add(check_contract(fedp_execute(make_request(cfg, rec)), rec.expected));
      INFO(format_name(fmt.kind), " N=", n);
      CHECK(summary.failed == 0);
      CHECK(summary.lossless_exact == summary.lossless);
    }
  }
}

TEST_CASE("presummed lane pairs stay exact when no bits drop") {
  for (auto fmt : {kFP8, kBF8}) {
    FedpConfig cfg = FedpConfig::make(fmt, 4);
    cfg.presum_lane_pairs = true;
    auto file = generate_vectors(cfg, 5000, 36, {CaseClass::Uniform});
    RunSummary summary;
    for (const auto& rec : file.records)
      summary.add(check_contract(fedp_execute(make_request(cfg, rec)), rec.expected));
    CHECK(summary.lossless > 0);
    CHECK(summary.lossless_exact == summary.lossless);
  }
}

TEST_CASE("execution is deterministic and replayable per stage") {
  FedpConfig cfg = FedpConfig::make(kBF16, 8);
  auto file = generate_vectors(cfg, 200, 37, {CaseClass::Uniform});
  for (const auto& rec : file.records) {
    auto first = fedp_execute(make_request(cfg, rec));
    auto second = fedp_execute(make_request(cfg, rec));
    REQUIRE(first.result == second.result);
    const auto& t = first.trace;
    REQUIRE(t.stage2.terms == second.trace.stage2.terms);
    // rebuild stages 3 and 4 from the recorded stage 2 output
    auto s3 = stage3_accumulate(t.stage2.terms, cfg);
    REQUIRE(s3.raw_sum == t.stage3.raw_sum);
    auto s4 = stage4_normalize_round(s3.raw_sum, t.selection.max_exp, t.stage2.any_sticky, cfg,
                                     t.stage1.all_negative_zero);
    REQUIRE(s4.word == first.result);
  }
}

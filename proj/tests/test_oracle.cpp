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

#include <mpfr.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

using namespace fedp;
using namespace fedp::oracle;

namespace {

// Second oracle: MPFR with enough precision that every addition is exact,
// then a 24-bit round-to-nearest-even with the flush-to-zero range check.
class MpfrDot {
public:
  MpfrDot() {
    mpfr_inits2(kPrec, acc_, term_, lhs_, rhs_, (mpfr_ptr)nullptr);
  }
  ~MpfrDot() { mpfr_clears(acc_, term_, lhs_, rhs_, (mpfr_ptr)nullptr); }

  // finite, non-special inputs only; subnormal inputs are flushed
  uint32_t dot(std::span<const uint32_t> a, std::span<const uint32_t> b, uint32_t c,
               const ScalarFormat& fmt) {
    mpfr_set_prec(acc_, kPrec);   // the previous call rounded it to 24 bits
    mpfr_set_zero(acc_, 1);
    bool all_neg_zero = true;
    for (size_t i = 0; i < a.size(); ++i) {
      load(lhs_, a[i], fmt);
      load(rhs_, b[i], fmt);
      mpfr_mul(term_, lhs_, rhs_, MPFR_RNDN);
      all_neg_zero = all_neg_zero && mpfr_zero_p(term_) && mpfr_signbit(term_);
      mpfr_add(acc_, acc_, term_, MPFR_RNDN);
    }
    load(term_, c, kFP32);
    all_neg_zero = all_neg_zero && mpfr_zero_p(term_) && mpfr_signbit(term_);
    mpfr_add(acc_, acc_, term_, MPFR_RNDN);

    if (mpfr_zero_p(acc_))
      return all_neg_zero ? 0x80000000u : 0;
    bool neg = mpfr_signbit(acc_);
    mpfr_prec_round(acc_, 24, MPFR_RNDN);
    mpfr_abs(acc_, acc_, MPFR_RNDN);
    uint32_t sign = neg ? 0x80000000u : 0;
    if (mpfr_cmp_ui_2exp(acc_, 1, -126) < 0)
      return sign;
    if (mpfr_cmp_ui_2exp(acc_, 1, 128) >= 0)
      return sign | 0x7f800000u;
    return sign | std::bit_cast<uint32_t>(mpfr_get_flt(acc_, MPFR_RNDN));
  }

private:
  static constexpr mpfr_prec_t kPrec = 1400;

  static void load(mpfr_t dst, uint32_t bits, const ScalarFormat& fmt) {
    uint32_t s = (bits >> (fmt.total_bits - 1)) & 1;
    uint32_t e = (bits >> fmt.man_bits) & ((1u << fmt.exp_bits) - 1);
    uint32_t m = bits & ((1u << fmt.man_bits) - 1);
    if (e == 0) {
      mpfr_set_zero(dst, s ? -1 : 1);
      return;
    }
    mpfr_set_ui_2exp(dst, (1u << fmt.man_bits) | m, int(e) - fmt.bias - int(fmt.man_bits), MPFR_RNDN);
    if (s)
      mpfr_neg(dst, dst, MPFR_RNDN);
  }

  mpfr_t acc_, term_, lhs_, rhs_;
};

bool finite(uint32_t bits, const ScalarFormat& fmt) {
  uint32_t e = (bits >> fmt.man_bits) & ((1u << fmt.exp_bits) - 1);
  uint32_t m = bits & ((1u << fmt.man_bits) - 1);
  if (fmt.kind == FormatKind::FP8)
    return !(e == 0xf && m == 7);
  return e != (1u << fmt.exp_bits) - 1;
}

uint32_t random_finite(std::mt19937_64& rng, const ScalarFormat& fmt) {
  for (;;) {
    uint32_t x = uint32_t(rng()) & fmt.lane_mask();
    if (finite(x, fmt))
      return x;
  }
}

uint32_t fp16(double v) {
  // exact for the small values used below
  int e;
  double m = std::frexp(std::fabs(v), &e);
  if (v == 0)
    return std::signbit(v) ? 0x8000 : 0;
  uint32_t man = uint32_t(std::ldexp(m, 11)) & 0x3ff;
  return (v < 0 ? 0x8000u : 0) | (uint32_t(e - 1 + 15) << 10) | man;
}

} // namespace

TEST_CASE("dot product examples") {
  std::vector<uint32_t> ones(4, fp16(1.0));
  CHECK(exact_dot_fp(ones, ones, 0, kFP16, true).rne_fp32 == 0x40800000u);

  std::vector<uint32_t> a{fp16(1024), fp16(1), fp16(-1024), fp16(1)};
  CHECK(exact_dot_fp(a, ones, 0, kFP16, true).rne_fp32 == 0x40000000u);

  std::vector<uint32_t> x{fp16(3.5), fp16(-3.5)}, one2{fp16(1), fp16(1)};
  auto cancel = exact_dot_fp(x, one2, 0, kFP16, true);
  CHECK(cancel.exact.is_zero());
  CHECK(cancel.rne_fp32 == 0u);

  std::vector<uint32_t> i127(4, 127);
  CHECK(exact_dot_int(i127, i127, 0, kINT8) == 64516u);
  std::vector<uint32_t> neg{0x80}, pos{0x7f};
  CHECK(exact_dot_int(neg, pos, 0, kINT8) == uint32_t(-16256));
  std::vector<uint32_t> u15(8, 15);
  CHECK(exact_dot_int(u15, u15, 0, kUINT4) == 1800u);
  std::vector<uint32_t> z(4, 0);
  CHECK(exact_dot_int(z, z, 0xDEADBEEF, kINT8) == 0xDEADBEEFu);
  CHECK(exact_dot_int(i127, i127, 0x7fffffff, kINT8) == uint32_t(0x7fffffff + int64_t(64516)));
}

TEST_CASE("special-value rules") {
  const uint32_t inf = 0x7c00, ninf = 0xfc00, nan = 0x7e00, one = fp16(1), zero = 0;
  auto run = [](std::vector<uint32_t> a, std::vector<uint32_t> b, uint32_t c) {
    return exact_dot_fp(a, b, c, kFP16, true);
  };
  CHECK(run({inf, one}, {one, one}, 0).rne_fp32 == kPosInf32);
  CHECK(run({inf, one}, {fp16(-1), one}, 0).rne_fp32 == kNegInf32);
  CHECK(run({inf, one}, {zero, one}, 0).rne_fp32 == kCanonicalNaN32);
  CHECK(run({inf, ninf}, {one, one}, 0).rne_fp32 == kCanonicalNaN32);
  CHECK(run({nan, one}, {one, one}, 0).rne_fp32 == kCanonicalNaN32);
  CHECK(run({one, one}, {one, one}, 0x7fc00001u).rne_fp32 == kCanonicalNaN32);
  CHECK(run({inf, one}, {one, one}, kNegInf32).rne_fp32 == kCanonicalNaN32);
  CHECK(run({one, one}, {one, one}, kNegInf32).rne_fp32 == kNegInf32);
  // a subnormal that flushes to zero turns Inf x subnormal into NaN
  CHECK(run({inf}, {0x0001}, 0).rne_fp32 == kCanonicalNaN32);
  CHECK(exact_dot_fp(std::vector<uint32_t>{inf}, std::vector<uint32_t>{0x0001}, 0, kFP16, false)
            .rne_fp32 == kPosInf32);
  // E4M3 has no Inf, only the all-ones NaN
  CHECK(exact_dot_fp(std::vector<uint32_t>{0x7f}, std::vector<uint32_t>{0x38}, 0, kFP8, true)
            .rne_fp32 == kCanonicalNaN32);
}

TEST_CASE("signed zero") {
  std::vector<uint32_t> nz{0x8000, 0x8000}, pz{0x0000, 0x0000}, one{fp16(1), fp16(1)};
  CHECK(exact_dot_fp(nz, one, 0x80000000u, kFP16, true).rne_fp32 == 0x80000000u);
  CHECK(exact_dot_fp(nz, one, 0, kFP16, true).rne_fp32 == 0u);
  CHECK(exact_dot_fp(pz, one, 0x80000000u, kFP16, true).rne_fp32 == 0u);
}

TEST_CASE("round_to_fp32 matches host rounding of exactly representable doubles") {
  std::mt19937_64 rng(20);
  for (int i = 0; i < 300000; ++i) {
    int64_t m = int64_t(rng() >> 11);                 // up to 53 bits
    if (rng() & 1)
      m = -m;
    int32_t e = int32_t(rng() % 200) - 150;
    double v = std::ldexp(double(m), e);
    if (v != 0 && std::fabs(v) < 0x1p-126)
      continue;                                       // host keeps subnormals, oracle flushes
    float want = float(v);
    if (std::fabs(want) < 0x1p-126f)
      want = std::copysign(0.0f, want);               // rounded below the normal range
    uint32_t got = round_to_fp32({BigInt(m), e});
    REQUIRE(got == std::bit_cast<uint32_t>(want));
  }
}

TEST_CASE("dot product is invariant under term permutation") {
  std::mt19937_64 rng(21);
  for (auto fmt : {kFP16, kBF16, kFP8, kBF8}) {
    for (int i = 0; i < 2000; ++i) {
      std::vector<uint32_t> a(8), b(8);
      for (auto& x : a) x = random_finite(rng, fmt);
      for (auto& x : b) x = random_finite(rng, fmt);
      uint32_t c = random_finite(rng, kFP32);
      auto before = exact_dot_fp(a, b, c, fmt, true);
      std::vector<size_t> idx{0, 1, 2, 3, 4, 5, 6, 7};
      std::shuffle(idx.begin(), idx.end(), rng);
      std::vector<uint32_t> pa(8), pb(8);
      for (size_t k = 0; k < 8; ++k) {
        pa[k] = a[idx[k]];
        pb[k] = b[idx[k]];
      }
      auto after = exact_dot_fp(pa, pb, c, fmt, true);
      REQUIRE(before.exact == after.exact);
      REQUIRE(before.rne_fp32 == after.rne_fp32);
    }
  }
}

TEST_CASE("exact oracle agrees with an MPFR dual oracle") {
  MpfrDot mpfr;
  std::mt19937_64 rng(22);
  for (auto fmt : {kFP16, kBF16, kFP8, kBF8}) {
    const unsigned lanes = fmt.total_bits == 8 ? 8 : 4;
    for (int i = 0; i < 50000; ++i) {
      std::vector<uint32_t> a(lanes), b(lanes);
      for (auto& x : a) x = random_finite(rng, fmt);
      for (auto& x : b) x = random_finite(rng, fmt);
      uint32_t c = random_finite(rng, kFP32);
      if (i % 3 == 0) {
        // force cancellation against the first product
        a[1] = a[0] ^ (1u << (fmt.total_bits - 1));
        b[1] = b[0];
      }
      if (i % 5 == 0)
        c = 0;
      REQUIRE_MESSAGE(exact_dot_fp(a, b, c, fmt, true).rne_fp32 == mpfr.dot(a, b, c, fmt),
                      format_name(fmt.kind) << " vector " << i);
    }
  }
}

TEST_CASE("integer oracle agrees with 128-bit arithmetic") {
  std::mt19937_64 rng(23);
  for (auto fmt : {kINT8, kUINT4}) {
    for (int i = 0; i < 100000; ++i) {
      unsigned lanes = 1 + unsigned(rng() % 32);
      std::vector<uint32_t> a(lanes), b(lanes);
      __int128 acc = int32_t(uint32_t(rng()));
      uint32_t c = uint32_t(acc);
      for (unsigned k = 0; k < lanes; ++k) {
        a[k] = uint32_t(rng()) & fmt.lane_mask();
        b[k] = uint32_t(rng()) & fmt.lane_mask();
        __int128 va = fmt.is_signed ? int8_t(a[k]) : a[k];
        __int128 vb = fmt.is_signed ? int8_t(b[k]) : b[k];
        acc += va * vb;
      }
      REQUIRE(exact_dot_int(a, b, c, fmt) == uint32_t(acc));
    }
  }
}

TEST_CASE("exact_value reproduces decoded values") {
  for (uint32_t x = 0; x < 0x10000; ++x) {
    if (!finite(x, kFP16))
      continue;
    auto v = exact_value(x, kFP16, false);
    double d = std::ldexp(v.mantissa.convert_to<double>(), v.exponent);
    REQUIRE(d == std::abs(d) * (((x >> 15) & 1) && d != 0 ? -1 : 1));
    REQUIRE(std::fabs(d) == std::fabs(to_double(decode(x, kFP16), kFP16)));
  }
  CHECK(exact_value(0x0001, kFP16, true).is_zero());
  CHECK_THROWS_AS(exact_value(0, kINT8, true), std::invalid_argument);
}

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

#include "fedp/pipeline.h"

#include <bit>
#include <stdexcept>
#include <string>

namespace fedp {

using bitmath::width_mask;

FedpConfig FedpConfig::make(const ScalarFormat& mul, unsigned n, bool subnormal_flush) {
  FedpConfig cfg;
  cfg.n_elements = n;
  cfg.mul_format = mul;
  cfg.acc_format = mul.is_integer() ? kINT32 : kFP32;
  cfg.subnormal_flush = subnormal_flush;
  return cfg;
}

void FedpConfig::validate() const {
  if (n_elements != 4 && n_elements != 8 && n_elements != 16 && n_elements != 32)
    throw std::invalid_argument("fedp: N must be one of 4, 8, 16, 32 (got " +
                                std::to_string(n_elements) + ")");
  if (!mul_format.is_packed())
    throw std::invalid_argument("fedp: multiplier format must be a packed low-precision kind");
  if (mul_format.is_integer() != (acc_format == kINT32))
    throw std::invalid_argument("fedp: integer multiply requires INT32 accumulation and FP requires FP32");
  if (!mul_format.is_integer() && acc_format != kFP32)
    throw std::invalid_argument("fedp: FP multiply requires FP32 accumulation");
  if (acc_width() > bitmath::kMaxWidth)
    throw std::invalid_argument("fedp: accumulator wider than 64 bits; reduce guard_bits");
}

unsigned FedpConfig::log2_n() const {
  return unsigned(std::bit_width(n_elements)) - 1;
}

unsigned FedpConfig::term_count() const {
  unsigned products = pairs_lanes() && !presum_lane_pairs ? lanes_per_operand() : n_elements;
  return products + 1;
}

unsigned FedpConfig::headroom_bits() const {
  // ceil(log2(term_count()))
  return unsigned(std::bit_width(term_count() - 1));
}

unsigned FedpConfig::words_per_operand() const {
  unsigned per_word = mul_format.lanes_per_word();
  return (lanes_per_operand() + per_word - 1) / per_word;
}

namespace {

struct LaneOperand {
  bool zero = true;
  bool negative = false;
  bool inf = false;
  bool nan = false;
  int32_t exp = 0;
  uint32_t significand = 0;
};

LaneOperand lane_operand(const DecodedScalar& v, bool flush) {
  LaneOperand op;
  op.negative = v.negative;
  switch (v.cls) {
  case FpClass::Zero:
    break;
  case FpClass::Subnormal:
    if (!flush) {
      op.zero = false;
      op.exp = 1;
      op.significand = v.significand;
    }
    break;
  case FpClass::Normal:
    op.zero = false;
    op.exp = int32_t(v.biased_exp);
    op.significand = v.significand;
    break;
  case FpClass::Inf:
    op.zero = false;
    op.inf = true;
    break;
  case FpClass::NaN:
    op.zero = false;
    op.nan = true;
    break;
  }
  return op;
}

struct LaneProduct {
  bool zero = true;
  bool negative = false;
  int32_t exp = 0;
  uint32_t significand = 0;
};

// Combines two lane products, placed with 22 fraction bits, into one E8M25
// term one binade up so that their sum fits in 25 bits.
RawProduct sum_lane_pair(const LaneProduct& p0, const LaneProduct& p1, unsigned frac_shift) {
  if (p0.zero && p1.zero)
    return {p0.negative && p1.negative, 0, 0, false};
  if (p0.zero || p1.zero) {
    const LaneProduct& p = p0.zero ? p1 : p0;
    return {p.negative, p.exp + 1, p.significand << frac_shift, false};
  }

  const bool first_big = p0.exp >= p1.exp;
  const LaneProduct& big = first_big ? p0 : p1;
  const LaneProduct& small = first_big ? p1 : p0;
  uint32_t d = uint32_t(big.exp - small.exp);
  uint64_t big_v = uint64_t(big.significand) << frac_shift;
  uint64_t small_v = uint64_t(small.significand) << frac_shift;
  uint64_t small_aligned = d >= 64 ? 0 : small_v >> d;
  bool lost = d >= 64 ? small_v != 0 : (small_v & width_mask(d)) != 0 && d != 0;

  RawProduct out;
  out.biased_exp = big.exp + 1;
  if (big.negative == small.negative) {
    out.negative = big.negative;
    out.magnitude = uint32_t(big_v + small_aligned);
    out.sticky = lost;
  } else if (!lost) {
    int64_t diff = int64_t(big_v) - int64_t(small_aligned);
    out.negative = diff < 0 ? small.negative : big.negative;
    out.magnitude = uint32_t(diff < 0 ? -diff : diff);
    if (diff == 0)
      out = {false, 0, 0, false};
  } else {
    // the truncated remainder of the smaller product is borrowed from the
    // larger one, leaving a magnitude whose true value lies just above it
    out.negative = big.negative;
    out.magnitude = uint32_t(big_v - small_aligned - 1);
    out.sticky = true;
  }
  return out;
}

SpecialResult detect_special(std::span<const LaneOperand> a, std::span<const LaneOperand> b,
                             const LaneOperand& c) {
  bool nan = c.nan;
  bool pos_inf = c.inf && !c.negative;
  bool neg_inf = c.inf && c.negative;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].nan || b[i].nan) {
      nan = true;
    } else if (a[i].inf || b[i].inf) {
      if (a[i].zero || b[i].zero)
        nan = true;                     // Inf * 0
      else if (a[i].negative != b[i].negative)
        neg_inf = true;
      else
        pos_inf = true;
    }
  }
  if (nan || (pos_inf && neg_inf))
    return SpecialResult::NaN;
  if (pos_inf)
    return SpecialResult::PosInf;
  if (neg_inf)
    return SpecialResult::NegInf;
  return SpecialResult::None;
}

void stage1_integer(std::span<const DecodedScalar> a_lanes, std::span<const DecodedScalar> b_lanes,
                    const DecodedScalar& addend, const FedpConfig& cfg, Stage1Result& out) {
  const bool is_signed = cfg.mul_format.is_signed;
  const unsigned width = cfg.mul_format.total_bits;
  const uint32_t low_mask = uint32_t(width_mask(kIntLowBits));
  for (unsigned i = 0; i < cfg.n_elements; ++i) {
    int64_t a = a_lanes[i].int_value;
    int64_t b = b_lanes[i].int_value;
    int32_t product;
    if (is_signed) {
      // sign-magnitude multiply: |INT8| <= 128 fits the 8-bit array
      uint64_t mag = bitmath::wallace_multiply(uint64_t(a < 0 ? -a : a), width,
                                               uint64_t(b < 0 ? -b : b), width);
      product = ((a < 0) != (b < 0)) ? -int32_t(mag) : int32_t(mag);
    } else {
      product = int32_t(bitmath::wallace_multiply(uint64_t(a), width, uint64_t(b), width));
    }
    out.int_products.push_back(product);
    out.int_terms.push_back(uint32_t(product) & low_mask);
    out.product_signs.push_back(product < 0 ? 1 : 0);
  }
  out.addend_split = int_addend_split(uint32_t(addend.int_value));
}

} // namespace

Stage1Result stage1_multiply(std::span<const DecodedScalar> a_lanes,
                             std::span<const DecodedScalar> b_lanes,
                             const DecodedScalar& addend, const FedpConfig& cfg) {
  const unsigned lanes = cfg.lanes_per_operand();
  if (a_lanes.size() < lanes || b_lanes.size() < lanes)
    throw std::invalid_argument("stage1_multiply: lane count does not match configuration");

  Stage1Result out;
  if (cfg.is_integer()) {
    stage1_integer(a_lanes, b_lanes, addend, cfg, out);
    return out;
  }

  const ScalarFormat& fmt = cfg.mul_format;
  const bool flush = cfg.subnormal_flush;
  std::vector<LaneOperand> a(lanes), b(lanes);
  for (unsigned i = 0; i < lanes; ++i) {
    a[i] = lane_operand(a_lanes[i], flush);
    b[i] = lane_operand(b_lanes[i], flush);
  }
  LaneOperand c = lane_operand(addend, flush);

  out.special = detect_special(a, b, c);
  if (out.special != SpecialResult::None)
    return out;

  // E = ea + eb + BIAS_FP32 - 2*BIAS_in + 1
  const int32_t exp_offset = 127 - 2 * fmt.bias + 1;
  const unsigned sig_width = fmt.man_bits + 1;
  std::vector<LaneProduct> lane_products(lanes);
  out.significand_products.reserve(lanes);
  out.lane_exponents.reserve(lanes);
  for (unsigned i = 0; i < lanes; ++i) {
    LaneProduct& p = lane_products[i];
    p.negative = a[i].negative != b[i].negative;
    p.zero = a[i].zero || b[i].zero;
    if (!p.zero) {
      p.significand = uint32_t(bitmath::wallace_multiply(a[i].significand, sig_width,
                                                         b[i].significand, sig_width));
      p.exp = a[i].exp + b[i].exp + exp_offset;
    }
    out.significand_products.push_back(p.significand);
    out.lane_exponents.push_back(p.zero ? kZeroTermExponent : p.exp);
  }

  // product fraction has 2*man_bits bits; single products get 23 fraction bits
  // in the E8M25 magnitude, lane pairs 22
  const unsigned product_frac = 2 * fmt.man_bits;
  out.products.reserve(cfg.term_count() - 1);
  if (cfg.pairs_lanes() && cfg.presum_lane_pairs) {
    for (unsigned k = 0; k < cfg.n_elements; ++k)
      out.products.push_back(
          sum_lane_pair(lane_products[2 * k], lane_products[2 * k + 1], 22 - product_frac));
  } else {
    for (const auto& p : lane_products) {
      if (p.zero)
        out.products.push_back({p.negative, 0, 0, false});
      else
        out.products.push_back({p.negative, p.exp, p.significand << (23 - product_frac), false});
    }
  }

  // FP32 addend enters as 1.23 significand shifted to the 1.24 binal point
  out.addend.negative = c.negative;
  if (!c.zero) {
    out.addend.biased_exp = c.exp;
    out.addend.magnitude = c.significand << 1;
  }

  bool all_neg_zero = out.addend.is_zero() && out.addend.negative;
  for (const auto& p : out.products)
    all_neg_zero = all_neg_zero && p.is_zero() && p.negative;
  out.all_negative_zero = all_neg_zero;
  return out;
}

MaxExponentSelection max_exponent_select(std::span<const int32_t> exps) {
  if (exps.empty())
    throw std::invalid_argument("max_exponent_select: empty exponent list");

  const unsigned n = unsigned(exps.size());
  MaxExponentSelection sel;
  SignMatrix& m = sel.matrix;
  m.size = n;
  m.diffs.resize(n * n);
  m.signs.resize(n * n);
  m.adjusted.resize(n * n);
  for (unsigned r = 0; r < n; ++r) {
    for (unsigned c = 0; c < n; ++c) {
      int32_t d = exps[c] - exps[r];
      m.diffs[r * n + c] = d;
      m.signs[r * n + c] = d < 0;
      m.adjusted[r * n + c] = (d < 0) || (r < c && d == 0);
    }
  }

  // reduction-OR down each column, inverted
  sel.one_hot.assign(n, 0);
  for (unsigned c = 0; c < n; ++c) {
    bool any = false;
    for (unsigned r = 0; r < n; ++r)
      any = any || m.adjusted[r * n + c];
    sel.one_hot[c] = !any;
  }
  for (unsigned c = 0; c < n; ++c) {
    if (sel.one_hot[c]) {
      sel.index = c;
      break;
    }
  }
  sel.max_exp = exps[sel.index];

  // row `index` holds exp[i] - max; negating it gives the shift amounts
  sel.shift_amounts.resize(n);
  for (unsigned i = 0; i < n; ++i)
    sel.shift_amounts[i] = uint32_t(-m.diff(sel.index, i));
  return sel;
}

AlignedTerms stage2_align(std::span<const RawProduct> terms,
                          std::span<const uint32_t> shift_amounts, const FedpConfig& cfg) {
  if (terms.size() != shift_amounts.size())
    throw std::invalid_argument("stage2_align: term and shift counts differ");
  const unsigned width = cfg.acc_width();
  const uint64_t mask = width_mask(width);

  AlignedTerms out;
  out.terms.reserve(terms.size());
  out.sticky.reserve(terms.size());
  for (size_t i = 0; i < terms.size(); ++i) {
    uint64_t placed = uint64_t(terms[i].magnitude) << cfg.guard_bits;
    uint32_t shift = shift_amounts[i];
    uint64_t aligned = 0;
    bool lost = false;
    if (shift >= width) {
      lost = placed != 0;
    } else {
      aligned = placed >> shift;
      lost = (placed & width_mask(shift)) != 0 && shift != 0;
    }
    bool sticky = lost || terms[i].sticky;
    uint64_t value = aligned;
    if (terms[i].negative)
      value = sticky ? ~aligned : (~aligned + 1); // carry-in = !sticky
    out.terms.push_back(value & mask);
    out.sticky.push_back(sticky);
    out.any_sticky = out.any_sticky || sticky;
  }
  return out;
}

static unsigned csa_level_count(size_t n) {
  unsigned levels = 0;
  while (n > 2) {
    size_t rem = n % 4;
    n = 2 * (n / 4) + (rem == 3 ? 2 : rem);
    ++levels;
  }
  return levels;
}

Stage3Result stage3_accumulate(std::span<const uint64_t> terms, const FedpConfig& cfg) {
  const unsigned width = cfg.acc_width();
  Stage3Result out;
  out.csa = bitmath::csa_reduce_mod4(terms, width);
  out.raw_sum = bitmath::kogge_stone_add(out.csa.sum_vec, out.csa.carry_vec, false, width).sum;
  out.csa_levels = csa_level_count(terms.size());
  return out;
}

Stage4Result stage4_normalize_round(uint64_t raw_sum, int32_t max_exp, bool sticky,
                                    const FedpConfig& cfg, bool all_negative_zero) {
  const unsigned width = cfg.acc_width();
  const uint64_t mask = width_mask(width);
  raw_sum &= mask;

  Stage4Result out;
  out.negative = (raw_sum >> (width - 1)) & 1;
  // with a positive residual pending, |T + r| = ~T for negative T
  if (out.negative)
    out.magnitude = (sticky ? ~raw_sum : (~raw_sum + 1)) & mask;
  else
    out.magnitude = raw_sum;
  out.lzc = bitmath::leading_zero_count(out.magnitude, width);

  if (out.magnitude == 0) {
    bool neg = out.negative || (raw_sum == 0 && !sticky && all_negative_zero);
    out.negative = neg;
    out.word = neg ? 0x80000000u : 0;
    return out;
  }

  const int32_t lead = int32_t(width - 1 - out.lzc);
  constexpr int32_t kLeadPos = int32_t(kGrsSignificandBits) - 1;
  // accumulator LSB weighs 2^(max_exp - 127 - 24 - guard_bits)
  out.unbiased_exp = max_exp - 127 - 24 - int32_t(cfg.guard_bits) + lead;

  uint64_t sig;
  if (lead >= kLeadPos) {
    unsigned drop = unsigned(lead - kLeadPos);
    sig = out.magnitude >> drop;
    if (drop && (out.magnitude & width_mask(drop)))
      sig |= 1;
  } else {
    sig = out.magnitude << (kLeadPos - lead);
  }
  if (sticky)
    sig |= 1;
  out.pre_round = uint32_t(sig);

  bool guard = (sig >> 2) & 1;
  bool rest = (sig & 3) != 0;
  out.round_up = guard && (rest || ((sig >> 3) & 1));
  out.word = encode_fp32(out.negative, out.unbiased_exp, out.pre_round);
  return out;
}

IntAddendSplit int_addend_split(uint32_t c) {
  return {c & uint32_t(width_mask(kIntLowBits)), c >> kIntLowBits};
}

uint32_t int_high_fixup(uint64_t low_sum, uint32_t high7, std::span<const uint8_t> product_signs,
                        const FedpConfig& cfg) {
  low_sum &= width_mask(cfg.acc_width());
  uint32_t carries = uint32_t(low_sum >> kIntLowBits);
  uint32_t negatives = 0;
  for (uint8_t s : product_signs)
    negatives += s ? 1 : 0;
  uint32_t high = (high7 + carries - negatives) & uint32_t(width_mask(kIntHighBits));
  return (high << kIntLowBits) | uint32_t(low_sum & width_mask(kIntLowBits));
}

static uint32_t special_word(SpecialResult s) {
  switch (s) {
  case SpecialResult::NaN:    return kCanonicalNaN32;
  case SpecialResult::PosInf: return kPosInf32;
  case SpecialResult::NegInf: return kNegInf32;
  case SpecialResult::None:   break;
  }
  return 0;
}

FedpResult fedp_execute(const FedpRequest& req) {
  const FedpConfig& cfg = req.cfg;
  cfg.validate();
  const unsigned words = cfg.words_per_operand();
  if (req.a_words.size() != words || req.b_words.size() != words)
    throw std::invalid_argument("fedp_execute: expected " + std::to_string(words) +
                                " words per operand, got " + std::to_string(req.a_words.size()) +
                                " and " + std::to_string(req.b_words.size()));

  FedpResult res;
  PipelineTrace& t = res.trace;
  t.cfg = cfg;

  const unsigned lanes = cfg.lanes_per_operand();
  auto a_bits = lane_bits(req.a_words, cfg.mul_format);
  auto b_bits = lane_bits(req.b_words, cfg.mul_format);
  t.a_lanes.reserve(lanes);
  t.b_lanes.reserve(lanes);
  for (unsigned i = 0; i < lanes; ++i) {
    t.a_lanes.push_back(decode(a_bits[i], cfg.mul_format));
    t.b_lanes.push_back(decode(b_bits[i], cfg.mul_format));
  }
  t.addend = decode(req.c_word, cfg.acc_format);

  t.stage1 = stage1_multiply(t.a_lanes, t.b_lanes, t.addend, cfg);

  if (cfg.is_integer()) {
    std::vector<uint64_t> terms(t.stage1.int_terms.begin(), t.stage1.int_terms.end());
    terms.push_back(t.stage1.addend_split.low25);
    t.stage3 = stage3_accumulate(terms, cfg);
    t.result = int_high_fixup(t.stage3.raw_sum, t.stage1.addend_split.high7,
                              t.stage1.product_signs, cfg);
    res.result = t.result;
    return res;
  }

  if (t.stage1.special != SpecialResult::None) {
    t.result = special_word(t.stage1.special);
    res.result = t.result;
    return res;
  }

  std::vector<RawProduct> terms = t.stage1.products;
  terms.push_back(t.stage1.addend);
  std::vector<int32_t> exps;
  exps.reserve(terms.size());
  for (const auto& term : terms)
    exps.push_back(term.is_zero() ? kZeroTermExponent : term.biased_exp);

  t.selection = max_exponent_select(exps);
  t.stage2 = stage2_align(terms, t.selection.shift_amounts, cfg);
  t.stage3 = stage3_accumulate(t.stage2.terms, cfg);
  t.stage4 = stage4_normalize_round(t.stage3.raw_sum, t.selection.max_exp, t.stage2.any_sticky,
                                    cfg, t.stage1.all_negative_zero);
  t.result = t.stage4.word;
  res.result = t.result;
  return res;
}

} // namespace fedp

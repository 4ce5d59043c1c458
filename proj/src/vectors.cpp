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

#include "fedp/vectors.h"

#include "fedp/oracle.h"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace fedp {

using json = nlohmann::json;

std::string_view case_class_name(CaseClass cls) {
  switch (cls) {
  case CaseClass::Uniform:      return "uniform";
  case CaseClass::Cancellation: return "cancellation";
  case CaseClass::Spread:       return "spread";
  case CaseClass::Special:      return "special";
  case CaseClass::Boundary:     return "boundary";
  }
  return "?";
}

std::optional<CaseClass> parse_case_class(std::string_view name) {
  for (auto cls : {CaseClass::Uniform, CaseClass::Cancellation, CaseClass::Spread,
                   CaseClass::Special, CaseClass::Boundary}) {
    if (case_class_name(cls) == name)
      return cls;
  }
  return std::nullopt;
}

bool case_class_supported(CaseClass cls, const ScalarFormat& fmt) {
  return !(cls == CaseClass::Special && fmt.is_integer());
}

uint32_t oracle_expected(const FedpConfig& cfg, const std::vector<uint32_t>& a_words,
                         const std::vector<uint32_t>& b_words, uint32_t c_word) {
  const unsigned lanes = cfg.lanes_per_operand();
  auto a = lane_bits(a_words, cfg.mul_format);
  auto b = lane_bits(b_words, cfg.mul_format);
  a.resize(lanes);
  b.resize(lanes);
  if (cfg.is_integer())
    return oracle::exact_dot_int(a, b, c_word, cfg.mul_format);
  return oracle::exact_dot_fp(a, b, c_word, cfg.mul_format, cfg.subnormal_flush).rne_fp32;
}

namespace {

uint32_t random_bits(std::mt19937_64& rng, const ScalarFormat& fmt) {
  return uint32_t(rng()) & fmt.lane_mask();
}

uint32_t random_finite(std::mt19937_64& rng, const ScalarFormat& fmt) {
  for (;;) {
    uint32_t x = random_bits(rng, fmt);
    if (!fmt.is_float() || !decode(x, fmt).is_special())
      return x;
  }
}

uint32_t make_fp(const ScalarFormat& fmt, bool negative, uint32_t exp, uint32_t man) {
  return (uint32_t(negative) << (fmt.total_bits - 1)) | (exp << fmt.man_bits) |
         (man & ((1u << fmt.man_bits) - 1));
}

uint32_t max_finite(const ScalarFormat& fmt) {
  if (fmt.kind == FormatKind::FP8)
    return make_fp(fmt, false, fmt.exp_max(), (1u << fmt.man_bits) - 2);
  return make_fp(fmt, false, fmt.exp_max() - 1, (1u << fmt.man_bits) - 1);
}

uint32_t random_with_exp(std::mt19937_64& rng, const ScalarFormat& fmt, uint32_t exp) {
  uint32_t x = make_fp(fmt, rng() & 1, exp, uint32_t(rng()));
  if (decode(x, fmt).is_special())
    x = make_fp(fmt, rng() & 1, exp, 0);
  return x;
}

uint32_t flip_sign(uint32_t bits, const ScalarFormat& fmt) {
  return bits ^ (1u << (fmt.total_bits - 1));
}

std::vector<uint32_t> pack_lanes(const std::vector<uint32_t>& lanes, const FedpConfig& cfg) {
  const unsigned per_word = cfg.mul_format.lanes_per_word();
  std::vector<uint32_t> words(cfg.words_per_operand(), 0);
  for (size_t i = 0; i < lanes.size(); ++i)
    words[i / per_word] |= (lanes[i] & cfg.mul_format.lane_mask()) << ((i % per_word) * cfg.mul_format.total_bits);
  return words;
}

int64_t int_lane_value(uint32_t bits, const ScalarFormat& fmt) {
  return decode(bits, fmt).int_value;
}

void fill_integer(const FedpConfig& cfg, CaseClass cls, std::mt19937_64& rng,
                  std::vector<uint32_t>& a, std::vector<uint32_t>& b, uint32_t& c) {
  const ScalarFormat& fmt = cfg.mul_format;
  const unsigned lanes = cfg.lanes_per_operand();
  const uint32_t lo = fmt.is_signed ? (1u << (fmt.total_bits - 1)) : 0;     // most negative pattern
  const uint32_t hi = fmt.is_signed ? lo - 1 : fmt.lane_mask();           // most positive pattern
  for (unsigned i = 0; i < lanes; ++i) {
    a[i] = random_bits(rng, fmt);
    b[i] = random_bits(rng, fmt);
  }
  c = uint32_t(rng());

  auto exact_products = [&] {
    int64_t sum = 0;
    for (unsigned i = 0; i < lanes; ++i)
      sum += int_lane_value(a[i], fmt) * int_lane_value(b[i], fmt);
    return sum;
  };

  switch (cls) {
  case CaseClass::Uniform:
  case CaseClass::Special:
    break;
  case CaseClass::Cancellation:
    if (fmt.is_signed) {
      for (unsigned i = 0; i + 1 < lanes; i += 2) {
        int64_t v = std::max<int64_t>(int_lane_value(a[i], fmt), -127);
        a[i] = uint32_t(v) & fmt.lane_mask();
        a[i + 1] = uint32_t(-v) & fmt.lane_mask();
        b[i + 1] = b[i];
      }
    }
    // the addend cancels whatever is left, up to a small residue
    c = uint32_t(-exact_products() + int64_t(rng() % 7) - 3);
    break;
  case CaseClass::Spread:
  case CaseClass::Boundary: {
    const uint32_t picks[] = {lo, hi, 0, 1, fmt.lane_mask()};
    for (unsigned i = 0; i < lanes; ++i) {
      a[i] = picks[rng() % 5];
      b[i] = picks[rng() % 5];
    }
    const uint32_t addends[] = {0x7fffffffu, 0x80000000u, 0x01ffffffu, 0x02000000u,
                                0xfe000000u, 0xffffffffu, 0u};
    c = addends[rng() % 7];
    // push the sum across the INT32 wrap point
    if (rng() & 1)
      c = uint32_t(0x7fffffff - exact_products() + 1 + int64_t(rng() % 3));
    break;
  }
  }
}

void fill_float(const FedpConfig& cfg, CaseClass cls, std::mt19937_64& rng,
                std::vector<uint32_t>& a, std::vector<uint32_t>& b, uint32_t& c) {
  const ScalarFormat& fmt = cfg.mul_format;
  const unsigned lanes = cfg.lanes_per_operand();
  for (unsigned i = 0; i < lanes; ++i) {
    a[i] = random_finite(rng, fmt);
    b[i] = random_finite(rng, fmt);
  }
  c = random_finite(rng, kFP32);

  switch (cls) {
  case CaseClass::Uniform:
    break;
  case CaseClass::Cancellation: {
    // neighbouring lanes nearly cancel: same magnitudes, opposite signs, a
    // few low mantissa bits perturbed on one side
    for (unsigned i = 0; i + 1 < lanes; i += 2) {
      a[i + 1] = flip_sign(a[i], fmt);
      b[i + 1] = b[i] ^ (uint32_t(rng()) & 3u);
      if (decode(b[i + 1], fmt).is_special())
        b[i + 1] = b[i];
    }
    // addend is zero or comparable to the first product
    if (rng() & 1) {
      c = 0;
    } else {
      DecodedScalar da = decode(a[0], fmt), db = decode(b[0], fmt);
      int32_t e = int32_t(da.biased_exp) + int32_t(db.biased_exp) - 2 * fmt.bias + 127;
      e = std::clamp(e + int32_t(rng() % 5) - 2, 1, 254);
      c = make_fp(kFP32, rng() & 1, uint32_t(e), uint32_t(rng()));
    }
    break;
  }
  case CaseClass::Spread: {
    // exponents alternate between the top and bottom of the range
    const uint32_t top = fmt.kind == FormatKind::FP8 ? fmt.exp_max() : fmt.exp_max() - 1;
    for (unsigned i = 0; i < lanes; ++i) {
      bool high = (i + rng()) & 1;
      uint32_t exp = high ? top - uint32_t(rng() % 2) : 1 + uint32_t(rng() % 2);
      a[i] = random_with_exp(rng, fmt, exp);
      b[i] = random_with_exp(rng, fmt, high ? top : 1);
    }
    uint32_t c_exp = uint32_t(rng() % 3 == 0 ? 1 + rng() % 8 : 100 + rng() % 60);
    c = make_fp(kFP32, rng() & 1, c_exp, uint32_t(rng()));
    break;
  }
  case CaseClass::Special: {
    const bool has_inf = fmt.kind != FormatKind::FP8;
    auto special_lane = [&] {
      bool neg = rng() & 1;
      if (has_inf && (rng() & 1))
        return make_fp(fmt, neg, fmt.exp_max(), 0);
      return make_fp(fmt, neg, fmt.exp_max(), (1u << fmt.man_bits) - 1);
    };
    unsigned injections = 1 + unsigned(rng() % 2);
    for (unsigned k = 0; k < injections; ++k) {
      unsigned lane = unsigned(rng() % lanes);
      (rng() & 1 ? a : b)[lane] = special_lane();
    }
    if (rng() % 4 == 0)
      c = (rng() & 1) ? kPosInf32 : kNegInf32;
    break;
  }
  case CaseClass::Boundary: {
    const uint32_t man_ones = (1u << fmt.man_bits) - 1;
    const uint32_t picks[] = {
        0,                                 // zero
        1,                                 // smallest subnormal
        man_ones,                          // largest subnormal
        make_fp(fmt, false, 1, 0),         // smallest normal
        max_finite(fmt),
        make_fp(fmt, false, uint32_t(fmt.bias), 0), // 1.0
        make_fp(fmt, false, uint32_t(fmt.bias), 1), // next above 1.0
    };
    for (unsigned i = 0; i < lanes; ++i) {
      a[i] = picks[rng() % 7] | (rng() & 1 ? 1u << (fmt.total_bits - 1) : 0);
      b[i] = picks[rng() % 7] | (rng() & 1 ? 1u << (fmt.total_bits - 1) : 0);
    }
    const uint32_t addends[] = {0u, 0x80000000u, 0x00000001u, 0x00800000u,
                                0x7f7fffffu, 0xff7fffffu, 0x3f800000u, 0x00ffffffu};
    c = addends[rng() % 8];
    break;
  }
  }
}

} // namespace

TestVectorRecord generate_record(const FedpConfig& cfg, CaseClass cls, std::mt19937_64& rng) {
  if (!case_class_supported(cls, cfg.mul_format))
    throw std::invalid_argument(fmt::format("case class '{}' is not available for {}",
                                            case_class_name(cls), format_name(cfg.mul_format.kind)));
  const unsigned lanes = cfg.lanes_per_operand();
  std::vector<uint32_t> a(lanes), b(lanes);
  uint32_t c = 0;
  if (cfg.is_integer())
    fill_integer(cfg, cls, rng, a, b, c);
  else
    fill_float(cfg, cls, rng, a, b, c);

  TestVectorRecord rec;
  rec.a_words = pack_lanes(a, cfg);
  rec.b_words = pack_lanes(b, cfg);
  rec.c_word = c;
  rec.case_class = cls;
  rec.expected = oracle_expected(cfg, rec.a_words, rec.b_words, rec.c_word);
  return rec;
}

VectorFile generate_vectors(const FedpConfig& cfg, size_t count, uint64_t seed,
                            const std::vector<CaseClass>& classes) {
  cfg.validate();
  if (classes.empty())
    throw std::invalid_argument("generate_vectors: no case classes selected");
  VectorFile file;
  file.cfg = cfg;
  file.seed = seed;
  file.classes = classes;
  file.records.reserve(count);
  std::mt19937_64 rng(seed);
  for (size_t i = 0; i < count; ++i)
    file.records.push_back(generate_record(cfg, classes[i % classes.size()], rng));
  return file;
}

static std::string hex_words(const std::vector<uint32_t>& words) {
  std::string out;
  for (size_t i = 0; i < words.size(); ++i)
    out += fmt::format("{}{:08x}", i ? "," : "", words[i]);
  return out;
}

void write_vector_file(std::ostream& os, const VectorFile& file) {
  json header;
  header["format"] = format_name(file.cfg.mul_format.kind);
  header["n"] = file.cfg.n_elements;
  header["subnormal_flush"] = file.cfg.subnormal_flush;
  header["seed"] = file.seed;
  header["count"] = file.records.size();
  std::vector<std::string> classes;
  for (auto cls : file.classes)
    classes.emplace_back(case_class_name(cls));
  header["classes"] = classes;
  os << header.dump() << '\n';
  for (const auto& r : file.records) {
    os << fmt::format("a={} b={} c={:08x} expected={:08x} class={}\n", hex_words(r.a_words),
                      hex_words(r.b_words), r.c_word, r.expected, case_class_name(r.case_class));
  }
}

namespace {

uint32_t parse_hex_word(std::string_view text, size_t line_no) {
  if (text.size() != 8)
    throw VectorFileError(line_no, fmt::format("expected 8 hex digits, got '{}'", text));
  uint32_t v = 0;
  for (char ch : text) {
    int d;
    if (ch >= '0' && ch <= '9')
      d = ch - '0';
    else if (ch >= 'a' && ch <= 'f')
      d = ch - 'a' + 10;
    else if (ch >= 'A' && ch <= 'F')
      d = ch - 'A' + 10;
    else
      throw VectorFileError(line_no, fmt::format("bad hex digit in '{}'", text));
    v = (v << 4) | uint32_t(d);
  }
  return v;
}

std::vector<uint32_t> parse_hex_list(std::string_view text, size_t line_no) {
  std::vector<uint32_t> out;
  size_t start = 0;
  for (;;) {
    size_t comma = text.find(',', start);
    out.push_back(parse_hex_word(text.substr(start, comma - start), line_no));
    if (comma == std::string_view::npos)
      break;
    start = comma + 1;
  }
  return out;
}

FedpConfig parse_header(const std::string& text, size_t line_no, VectorFile& file) {
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw VectorFileError(line_no, std::string("header is not valid JSON: ") + e.what());
  }
  try {
    auto fmt_name = header.at("format").get<std::string>();
    auto fmt = parse_format(fmt_name);
    if (!fmt || !fmt->is_packed())
      throw VectorFileError(line_no, "unsupported format '" + fmt_name + "'");
    FedpConfig cfg = FedpConfig::make(*fmt, header.at("n").get<unsigned>(),
                                      header.value("subnormal_flush", true));
    cfg.validate();
    file.seed = header.value("seed", uint64_t(0));
    for (const auto& name : header.value("classes", std::vector<std::string>{})) {
      auto cls = parse_case_class(name);
      if (!cls)
        throw VectorFileError(line_no, "unknown case class '" + name + "'");
      file.classes.push_back(*cls);
    }
    return cfg;
  } catch (const json::exception& e) {
    throw VectorFileError(line_no, std::string("bad header field: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw VectorFileError(line_no, e.what());
  }
}

} // namespace

VectorFile read_vector_file(std::istream& is) {
  VectorFile file;
  bool have_header = false;
  std::string line;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#')
      continue;
    if (!have_header) {
      file.cfg = parse_header(line, line_no, file);
      have_header = true;
      continue;
    }

    TestVectorRecord rec;
    bool seen_a = false, seen_b = false, seen_c = false, seen_expected = false;
    std::istringstream fields(line);
    std::string field;
    while (fields >> field) {
      auto eq = field.find('=');
      if (eq == std::string::npos)
        throw VectorFileError(line_no, "field '" + field + "' is not key=value");
      std::string_view key(field.data(), eq);
      std::string_view value(field.data() + eq + 1, field.size() - eq - 1);
      if (key == "a") {
        rec.a_words = parse_hex_list(value, line_no);
        seen_a = true;
      } else if (key == "b") {
        rec.b_words = parse_hex_list(value, line_no);
        seen_b = true;
      } else if (key == "c") {
        rec.c_word = parse_hex_word(value, line_no);
        seen_c = true;
      } else if (key == "expected") {
        rec.expected = parse_hex_word(value, line_no);
        seen_expected = true;
      } else if (key == "class") {
        auto cls = parse_case_class(value);
        if (!cls)
          throw VectorFileError(line_no, fmt::format("unknown case class '{}'", value));
        rec.case_class = *cls;
      } else {
        throw VectorFileError(line_no, fmt::format("unknown field '{}'", key));
      }
    }
    if (!seen_a || !seen_b || !seen_c || !seen_expected)
      throw VectorFileError(line_no, "record needs a, b, c and expected fields");
    const unsigned words = file.cfg.words_per_operand();
    if (rec.a_words.size() != words || rec.b_words.size() != words)
      throw VectorFileError(line_no, fmt::format("expected {} words per operand", words));
    file.records.push_back(std::move(rec));
  }
  return file;
}

uint64_t ulp_distance(uint32_t a, uint32_t b) {
  auto is_nan = [](uint32_t x) { return (x & 0x7f800000u) == 0x7f800000u && (x & 0x7fffffu); };
  if (is_nan(a) || is_nan(b))
    return (is_nan(a) && is_nan(b)) ? 0 : std::numeric_limits<uint64_t>::max();
  auto key = [](uint32_t x) -> int64_t {
    int64_t mag = int64_t(x & 0x7fffffffu);
    return (x >> 31) ? -mag : mag;
  };
  int64_t d = key(a) - key(b);
  return uint64_t(d < 0 ? -d : d);
}

ContractCheck check_contract(const FedpResult& result, uint32_t expected) {
  ContractCheck check;
  check.exact = result.result == expected;
  const PipelineTrace& t = result.trace;
  if (t.cfg.is_integer()) {
    check.pass = check.exact;
    check.ulp = check.exact ? 0 : std::numeric_limits<uint64_t>::max();
    return check;
  }
  check.ulp = ulp_distance(result.result, expected);
  if (check.ulp == 0)
    check.exact = true;   // NaN payloads and ±0 compare equal here
  check.lossless = t.stage1.special != SpecialResult::None || !t.stage2.any_sticky;
  check.pass = check.lossless ? check.exact : check.ulp <= 1;
  return check;
}

void RunSummary::add(const ContractCheck& check) {
  ++records;
  if (check.pass)
    ++passed;
  else
    ++failed;
  if (check.exact)
    ++exact;
  if (check.lossless) {
    ++lossless;
    if (check.exact)
      ++lossless_exact;
  }
  worst_ulp = std::max(worst_ulp, check.ulp);
}

FedpRequest make_request(const FedpConfig& cfg, const TestVectorRecord& rec) {
  return {cfg, rec.a_words, rec.b_words, rec.c_word};
}

std::string trace_to_json(const PipelineTrace& t) {
  auto hex = [](uint64_t v) { return fmt::format("0x{:x}", v); };
  json j;
  j["format"] = format_name(t.cfg.mul_format.kind);
  j["n"] = t.cfg.n_elements;
  j["acc_width"] = t.cfg.acc_width();
  j["guard_bits"] = t.cfg.guard_bits;
  j["presum_lane_pairs"] = t.cfg.presum_lane_pairs;

  auto lanes_json = [&](const std::vector<DecodedScalar>& lanes) {
    json arr = json::array();
    for (const auto& l : lanes) {
      json e;
      e["negative"] = l.negative;
      if (t.cfg.is_integer()) {
        e["value"] = l.int_value;
      } else {
        e["class"] = class_name(l.cls);
        e["biased_exp"] = l.biased_exp;
        e["significand"] = hex(l.significand);
      }
      arr.push_back(e);
    }
    return arr;
  };
  j["a_lanes"] = lanes_json(t.a_lanes);
  j["b_lanes"] = lanes_json(t.b_lanes);

  const Stage1Result& s1 = t.stage1;
  json stage1;
  if (t.cfg.is_integer()) {
    stage1["products"] = s1.int_products;
    json terms = json::array();
    for (auto v : s1.int_terms)
      terms.push_back(hex(v));
    stage1["terms25"] = terms;
    stage1["product_signs"] = s1.product_signs;
    stage1["addend_low25"] = hex(s1.addend_split.low25);
    stage1["addend_high7"] = hex(s1.addend_split.high7);
  } else {
    static const char* specials[] = {"none", "nan", "+inf", "-inf"};
    stage1["special"] = specials[int(s1.special)];
    json sig = json::array();
    for (auto v : s1.significand_products)
      sig.push_back(hex(v));
    stage1["significand_products"] = sig;
    stage1["lane_exponents"] = s1.lane_exponents;
    auto raw_json = [&](const RawProduct& p) {
      return json{{"negative", p.negative}, {"biased_exp", p.biased_exp},
                  {"magnitude", hex(p.magnitude)}, {"sticky", p.sticky}};
    };
    json products = json::array();
    for (const auto& p : s1.products)
      products.push_back(raw_json(p));
    stage1["products"] = products;
    stage1["addend"] = raw_json(s1.addend);
  }
  j["stage1"] = stage1;

  if (!t.cfg.is_integer() && s1.special == SpecialResult::None) {
    json stage2;
    stage2["max_exp"] = t.selection.max_exp;
    stage2["one_hot"] = t.selection.one_hot;
    stage2["shift_amounts"] = t.selection.shift_amounts;
    json aligned = json::array();
    for (auto v : t.stage2.terms)
      aligned.push_back(hex(v));
    stage2["aligned"] = aligned;
    stage2["sticky"] = t.stage2.sticky;
    j["stage2"] = stage2;
  }

  if (t.cfg.is_integer() || s1.special == SpecialResult::None) {
    j["stage3"] = {{"sum_vec", hex(t.stage3.csa.sum_vec)},
                   {"carry_vec", hex(t.stage3.csa.carry_vec)},
                   {"csa_levels", t.stage3.csa_levels},
                   {"raw_sum", hex(t.stage3.raw_sum)}};
  }
  if (!t.cfg.is_integer() && s1.special == SpecialResult::None) {
    j["stage4"] = {{"negative", t.stage4.negative},
                   {"lzc", t.stage4.lzc},
                   {"magnitude", hex(t.stage4.magnitude)},
                   {"unbiased_exp", t.stage4.unbiased_exp},
                   {"pre_round", hex(t.stage4.pre_round)},
                   {"round_up", t.stage4.round_up}};
  }
  j["result"] = fmt::format("{:08x}", t.result);
  return j.dump(2);
}

} // namespace fedp

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

// Test-vector generation, the vector file format, and the accuracy contract
// used to judge pipeline results against the oracle.
//
// Vector file layout (text, one item per line):
//
//   {"format":"fp16","n":4,"subnormal_flush":true,"seed":7,"count":2,"classes":["uniform"]}
//   a=3c003c00,3c003c00 b=3c003c00,3c003c00 c=00000000 expected=40800000 class=uniform
//   ...
//
// The first non-blank line is the JSON header. Each record names its fields;
// hex words are 8 digits, operand words are comma separated with word 0 first.
// Blank lines and lines starting with '#' are ignored. An empty file holds no
// records and needs no header.

#include "fedp/pipeline.h"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fedp {

enum class CaseClass { Uniform, Cancellation, Spread, Special, Boundary };

std::string_view case_class_name(CaseClass cls);
std::optional<CaseClass> parse_case_class(std::string_view name);
// Special-value vectors need NaN/Inf encodings, which integer formats lack.
bool case_class_supported(CaseClass cls, const ScalarFormat& fmt);

struct TestVectorRecord {
  std::vector<uint32_t> a_words;
  std::vector<uint32_t> b_words;
  uint32_t c_word = 0;
  uint32_t expected = 0;
  CaseClass case_class = CaseClass::Uniform;
};

struct VectorFile {
  FedpConfig cfg;
  uint64_t seed = 0;
  std::vector<CaseClass> classes;
  std::vector<TestVectorRecord> records;
};

// Oracle result for a request (exact_dot_fp / exact_dot_int over all lanes).
uint32_t oracle_expected(const FedpConfig& cfg, const std::vector<uint32_t>& a_words,
                         const std::vector<uint32_t>& b_words, uint32_t c_word);

TestVectorRecord generate_record(const FedpConfig& cfg, CaseClass cls, std::mt19937_64& rng);

// Records cycle through `classes` in order. Deterministic for a given seed.
// Throws std::invalid_argument for an unsupported configuration or class.
VectorFile generate_vectors(const FedpConfig& cfg, size_t count, uint64_t seed,
                            const std::vector<CaseClass>& classes);

void write_vector_file(std::ostream& os, const VectorFile& file);

struct VectorFileError : std::runtime_error {
  size_t line;
  VectorFileError(size_t line_no, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + what), line(line_no) {}
};

// Throws VectorFileError with the 1-based line number of the first problem.
VectorFile read_vector_file(std::istream& is);

// Distance between two FP32 patterns in units in the last place, on the
// ordered line where -0 and +0 coincide and ±Inf follow the largest finite
// values. Two NaNs are 0 apart; NaN against anything else is UINT64_MAX.
uint64_t ulp_distance(uint32_t a, uint32_t b);

// INT results must match bit for bit. FP results must match bit for bit when
// alignment dropped no bits (no sticky), and be within 1 ulp otherwise.
struct ContractCheck {
  bool pass = false;
  bool exact = false;
  bool lossless = true;
  uint64_t ulp = 0;
};

ContractCheck check_contract(const FedpResult& result, uint32_t expected);

struct RunSummary {
  size_t records = 0;
  size_t passed = 0;
  size_t failed = 0;
  size_t exact = 0;
  size_t lossless = 0;
  size_t lossless_exact = 0;
  uint64_t worst_ulp = 0;

  void add(const ContractCheck& check);
  bool ok() const { return failed == 0; }
  double exact_fraction() const { return records ? double(exact) / double(records) : 1.0; }
};

FedpRequest make_request(const FedpConfig& cfg, const TestVectorRecord& rec);

// JSON rendering of every stage of a trace, for --trace dumps.
std::string trace_to_json(const PipelineTrace& trace);

} // namespace fedp

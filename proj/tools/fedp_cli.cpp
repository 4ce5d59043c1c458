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

// fedp_cli gen  --format fp16 --n 4 --count 100 --seed 7 [--class uniform ...] [-o FILE]
// fedp_cli run  FILE [--trace] [--report FILE.csv] [--guard-bits G] [--presum-pairs]
// fedp_cli perf [--flops F --latency L --fmax HZ | --baselines] [--csv FILE]
//
// Exit codes: 0 success, 1 contract violation, 2 usage or input error.

#include "fedp/perf.h"
#include "fedp/vectors.h"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>

using namespace fedp;

namespace {

struct GenOptions {
  std::string format = "fp16";
  unsigned n = 4;
  size_t count = 100;
  uint64_t seed = 1;
  std::vector<std::string> classes{"uniform"};
  bool no_flush = false;
  std::string output;
};

struct RunOptions {
  std::string input;
  bool trace = false;
  std::string report;
  unsigned guard_bits = kDefaultGuardBits;
  bool presum_pairs = false;
};

struct PerfOptions {
  double flops = 32;
  double latency = 4;
  double fmax = 306.6e6;
  bool baselines = false;
  std::string csv;
};

int cmd_gen(const GenOptions& opt) {
  auto fmt_desc = parse_format(opt.format);
  if (!fmt_desc || !fmt_desc->is_packed()) {
    std::cerr << "gen: unsupported multiplier format '" << opt.format << "'\n";
    return 2;
  }
  std::vector<CaseClass> classes;
  for (const auto& name : opt.classes) {
    auto cls = parse_case_class(name);
    if (!cls) {
      std::cerr << "gen: unknown case class '" << name << "'\n";
      return 2;
    }
    classes.push_back(*cls);
  }

  VectorFile file;
  try {
    FedpConfig cfg = FedpConfig::make(*fmt_desc, opt.n, !opt.no_flush);
    file = generate_vectors(cfg, opt.count, opt.seed, classes);
  } catch (const std::invalid_argument& e) {
    std::cerr << "gen: " << e.what() << '\n';
    return 2;
  }

  if (opt.output.empty() || opt.output == "-") {
    write_vector_file(std::cout, file);
  } else {
    std::ofstream os(opt.output);
    if (!os) {
      std::cerr << "gen: cannot open " << opt.output << '\n';
      return 2;
    }
    write_vector_file(os, file);
  }
  return 0;
}

int cmd_run(const RunOptions& opt) {
  std::ifstream is(opt.input);
  if (!is) {
    std::cerr << "run: cannot open " << opt.input << '\n';
    return 2;
  }
  VectorFile file;
  try {
    file = read_vector_file(is);
  } catch (const VectorFileError& e) {
    std::cerr << "run: " << opt.input << ": " << e.what() << '\n';
    return 2;
  }

  FedpConfig cfg = file.cfg;
  cfg.guard_bits = opt.guard_bits;
  cfg.presum_lane_pairs = opt.presum_pairs;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    std::cerr << "run: " << e.what() << '\n';
    return 2;
  }

  std::ofstream report;
  if (!opt.report.empty()) {
    report.open(opt.report);
    if (!report) {
      std::cerr << "run: cannot open " << opt.report << '\n';
      return 2;
    }
    report << "index,class,expected,actual,lossless,ulp,status\n";
  }

  RunSummary summary;
  for (size_t i = 0; i < file.records.size(); ++i) {
    const auto& rec = file.records[i];
    FedpResult res = fedp_execute(make_request(cfg, rec));
    ContractCheck check = check_contract(res, rec.expected);
    summary.add(check);
    if (report.is_open()) {
      std::string ulp = check.ulp == UINT64_MAX ? "inf" : std::to_string(check.ulp);
      report << fmt::format("{},{},{:08x},{:08x},{},{},{}\n", i, case_class_name(rec.case_class),
                            rec.expected, res.result, check.lossless ? 1 : 0, ulp,
                            check.pass ? "pass" : "FAIL");
    }
    if (!check.pass) {
      std::cerr << fmt::format("record {}: expected {:08x} got {:08x}\n", i, rec.expected, res.result);
      if (opt.trace)
        std::cerr << trace_to_json(res.trace) << '\n';
    }
  }

  std::cout << fmt::format("format={} n={} records={} passed={} failed={}\n",
                           format_name(cfg.mul_format.kind), cfg.n_elements, summary.records,
                           summary.passed, summary.failed);
  if (!cfg.is_integer()) {
    std::cout << fmt::format("bit_exact_fraction={:.6f} lossless={} lossless_exact={} worst_ulp={}\n",
                             summary.exact_fraction(), summary.lossless, summary.lossless_exact,
                             summary.worst_ulp == UINT64_MAX ? std::string("inf")
                                                             : std::to_string(summary.worst_ulp));
  }
  std::cout << (summary.ok() ? "PASS" : "FAIL") << '\n';
  return summary.ok() ? 0 : 1;
}

int cmd_perf(const PerfOptions& opt) {
  perf::BackendSpec proposed{"proposed", opt.latency, opt.fmax, opt.flops};
  if (opt.baselines)
    proposed = perf::proposed_n4_defaults();
  try {
    perf::validate(proposed);
  } catch (const std::invalid_argument& e) {
    std::cerr << "perf: " << e.what() << '\n';
    return 2;
  }

  std::vector<perf::ThroughputRow> rows{perf::evaluate(proposed)};
  if (opt.baselines) {
    // baseline latencies at the same clock; their own Fmax values are not published
    rows.push_back(perf::evaluate({"hardfloat", 13, proposed.fmax_hz, proposed.flops_per_issue}));
    rows.push_back(perf::evaluate({"xilinx_dsp", 42, proposed.fmax_hz, proposed.flops_per_issue}));
  }
  std::cout << perf::format_table(rows);
  if (!opt.csv.empty()) {
    std::ofstream os(opt.csv);
    if (!os) {
      std::cerr << "perf: cannot open " << opt.csv << '\n';
      return 2;
    }
    os << perf::format_csv(rows);
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bit-accurate fused dot product model: vector generation, differential runs, throughput"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate test vectors with oracle-computed expectations");
  gen_cmd->add_option("--format", gen.format, "Multiplier format: fp16 bf16 fp8 bf8 int8 uint4")
      ->required();
  gen_cmd->add_option("--n", gen.n, "Dot-product elements (4, 8, 16, 32)")->required();
  gen_cmd->add_option("--count", gen.count, "Number of records")->required();
  gen_cmd->add_option("--seed", gen.seed, "RNG seed")->required();
  gen_cmd->add_option("--class", gen.classes,
                      "Case classes, cycled per record: uniform cancellation spread special boundary");
  gen_cmd->add_flag("--no-flush", gen.no_flush, "Keep subnormal inputs instead of flushing to zero");
  gen_cmd->add_option("-o,--output", gen.output, "Output file (default stdout)");

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run a vector file through the pipeline model");
  run_cmd->add_option("file", run.input, "Vector file")->required();
  run_cmd->add_flag("--trace", run.trace, "Dump the pipeline trace of failing records to stderr");
  run_cmd->add_option("--report", run.report, "Write a per-record CSV report");
  run_cmd->add_option("--guard-bits", run.guard_bits, "Accumulator fraction guard bits");
  run_cmd->add_flag("--presum-pairs", run.presum_pairs,
                    "FP8/BF8: sum lane pairs into one 25-bit term before accumulation");

  PerfOptions perf_opt;
  auto* perf_cmd = app.add_subcommand("perf", "Single-cycle and filled-pipeline throughput");
  perf_cmd->add_option("--flops", perf_opt.flops, "FLOPs completed per issue");
  perf_cmd->add_option("--latency", perf_opt.latency, "Pipeline latency in cycles");
  perf_cmd->add_option("--fmax", perf_opt.fmax, "Clock frequency in Hz");
  perf_cmd->add_flag("--baselines", perf_opt.baselines,
                     "32 FLOPs, 4 cycles, 306.6 MHz plus baseline latencies");
  perf_cmd->add_option("--csv", perf_opt.csv, "Also write the table as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*gen_cmd)
    return cmd_gen(gen);
  if (*run_cmd)
    return cmd_run(run);
  return cmd_perf(perf_opt);
}

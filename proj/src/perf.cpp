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

#include "fedp/perf.h"

#include <fmt/format.h>

#include <stdexcept>

namespace fedp::perf {

double tcu_flops_per_issue(unsigned fedp_units, unsigned elements_per_fedp) {
  return 2.0 * fedp_units * elements_per_fedp;
}

BackendSpec proposed_n4_defaults() {
  return {"proposed", 4, 306.6e6, tcu_flops_per_issue(4, 4)};
}

void validate(const BackendSpec& spec) {
  if (!(spec.latency_cycles > 0) || !(spec.fmax_hz > 0) || !(spec.flops_per_issue > 0))
    throw std::invalid_argument("perf: latency, fmax and flops must all be positive");
}

double single_cycle_throughput(const BackendSpec& spec) {
  if (!(spec.latency_cycles > 0))
    throw std::invalid_argument("perf: latency must be positive");
  return spec.flops_per_issue / spec.latency_cycles * spec.fmax_hz;
}

double filled_pipeline_throughput(const BackendSpec& spec) {
  return spec.flops_per_issue * spec.fmax_hz;
}

ThroughputRow evaluate(const BackendSpec& spec) {
  return {spec, single_cycle_throughput(spec) / 1e9, filled_pipeline_throughput(spec) / 1e9};
}

std::string format_table(const std::vector<ThroughputRow>& rows) {
  std::string out = fmt::format("{:<12} {:>8} {:>10} {:>8} {:>20} {:>14}\n", "backend", "flops",
                                "fmax_mhz", "latency", "single_cycle_gflops", "filled_gflops");
  for (const auto& r : rows) {
    out += fmt::format("{:<12} {:>8g} {:>10.1f} {:>8g} {:>20.4f} {:>14.4f}\n", r.spec.name,
                       r.spec.flops_per_issue, r.spec.fmax_hz / 1e6, r.spec.latency_cycles,
                       r.single_cycle_gflops, r.filled_gflops);
  }
  return out;
}

std::string format_csv(const std::vector<ThroughputRow>& rows) {
  std::string out = "backend,flops_per_issue,fmax_hz,latency_cycles,single_cycle_gflops,filled_gflops\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{:g},{:g},{:g},{:.6f},{:.6f}\n", r.spec.name, r.spec.flops_per_issue,
                       r.spec.fmax_hz, r.spec.latency_cycles, r.single_cycle_gflops,
                       r.filled_gflops);
  }
  return out;
}

} // namespace fedp::perf

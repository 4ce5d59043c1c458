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

#include <string>
#include <vector>

namespace fedp::perf {

struct BackendSpec {
  std::string name;
  double latency_cycles = 0;
  double fmax_hz = 0;
  double flops_per_issue = 0;
};

// FLOPs per issue of a TCU built from a grid of FEDP units, counting one
// multiply and one add per dot-product element.
double tcu_flops_per_issue(unsigned fedp_units, unsigned elements_per_fedp);

// 2x2 grid of four-element units at 306.6 MHz with 4-cycle latency.
BackendSpec proposed_n4_defaults();

// (FLOPs / latency) * Fmax. Throws std::invalid_argument for a non-positive latency.
double single_cycle_throughput(const BackendSpec& spec);

// FLOPs * Fmax; one issue completes every cycle once the pipeline is full.
double filled_pipeline_throughput(const BackendSpec& spec);

// Throws std::invalid_argument unless every field is positive.
void validate(const BackendSpec& spec);

struct ThroughputRow {
  BackendSpec spec;
  double single_cycle_gflops = 0;
  double filled_gflops = 0;
};

ThroughputRow evaluate(const BackendSpec& spec);

std::string format_table(const std::vector<ThroughputRow>& rows);
std::string format_csv(const std::vector<ThroughputRow>& rows);

} // namespace fedp::perf

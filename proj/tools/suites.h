// Copyright 2026 The MoEC Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Self-check suites shared by the CLI and the acceptance tests.

#ifndef MOEC_TOOLS_SUITES_H_
#define MOEC_TOOLS_SUITES_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace moec::tools {

struct SuiteLine {
  std::string name;
  std::size_t cases = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::size_t worst_case = 0;  // index of the case holding max_error
  std::string detail;          // free text about the worst case

  bool passed() const { return max_error < tolerance; }
};

inline constexpr double kGradientTolerance = 1e-4;

/// Deliberate corruptions for exercising the gradient suite.
enum class GradientFault { kNone, kClusteringSign };

/// Central-difference checks at `points` random points for: balance loss,
/// clustering loss with mu = 0 and mu = 1 (all w.r.t. routing logits, about a
/// fifth of the points near intra-cluster uniformity, some under cluster-level
/// masks) and the full training objective w.r.t. every parameter of a small
/// model.
std::vector<SuiteLine> run_gradient_suite(std::size_t points, std::uint64_t seed,
                                          GradientFault fault = GradientFault::kNone);

/// Compares library routines with the plain reference implementations on
/// `trials` random cases each, plus the fixed closed-form loss values.
std::vector<SuiteLine> run_oracle_suite(std::size_t trials, std::uint64_t seed);

}  // namespace moec::tools

#endif  // MOEC_TOOLS_SUITES_H_

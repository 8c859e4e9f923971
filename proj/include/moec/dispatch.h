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

#ifndef MOEC_DISPATCH_H_
#define MOEC_DISPATCH_H_

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "moec/cluster_config.h"
#include "moec/dropout.h"
#include "moec/gating.h"
#include "moec/matrix.h"

namespace moec {

inline constexpr double kDefaultCapacityFactor = 2.0;

/// Capacity-limited top-1 token assignment.
struct DispatchResult {
  static constexpr std::size_t kOverflow = std::numeric_limits<std::size_t>::max();

  std::vector<std::size_t> assignment;  // expert id or kOverflow, per token
  std::vector<double> gate;             // gate value of the chosen expert, per token
  std::vector<std::size_t> counts;      // tokens accepted per expert
  std::size_t overflow = 0;
  std::size_t capacity = 0;

  std::size_t tokens() const noexcept { return assignment.size(); }
  bool overflowed(std::size_t token) const { return assignment[token] == kOverflow; }
};

/// ceil(capacity_factor * tokens / experts).
std::size_t expert_capacity(double capacity_factor, std::size_t tokens, std::size_t experts);

/// Walks tokens in batch order; a token whose chosen expert already holds
/// `capacity` tokens overflows. `selection` must hold exactly one unmasked
/// expert per token.
DispatchResult dispatch(const Matrix& gates, const Selection& selection, double capacity_factor,
                        const ExpertMask& mask);

/// Token shares aggregated over one or more dispatch results.
struct ClusterFractions {
  std::vector<double> expert;          // Count_i / T
  std::vector<double> cluster;         // tokens in cluster c / T
  std::vector<double> within_cluster;  // Count_i / tokens in i's cluster (0 if none)
  std::size_t tokens = 0;
};

ClusterFractions cluster_fractions(std::span<const DispatchResult> results,
                                   const ClusterConfig& cfg);
ClusterFractions cluster_fractions(const DispatchResult& result, const ClusterConfig& cfg);

}  // namespace moec

#endif  // MOEC_DISPATCH_H_

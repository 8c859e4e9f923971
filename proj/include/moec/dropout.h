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

// Expert dropout at the routing stage. A dropped expert is removed from the
// candidate list: it gets no routing probability and no tokens for the step.
// Nothing else about the expert changes.

#ifndef MOEC_DROPOUT_H_
#define MOEC_DROPOUT_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "moec/cluster_config.h"

namespace moec {

enum class DropoutLevel { kNone, kCluster, kGlobal };

std::string_view to_string(DropoutLevel level);
/// Accepts "none", "cluster", "global". Throws ContractError otherwise.
DropoutLevel parse_dropout_level(std::string_view text);

/// Candidate list for one routing step. `keep[i]` is true when expert i
/// participates.
struct ExpertMask {
  std::vector<bool> keep;
  std::uint64_t seed = 0;
  DropoutLevel level = DropoutLevel::kNone;
  double rate = 0.0;

  std::size_t size() const noexcept { return keep.size(); }
  bool active(std::size_t expert) const { return keep[expert]; }
  std::size_t survivors() const;
  std::vector<std::size_t> survivor_ids() const;
  /// Surviving ids inside one cluster, ascending.
  std::vector<std::size_t> cluster_survivors(const ClusterConfig& cfg,
                                             std::size_t cluster) const;
};

/// Drops exactly floor(rate * L) experts inside every cluster, chosen
/// uniformly and independently per cluster.
ExpertMask cluster_level_mask(const ClusterConfig& cfg, double rate, std::uint64_t seed);

/// Drops exactly floor(rate * N) experts chosen uniformly from all N.
ExpertMask global_level_mask(std::size_t num_experts, double rate, std::uint64_t seed);

/// All experts participate. Used at inference.
ExpertMask inference_mask(std::size_t num_experts);

/// Dispatches on `level`; kNone yields the inference mask.
ExpertMask make_mask(DropoutLevel level, const ClusterConfig& cfg, double rate,
                     std::uint64_t seed);

}  // namespace moec

#endif  // MOEC_DROPOUT_H_

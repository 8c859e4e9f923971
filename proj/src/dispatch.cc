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

#include "moec/dispatch.h"

#include <cmath>
#include <string>

#include "moec/errors.h"

namespace moec {

std::size_t expert_capacity(double capacity_factor, std::size_t tokens, std::size_t experts) {
  if (!(capacity_factor > 0.0)) throw ContractError("capacity factor must be positive");
  if (experts == 0) throw ContractError("capacity of zero experts");
  return static_cast<std::size_t>(
      std::ceil(capacity_factor * static_cast<double>(tokens) / static_cast<double>(experts)));
}

DispatchResult dispatch(const Matrix& gates, const Selection& selection, double capacity_factor,
                        const ExpertMask& mask) {
  const std::size_t tokens = gates.rows();
  const std::size_t experts = gates.cols();
  if (selection.size() != tokens || mask.size() != experts) {
    throw DimensionError("dispatch: selection/mask do not match gates " + gates.shape_string());
  }
  DispatchResult result;
  result.capacity = expert_capacity(capacity_factor, tokens, experts);
  result.assignment.assign(tokens, DispatchResult::kOverflow);
  result.gate.assign(tokens, 0.0);
  result.counts.assign(experts, 0);
  for (std::size_t t = 0; t < tokens; ++t) {
    if (selection[t].size() != 1) {
      throw ContractError("dispatch expects exactly one selected expert per token");
    }
    const std::size_t e = selection[t].front();
    if (e >= experts || !mask.active(e)) {
      throw ContractError("token " + std::to_string(t) + " selected masked expert " +
                          std::to_string(e));
    }
    result.gate[t] = gates(t, e);
    if (result.counts[e] >= result.capacity) {
      ++result.overflow;
      continue;
    }
    result.assignment[t] = e;
    ++result.counts[e];
  }
  return result;
}

ClusterFractions cluster_fractions(std::span<const DispatchResult> results,
                                   const ClusterConfig& cfg) {
  const std::size_t n = cfg.num_experts();
  std::vector<std::size_t> counts(n, 0);
  ClusterFractions out;
  for (const DispatchResult& r : results) {
    if (r.counts.size() != n) throw DimensionError("dispatch result expert count mismatch");
    for (std::size_t e = 0; e < n; ++e) counts[e] += r.counts[e];
    out.tokens += r.tokens();
  }
  out.expert.assign(n, 0.0);
  out.cluster.assign(cfg.num_clusters(), 0.0);
  out.within_cluster.assign(n, 0.0);
  if (out.tokens == 0) return out;
  std::vector<std::size_t> per_cluster(cfg.num_clusters(), 0);
  for (std::size_t e = 0; e < n; ++e) per_cluster[cfg.cluster_of(e)] += counts[e];
  const auto total = static_cast<double>(out.tokens);
  for (std::size_t e = 0; e < n; ++e) {
    out.expert[e] = static_cast<double>(counts[e]) / total;
    const std::size_t in_cluster = per_cluster[cfg.cluster_of(e)];
    if (in_cluster > 0) {
      out.within_cluster[e] = static_cast<double>(counts[e]) / static_cast<double>(in_cluster);
    }
  }
  for (std::size_t c = 0; c < cfg.num_clusters(); ++c) {
    out.cluster[c] = static_cast<double>(per_cluster[c]) / total;
  }
  return out;
}

ClusterFractions cluster_fractions(const DispatchResult& result, const ClusterConfig& cfg) {
  return cluster_fractions(std::span<const DispatchResult>(&result, 1), cfg);
}

}  // namespace moec

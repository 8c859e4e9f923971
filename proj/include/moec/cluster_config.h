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

#ifndef MOEC_CLUSTER_CONFIG_H_
#define MOEC_CLUSTER_CONFIG_H_

#include <cstddef>

namespace moec {

/// Partition of N experts into m contiguous clusters of L = N / m experts.
/// Cluster c owns expert ids [c * L, (c + 1) * L).
class ClusterConfig {
 public:
  /// Throws ContractError unless num_clusters >= 1 and divides num_experts.
  ClusterConfig(std::size_t num_experts, std::size_t num_clusters);

  static ClusterConfig with_cluster_size(std::size_t num_experts, std::size_t cluster_size);

  std::size_t num_experts() const noexcept { return num_experts_; }
  std::size_t num_clusters() const noexcept { return num_clusters_; }
  std::size_t cluster_size() const noexcept { return num_experts_ / num_clusters_; }

  std::size_t cluster_of(std::size_t expert) const noexcept { return expert / cluster_size(); }
  std::size_t first_expert(std::size_t cluster) const noexcept {
    return cluster * cluster_size();
  }

  friend bool operator==(const ClusterConfig&, const ClusterConfig&) = default;

 private:
  std::size_t num_experts_;
  std::size_t num_clusters_;
};

}  // namespace moec

#endif  // MOEC_CLUSTER_CONFIG_H_

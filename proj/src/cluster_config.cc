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

#include "moec/cluster_config.h"

#include <string>

#include "moec/errors.h"

namespace moec {

ClusterConfig::ClusterConfig(std::size_t num_experts, std::size_t num_clusters)
    : num_experts_(num_experts), num_clusters_(num_clusters) {
  if (num_experts == 0) throw ContractError("cluster config needs at least one expert");
  if (num_clusters == 0) throw ContractError("cluster config needs at least one cluster");
  if (num_experts % num_clusters != 0) {
    throw ContractError("expert count " + std::to_string(num_experts) +
                        " is not divisible by cluster count " + std::to_string(num_clusters));
  }
}

ClusterConfig ClusterConfig::with_cluster_size(std::size_t num_experts,
                                               std::size_t cluster_size) {
  if (cluster_size == 0 || num_experts % cluster_size != 0) {
    throw ContractError("cluster size " + std::to_string(cluster_size) +
                        " does not divide expert count " + std::to_string(num_experts));
  }
  return ClusterConfig(num_experts, num_experts / cluster_size);
}

}  // namespace moec

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

#include "moec/dropout.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "moec/errors.h"

namespace moec {

std::string_view to_string(DropoutLevel level) {
  switch (level) {
    case DropoutLevel::kNone:
      return "none";
    case DropoutLevel::kCluster:
      return "cluster";
    case DropoutLevel::kGlobal:
      return "global";
  }
  return "none";
}

DropoutLevel parse_dropout_level(std::string_view text) {
  if (text == "none") return DropoutLevel::kNone;
  if (text == "cluster") return DropoutLevel::kCluster;
  if (text == "global") return DropoutLevel::kGlobal;
  throw ContractError("unknown dropout level '" + std::string(text) + "'");
}

std::size_t ExpertMask::survivors() const {
  return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
}

std::vector<std::size_t> ExpertMask::survivor_ids() const {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) ids.push_back(i);
  }
  return ids;
}

std::vector<std::size_t> ExpertMask::cluster_survivors(const ClusterConfig& cfg,
                                                       std::size_t cluster) const {
  if (cfg.num_experts() != keep.size()) {
    throw DimensionError("mask length does not match cluster config");
  }
  std::vector<std::size_t> ids;
  const std::size_t first = cfg.first_expert(cluster);
  for (std::size_t i = first; i < first + cfg.cluster_size(); ++i) {
    if (keep[i]) ids.push_back(i);
  }
  return ids;
}

namespace {

void check_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ContractError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
}

std::size_t drop_count(double rate, std::size_t population) {
  return static_cast<std::size_t>(std::floor(rate * static_cast<double>(population)));
}

// Marks `count` entries of [first, first + population) as dropped, uniformly
// without replacement (partial Fisher-Yates).
void drop_uniform(std::vector<bool>& keep, std::size_t first, std::size_t population,
                  std::size_t count, std::mt19937_64& rng) {
  std::vector<std::size_t> ids(population);
  std::iota(ids.begin(), ids.end(), first);
  for (std::size_t k = 0; k < count; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, population - 1);
    std::swap(ids[k], ids[pick(rng)]);
    keep[ids[k]] = false;
  }
}

}  // namespace

ExpertMask cluster_level_mask(const ClusterConfig& cfg, double rate, std::uint64_t seed) {
  check_rate(rate);
  const std::size_t per_cluster = drop_count(rate, cfg.cluster_size());
  ExpertMask mask{std::vector<bool>(cfg.num_experts(), true), seed, DropoutLevel::kCluster,
                  rate};
  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < cfg.num_clusters(); ++c) {
    drop_uniform(mask.keep, cfg.first_expert(c), cfg.cluster_size(), per_cluster, rng);
  }
  return mask;
}

ExpertMask global_level_mask(std::size_t num_experts, double rate, std::uint64_t seed) {
  check_rate(rate);
  if (num_experts == 0) throw ContractError("mask needs at least one expert");
  ExpertMask mask{std::vector<bool>(num_experts, true), seed, DropoutLevel::kGlobal, rate};
  std::mt19937_64 rng(seed);
  drop_uniform(mask.keep, 0, num_experts, drop_count(rate, num_experts), rng);
  return mask;
}

ExpertMask inference_mask(std::size_t num_experts) {
  return ExpertMask{std::vector<bool>(num_experts, true), 0, DropoutLevel::kNone, 0.0};
}

ExpertMask make_mask(DropoutLevel level, const ClusterConfig& cfg, double rate,
                     std::uint64_t seed) {
  switch (level) {
    case DropoutLevel::kCluster:
      return cluster_level_mask(cfg, rate, seed);
    case DropoutLevel::kGlobal:
      return global_level_mask(cfg.num_experts(), rate, seed);
    case DropoutLevel::kNone:
      break;
  }
  return inference_mask(cfg.num_experts());
}

}  // namespace moec

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

#include <gtest/gtest.h>

#include <cmath>

#include "moec/cluster_config.h"
#include "moec/errors.h"

namespace moec {
namespace {

TEST(ClusterConfigTest, Layout) {
  const ClusterConfig cfg(8, 2);
  EXPECT_EQ(cfg.cluster_size(), 4u);
  EXPECT_EQ(cfg.cluster_of(3), 0u);
  EXPECT_EQ(cfg.cluster_of(4), 1u);
  EXPECT_EQ(cfg.first_expert(1), 4u);
  EXPECT_EQ(ClusterConfig::with_cluster_size(16, 4), ClusterConfig(16, 4));
}

TEST(ClusterConfigTest, RejectsIndivisibleOrEmpty) {
  EXPECT_THROW(ClusterConfig(8, 3), ContractError);
  EXPECT_THROW(ClusterConfig(8, 0), ContractError);
  EXPECT_THROW(ClusterConfig(0, 1), ContractError);
}

TEST(ClusterMaskTest, HalfRateKeepsTwoPerCluster) {
  const ClusterConfig cfg(8, 2);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const ExpertMask m = cluster_level_mask(cfg, 0.5, seed);
    EXPECT_EQ(m.survivors(), 4u);
    EXPECT_EQ(m.cluster_survivors(cfg, 0).size(), 2u);
    EXPECT_EQ(m.cluster_survivors(cfg, 1).size(), 2u);
    EXPECT_EQ(m.level, DropoutLevel::kCluster);
  }
}

TEST(ClusterMaskTest, ZeroRateKeepsAll) {
  const ExpertMask m = cluster_level_mask(ClusterConfig(8, 2), 0.0, 3);
  EXPECT_EQ(m.keep, std::vector<bool>(8, true));
  const ExpertMask g = global_level_mask(8, 0.0, 3);
  EXPECT_EQ(g.keep, std::vector<bool>(8, true));
}

TEST(ClusterMaskTest, RateOutsideRangeIsRejected) {
  const ClusterConfig cfg(8, 2);
  EXPECT_THROW(cluster_level_mask(cfg, 1.0, 1), ContractError);
  EXPECT_THROW(cluster_level_mask(cfg, -0.1, 1), ContractError);
  EXPECT_THROW(global_level_mask(8, 1.0, 1), ContractError);
}

TEST(ClusterMaskTest, NeverEmptiesACluster) {
  for (const auto& [n, m] : {std::pair<std::size_t, std::size_t>{8, 2}, {16, 4}, {16, 2}}) {
    const ClusterConfig cfg(n, m);
    for (double rate : {0.25, 0.5, 0.75, 0.99}) {
      for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        const ExpertMask mask = cluster_level_mask(cfg, rate, seed);
        for (std::size_t c = 0; c < m; ++c) {
          ASSERT_FALSE(mask.cluster_survivors(cfg, c).empty()) << n << " " << m << " " << rate;
        }
      }
    }
  }
}

TEST(ClusterMaskTest, EachExpertDroppedAtRate) {
  const ClusterConfig cfg(8, 2);  // L = 4, gamma = 0.25 drops one per cluster
  std::vector<double> dropped(8, 0.0);
  constexpr int kSeeds = 10000;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    const ExpertMask m = cluster_level_mask(cfg, 0.25, seed);
    for (std::size_t e = 0; e < 8; ++e) dropped[e] += m.active(e) ? 0.0 : 1.0;
  }
  for (double d : dropped) EXPECT_NEAR(d / kSeeds, 0.25, 0.02);
}

TEST(ClusterMaskTest, DeterministicPerSeed) {
  const ClusterConfig cfg(16, 4);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    EXPECT_EQ(cluster_level_mask(cfg, 0.5, seed).keep, cluster_level_mask(cfg, 0.5, seed).keep);
    EXPECT_EQ(global_level_mask(16, 0.5, seed).keep, global_level_mask(16, 0.5, seed).keep);
  }
}

TEST(GlobalMaskTest, SurvivorCountIsForced) {
  for (std::size_t n : {4u, 8u, 16u, 9u}) {
    for (double rate : {0.1, 0.25, 0.5, 0.75, 0.9}) {
      const auto drop = static_cast<std::size_t>(std::floor(rate * static_cast<double>(n)));
      for (std::uint64_t seed = 0; seed < 100; ++seed) {
        EXPECT_EQ(global_level_mask(n, rate, seed).survivors(), n - drop);
      }
    }
  }
}

TEST(GlobalMaskTest, SomeSeedEmptiesACluster) {
  const ClusterConfig cfg(8, 2);
  bool found = false;
  for (std::uint64_t seed = 0; seed < 1000 && !found; ++seed) {
    const ExpertMask m = global_level_mask(8, 0.5, seed);
    found = m.cluster_survivors(cfg, 0).empty() || m.cluster_survivors(cfg, 1).empty();
  }
  EXPECT_TRUE(found);
}

TEST(InferenceMaskTest, AllTrueLevelNone) {
  for (std::size_t n : {1u, 4u, 64u}) {
    const ExpertMask m = inference_mask(n);
    EXPECT_EQ(m.keep, std::vector<bool>(n, true));
    EXPECT_EQ(m.level, DropoutLevel::kNone);
  }
  EXPECT_EQ(make_mask(DropoutLevel::kNone, ClusterConfig(4, 2), 0.5, 9).keep,
            std::vector<bool>(4, true));
}

TEST(DropoutLevelTest, ParseRoundTrip) {
  for (DropoutLevel l : {DropoutLevel::kNone, DropoutLevel::kCluster, DropoutLevel::kGlobal}) {
    EXPECT_EQ(parse_dropout_level(to_string(l)), l);
  }
  EXPECT_THROW(parse_dropout_level("local"), ContractError);
}

}  // namespace
}  // namespace moec

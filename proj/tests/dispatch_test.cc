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

#include <gtest/gtest.h>

#include <random>

#include "moec/errors.h"
#include "reference/reference.h"
#include "test_util.h"

namespace moec {
namespace {

using testing::random_matrix;

Selection top1(const std::vector<std::size_t>& ids) {
  Selection s;
  for (std::size_t id : ids) s.push_back({id});
  return s;
}

TEST(CapacityTest, Examples) {
  EXPECT_EQ(expert_capacity(2.0, 8, 4), 4u);
  EXPECT_EQ(expert_capacity(2.0, 64, 8), 16u);
  EXPECT_EQ(expert_capacity(1.0, 5, 4), 2u);
  EXPECT_EQ(expert_capacity(0.1, 1, 64), 1u);
}

TEST(CapacityTest, MatchesSmallestSufficientInteger) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 1000; ++trial) {
    const double cf = std::uniform_real_distribution<>(0.1, 4.0)(rng);
    const std::size_t t = 1 + rng() % 200, n = 1 + rng() % 64;
    EXPECT_EQ(expert_capacity(cf, t, n), reference::capacity(cf, t, n));
  }
}

TEST(DispatchTest, AllToOneExpertOverflowsHalf) {
  const Matrix gates(8, 4, 0.25);
  const DispatchResult r = dispatch(gates, top1(std::vector<std::size_t>(8, 0)), 2.0,
                                    inference_mask(4));
  EXPECT_EQ(r.capacity, 4u);
  EXPECT_EQ(r.counts, std::vector<std::size_t>({4, 0, 0, 0}));
  EXPECT_EQ(r.overflow, 4u);
  for (std::size_t t = 0; t < 8; ++t) EXPECT_EQ(r.overflowed(t), t >= 4);
}

TEST(DispatchTest, MatchesReplayAndKeepsInvariants) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 8, t = 1 + rng() % 40;
    const double cf = std::uniform_real_distribution<>(0.2, 3.0)(rng);
    ExpertMask mask = inference_mask(n);
    std::vector<std::size_t> choices(t);
    for (auto& c : choices) c = rng() % n;
    const Matrix gates = random_matrix(t, n, rng, 0, 1);
    const DispatchResult r = dispatch(gates, top1(choices), cf, mask);
    const reference::Replay want = reference::replay_dispatch(choices, n, r.capacity);
    EXPECT_EQ(r.capacity, reference::capacity(cf, t, n));
    EXPECT_EQ(r.counts, want.counts);
    EXPECT_EQ(r.overflow, want.overflow);
    std::size_t total = r.overflow;
    for (std::size_t e = 0; e < n; ++e) {
      EXPECT_LE(r.counts[e], r.capacity);
      total += r.counts[e];
    }
    EXPECT_EQ(total, t);
    for (std::size_t i = 0; i < t; ++i) {
      if (!r.overflowed(i)) {
        EXPECT_EQ(r.gate[i], gates(i, r.assignment[i]));
      }
    }
  }
}

TEST(DispatchTest, LargeCapacityFactorNeverOverflows) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 8, t = 1 + rng() % 40;
    std::vector<std::size_t> choices(t);
    for (auto& c : choices) c = rng() % n;
    const DispatchResult r = dispatch(Matrix(t, n, 0.5), top1(choices),
                                      static_cast<double>(n), inference_mask(n));
    EXPECT_EQ(r.overflow, 0u);
  }
}

TEST(DispatchTest, DeterministicForSameInput) {
  std::mt19937_64 rng(44);
  std::vector<std::size_t> choices(30);
  for (auto& c : choices) c = rng() % 4;
  const Matrix g = random_matrix(30, 4, rng, 0, 1);
  const DispatchResult a = dispatch(g, top1(choices), 1.0, inference_mask(4));
  const DispatchResult b = dispatch(g, top1(choices), 1.0, inference_mask(4));
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.counts, b.counts);
}

TEST(DispatchTest, MaskedSelectionIsRejected) {
  ExpertMask mask = inference_mask(3);
  mask.keep[1] = false;
  EXPECT_THROW(dispatch(Matrix(2, 3, 0.3), top1({0, 1}), 2.0, mask), ContractError);
  EXPECT_THROW(dispatch(Matrix(2, 3, 0.3), Selection({{0, 2}, {0}}), 2.0, inference_mask(3)),
               ContractError);
}

TEST(ClusterFractionsTest, WithinClusterSharesEven) {
  DispatchResult r;
  r.assignment = {0, 1, 2, 3, 0, 1, 2, 3};
  r.counts = {2, 2, 2, 2, 0, 0, 0, 0};
  const ClusterFractions f = cluster_fractions(r, ClusterConfig(8, 2));
  EXPECT_EQ(f.cluster, std::vector<double>({1.0, 0.0}));
  for (std::size_t e = 0; e < 4; ++e) EXPECT_EQ(f.within_cluster[e], 0.25);
  for (std::size_t e = 4; e < 8; ++e) EXPECT_EQ(f.within_cluster[e], 0.0);
}

TEST(ClusterFractionsTest, ClusterSharesExample) {
  DispatchResult r;
  r.assignment = {0, 1, 2, 3};
  r.counts = {1, 1, 1, 1};
  const ClusterFractions f = cluster_fractions(r, ClusterConfig(4, 2));
  EXPECT_EQ(f.cluster, std::vector<double>({0.5, 0.5}));
  EXPECT_EQ(f.expert, std::vector<double>({0.25, 0.25, 0.25, 0.25}));
}

TEST(ClusterFractionsTest, MatchesHistogramOverWindow) {
  std::mt19937_64 rng(45);
  const ClusterConfig cfg(8, 4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<DispatchResult> window(1 + rng() % 5);
    std::vector<std::size_t> all;
    for (DispatchResult& r : window) {
      std::vector<std::size_t> choices(1 + rng() % 30);
      for (auto& c : choices) c = rng() % 8;
      r = dispatch(Matrix(choices.size(), 8, 0.1), top1(choices), 1.0, inference_mask(8));
      for (std::size_t a : r.assignment) {
        all.push_back(a == DispatchResult::kOverflow ? reference::kOverflow : a);
      }
    }
    const ClusterFractions f = cluster_fractions(window, cfg);
    const reference::Vec want = reference::histogram(all, 8);
    EXPECT_EQ(f.tokens, all.size());
    for (std::size_t e = 0; e < 8; ++e) EXPECT_NEAR(f.expert[e], want[e], 1e-15);
    for (std::size_t c = 0; c < 4; ++c) {
      const double share = want[2 * c] + want[2 * c + 1];
      EXPECT_NEAR(f.cluster[c], share, 1e-15);
      if (share > 0) {
        EXPECT_NEAR(f.within_cluster[2 * c], want[2 * c] / share, 1e-15);
      }
    }
  }
}

}  // namespace
}  // namespace moec

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


#include "moec/gating.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "moec/cluster_config.h"
#include "moec/dropout.h"
#include "moec/errors.h"
#include "moec/grad_check.h"
#include "reference/reference.h"
#include "test_util.h"

namespace moec {
namespace {

using testing::MatrixNear;
using testing::random_matrix;

RouterParams plain_router(Matrix embeddings) {
  RouterParams p;
  p.expert_embeddings = std::move(embeddings);
  p.normalize = false;
  return p;
}

reference::Mat to_ref(const Matrix& m) {
  reference::Mat out(m.rows(), reference::Vec(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

Matrix from_ref(const reference::Mat& m) {
  Matrix out(m.size(), m.empty() ? 0 : m[0].size());
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = m[r][c];
  return out;
}

TEST(RoutingScoresTest, DotProductExample) {
  Tape tape;
  const RouterVars rv = bind_router(tape, plain_router(Matrix::from_rows({{1, 0}, {0, 1}})), false);
  Var s = routing_scores(tape.constant(Matrix::from_rows({{1, 0}})), rv, inference_mask(2));
  EXPECT_EQ(s.value(), Matrix::from_rows({{1, 0}}));
}

TEST(RoutingScoresTest, NormalizedScoreIsCosine) {
  Tape tape;
  RouterParams p;
  p.expert_embeddings = Matrix::from_rows({{1, 0}, {1, 1}});
  p.log_temperature = Matrix::scalar(0.0);
  p.normalize = true;
  const RouterVars rv = bind_router(tape, p, false);
  Var s = routing_scores(tape.constant(Matrix::from_rows({{2, 0}})), rv, inference_mask(2));
  EXPECT_NEAR(s.value()(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(s.value()(0, 1), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(RoutingScoresTest, MaskedExpertsGetSentinel) {
  Tape tape;
  const RouterVars rv = bind_router(tape, plain_router(Matrix(3, 2, 1.0)), false);
  ExpertMask mask = inference_mask(3);
  mask.keep[1] = false;
  Var s = routing_scores(tape.constant(Matrix(2, 2, 1.0)), rv, mask);
  EXPECT_EQ(s.value()(0, 1), kMaskedScore);
  EXPECT_EQ(s.value()(1, 1), kMaskedScore);
  EXPECT_EQ(s.value()(0, 0), 2.0);
}

TEST(RoutingScoresTest, DimensionMismatchThrows) {
  Tape tape;
  const RouterVars rv = bind_router(tape, plain_router(Matrix(3, 2, 1.0)), false);
  EXPECT_THROW(routing_scores(tape.constant(Matrix(2, 3)), rv, inference_mask(3)),
               DimensionError);
  EXPECT_THROW(routing_scores(tape.constant(Matrix(2, 2)), rv, inference_mask(4)),
               DimensionError);
}

TEST(RoutingScoresTest, MatchesPerTokenLoop) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    RouterParams p;
    p.expert_embeddings = random_matrix(5, 3, rng);
    p.projection = random_matrix(4, 3, rng);
    p.log_temperature = Matrix::scalar(0.3);
    p.normalize = trial % 2 == 0;
    const Matrix h = random_matrix(6, 4, rng);
    Tape tape;
    const RouterVars rv = bind_router(tape, p, false);
    const Matrix got = routing_scores(tape.constant(h), rv, inference_mask(5)).value();
    const Matrix want = from_ref(reference::scores(to_ref(h), to_ref(p.expert_embeddings),
                                                   to_ref(*p.projection), 0.3, p.normalize,
                                                   std::vector<bool>(5, true)));
    EXPECT_TRUE(MatrixNear(got, want, 1e-12));
  }
}

TEST(RoutingScoresTest, CosineScoresIgnoreTokenScale) {
  std::mt19937_64 rng(22);
  RouterParams p;
  p.expert_embeddings = random_matrix(4, 3, rng);
  p.projection = random_matrix(5, 3, rng);
  p.normalize = true;
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix h = random_matrix(3, 5, rng);
    Matrix scaled = h;
    const double lambda = std::uniform_real_distribution<>(0.1, 10.0)(rng);
    for (double& v : scaled.values()) v *= lambda;
    Tape tape;
    const RouterVars rv = bind_router(tape, p, false);
    EXPECT_TRUE(MatrixNear(routing_scores(tape.constant(h), rv, inference_mask(4)).value(),
                           routing_scores(tape.constant(scaled), rv, inference_mask(4)).value(),
                           1e-12));
  }
}

TEST(GateValuesTest, SoftmaxExamples) {
  Tape tape;
  Var uniform = gate_values(tape.constant(Matrix(1, 4, 0.0)), GatingKind::kSoftmax);
  EXPECT_TRUE(MatrixNear(uniform.value(), Matrix(1, 4, 0.25), 1e-15));
  Var two = gate_values(tape.constant(Matrix::from_rows({{1, 0}})), GatingKind::kSoftmax);
  EXPECT_NEAR(two.value()[0], 0.7311, 1e-4);
  EXPECT_NEAR(two.value()[1], 0.2689, 1e-4);
  EXPECT_NEAR(two.value()[0], std::exp(1.0) / (std::exp(1.0) + 1.0), 1e-15);
}

TEST(GateValuesTest, SigmoidAtZeroIsHalf) {
  Tape tape;
  Var g = gate_values(tape.constant(Matrix(2, 3, 0.0)), GatingKind::kSigmoid);
  EXPECT_TRUE(MatrixNear(g.value(), Matrix(2, 3, 0.5), 0.0));
}

TEST(GateValuesTest, RowsSumToOneOverCandidatesAndMaskedAreZero) {
  std::mt19937_64 rng(23);
  const ClusterConfig cfg(8, 2);
  for (int trial = 0; trial < 200; ++trial) {
    const ExpertMask mask = trial % 2 == 0 ? cluster_level_mask(cfg, 0.5, rng())
                                           : global_level_mask(8, 0.75, rng());
    Tape tape;
    RouterParams p = plain_router(random_matrix(8, 3, rng, -3, 3));
    const RouterVars rv = bind_router(tape, p, false);
    Var s = routing_scores(tape.constant(random_matrix(5, 3, rng)), rv, mask);
    for (GatingKind kind : {GatingKind::kSoftmax, GatingKind::kSigmoid}) {
      const Matrix g = gate_values(s, kind).value();
      for (std::size_t t = 0; t < g.rows(); ++t) {
        double total = 0.0;
        for (std::size_t e = 0; e < 8; ++e) {
          if (!mask.active(e)) {
            EXPECT_EQ(g(t, e), 0.0);
          } else if (kind == GatingKind::kSigmoid) {
            EXPECT_GT(g(t, e), 0.0);
            EXPECT_LT(g(t, e), 1.0);
          }
          total += g(t, e);
        }
        if (kind == GatingKind::kSoftmax) {
          EXPECT_NEAR(total, 1.0, 1e-9);
        }
      }
    }
  }
}

TEST(GateValuesTest, SoftmaxIsShiftInvariant) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix s = random_matrix(3, 6, rng, -5, 5);
    Matrix shifted = s;
    const double c = std::uniform_real_distribution<>(-50, 50)(rng);
    for (double& v : shifted.values()) v += c;
    Tape tape;
    const Matrix a = gate_values(tape.constant(s), GatingKind::kSoftmax).value();
    const Matrix b = gate_values(tape.constant(shifted), GatingKind::kSoftmax).value();
    EXPECT_TRUE(MatrixNear(a, b, 1e-12));
    const ExpertMask all = inference_mask(6);
    EXPECT_EQ(top_k_select(a, 1, all), top_k_select(b, 1, all));
  }
}

TEST(GateValuesTest, AllMaskedRowIsContractError) {
  Tape tape;
  EXPECT_THROW(gate_values(tape.constant(Matrix(1, 3, kMaskedScore)), GatingKind::kSoftmax),
               ContractError);
}

TEST(GateValuesTest, MaskedExpertReceivesNoGradient) {
  std::mt19937_64 rng(25);
  Tape tape;
  RouterParams p = plain_router(random_matrix(4, 3, rng));
  const RouterVars rv = bind_router(tape, p, true);
  ExpertMask mask = inference_mask(4);
  mask.keep[2] = false;
  Var g = gate_values(routing_scores(tape.constant(random_matrix(5, 3, rng)), rv, mask),
                      GatingKind::kSoftmax);
  tape.backward(sum(square(g)));
  const Matrix& grad = rv.expert_embeddings.grad();
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(grad(2, c), 0.0);
  double other = 0.0;
  for (std::size_t c = 0; c < 3; ++c) other += std::abs(grad(0, c));
  EXPECT_GT(other, 0.0);
}

TEST(GateValuesTest, RouterGradientsMatchCentralDifferences) {
  std::mt19937_64 rng(26);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix h = random_matrix(6, 4, rng);
    const Matrix w = random_matrix(6, 5, rng);
    const Matrix pts[] = {random_matrix(5, 3, rng), random_matrix(4, 3, rng),
                          Matrix::scalar(std::uniform_real_distribution<>(-1, 1)(rng))};
    const GatingKind kind = trial % 2 ? GatingKind::kSigmoid : GatingKind::kSoftmax;
    const GradCheckReport r = check_tape_gradient(
        MultiTapeFunction([&](Tape& tape, std::span<const Var> v) {
          RouterVars rv;
          rv.expert_embeddings = v[0];
          rv.projection = v[1];
          rv.log_temperature = v[2];
          rv.normalize = true;
          Var g = gate_values(routing_scores(tape.constant(h), rv, inference_mask(5)), kind);
          return sum(mul(g, tape.constant(w)));
        }),
        pts);
    EXPECT_LT(r.max_rel_error, 1e-4);
  }
}

TEST(TopKTest, TiesGoToLowestIndex) {
  const ExpertMask all = inference_mask(4);
  const Selection s = top_k_select(Matrix::from_rows({{0.1, 0.4, 0.4, 0.1}}), 1, all);
  EXPECT_EQ(s, Selection({{1}}));
  const Selection two = top_k_select(Matrix::from_rows({{0.7, 0.2, 0.1}}), 2, inference_mask(3));
  EXPECT_EQ(two, Selection({{0, 1}}));
}

TEST(TopKTest, TooManyOrZeroIsContractError) {
  ExpertMask mask = inference_mask(3);
  mask.keep[0] = false;
  const Matrix g = Matrix::from_rows({{0.2, 0.3, 0.5}});
  EXPECT_THROW(top_k_select(g, 3, mask), ContractError);
  EXPECT_THROW(top_k_select(g, 0, mask), ContractError);
  EXPECT_NO_THROW(top_k_select(g, 2, mask));
}

TEST(TopKTest, MatchesSortOracleAndAvoidsMaskedExperts) {
  std::mt19937_64 rng(27);
  const ClusterConfig cfg(8, 4);
  for (int trial = 0; trial < 300; ++trial) {
    Matrix g = random_matrix(4, 8, rng, 0, 1);
    for (double& v : g.values()) v = std::round(v * 5) / 5;  // force ties
    const ExpertMask mask = cluster_level_mask(cfg, 0.5, rng());
    const Selection s = top_k_select(g, 1, mask);
    const auto want = reference::top1_by_sort(to_ref(g), mask.keep);
    for (std::size_t t = 0; t < 4; ++t) {
      EXPECT_EQ(s[t][0], want[t]);
      EXPECT_TRUE(mask.active(s[t][0]));
    }
    const Selection s3 = top_k_select(g, 3, mask);
    for (const auto& row : s3) {
      for (std::size_t e : row) EXPECT_TRUE(mask.active(e));
    }
  }
}

TEST(CombineTest, SingleExpertWeightedOutput) {
  Tape tape;
  Var gates = tape.constant(Matrix::from_rows({{0.6, 0.4}}));
  ExpertBlock block{0, {0}, tape.constant(Matrix::from_rows({{1, 2}}))};
  const ExpertBlock blocks[] = {block};
  Var y = combine_outputs(blocks, gates, Selection({{0}}), 2);
  EXPECT_TRUE(MatrixNear(y.value(), Matrix::from_rows({{0.6, 1.2}}), 1e-15));

  Var saturated = tape.constant(Matrix::from_rows({{1.0, 0.0}}));
  Var y1 = combine_outputs(blocks, saturated, Selection({{0}}), 2);
  EXPECT_EQ(y1.value(), Matrix::from_rows({{1, 2}}));
}

TEST(CombineTest, TwoExpertsMatchHandSum) {
  std::mt19937_64 rng(28);
  for (int trial = 0; trial < 50; ++trial) {
    Tape tape;
    const Matrix g = random_matrix(3, 3, rng, 0, 1);
    const Matrix e0 = random_matrix(2, 4, rng), e2 = random_matrix(3, 4, rng);
    const Selection sel = {{0, 2}, {2, 0}, {2}};
    const ExpertBlock blocks[] = {{0, {0, 1}, tape.constant(e0)},
                                  {2, {0, 1, 2}, tape.constant(e2)}};
    const Matrix y = combine_outputs(blocks, tape.constant(g), sel, 4).value();
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_NEAR(y(0, c), g(0, 0) * e0(0, c) + g(0, 2) * e2(0, c), 1e-12);
      EXPECT_NEAR(y(1, c), g(1, 2) * e2(1, c) + g(1, 0) * e0(1, c), 1e-12);
      EXPECT_NEAR(y(2, c), g(2, 2) * e2(2, c), 1e-12);
    }
  }
}

TEST(CombineTest, MissingExpertOutputIsContractError) {
  Tape tape;
  Var gates = tape.constant(Matrix::from_rows({{0.5, 0.5}, {0.5, 0.5}}));
  const ExpertBlock blocks[] = {{0, {0}, tape.constant(Matrix(1, 2, 1.0))}};
  EXPECT_THROW(combine_outputs(blocks, gates, Selection({{0}, {1}}), 2), ContractError);
}

}  // namespace
}  // namespace moec

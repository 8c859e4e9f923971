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

// Auxiliary routing objectives.
//
//   balance    = alpha * N * sum_i f_i * p_i
//   clustering = beta * N * C_intra * C_inter
//   C_intra    = mean over clusters of the population variance of the
//                routing probabilities of the cluster's experts
//   C_inter    = exp(-mu * (max(pbar) - max2(pbar)) / max(pbar))
//
// f_i is the fraction of tokens dispatched to expert i (a hard count, held
// constant for differentiation), p_i the batch-mean gate value and pbar the
// vector of per-cluster mean probabilities. Under an expert mask every
// cluster statistic runs over surviving experts only.

#ifndef MOEC_LOSSES_H_
#define MOEC_LOSSES_H_

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "moec/autodiff.h"
#include "moec/cluster_config.h"
#include "moec/dropout.h"
#include "moec/matrix.h"

namespace moec {

inline constexpr double kDefaultBalanceCoef = 1e-2;
inline constexpr double kDefaultClusteringCoef = 1e-2;
inline constexpr double kDefaultInterClusterCoef = 0.0;
/// C_inter needs max(pbar) above this value.
inline constexpr double kMinClusterMean = 1e-12;

/// Count of experts used as the N factor of the balance loss.
enum class BalanceNMode { kFull, kSurviving };

std::string_view to_string(BalanceNMode mode);
BalanceNMode parse_balance_n_mode(std::string_view text);

struct LossBreakdown {
  double task = 0.0;
  double balance = 0.0;
  double clustering = 0.0;
  double balance_coef = kDefaultBalanceCoef;
  double clustering_coef = kDefaultClusteringCoef;
  double inter_cluster_coef = kDefaultInterClusterCoef;

  double total() const noexcept { return task + balance + clustering; }
};

struct RoutingStats {
  std::vector<double> f;                           // N
  std::vector<double> p;                           // N
  std::vector<std::vector<double>> cluster_probs;  // m lists of surviving p
  std::vector<double> cluster_means;               // m
  std::size_t tokens = 0;
  std::vector<std::size_t> counts;  // N
};

/// f_i = Count_i / T, T = assignments.size(). Entries >= num_experts are
/// treated as not dispatched (overflow). Throws ContractError when empty.
std::vector<double> token_fractions(std::span<const std::size_t> assignments,
                                    std::size_t num_experts);

/// Column means of a T x N gate matrix (1 x N).
Var mean_routing_prob(Var gates);

/// alpha * n * sum_i f_i * p_i; `f` enters as a constant.
Var balance_loss(std::span<const double> f, Var p, double n, double alpha);

/// Mean over clusters of the population variance of surviving p values.
/// Throws ContractError if a cluster has no survivor.
Var intra_cluster_variance(Var p, const ClusterConfig& cfg, const ExpertMask& mask);

/// Per-cluster mean of surviving p values (1 x m).
Var cluster_means(Var p, const ClusterConfig& cfg, const ExpertMask& mask);

/// exp(-mu * (max - max2) / max) over the cluster means. With mu == 0 the
/// result is the constant 1 and m == 1 is allowed. Gradients flow through the
/// first maximum and the first maximum among the remaining entries.
Var inter_cluster_constraint(Var means, double mu);

struct ClusteringTerms {
  Var loss;
  Var intra;
  Var inter;
};

/// beta * N * C_intra * C_inter with N = cfg.num_experts().
ClusteringTerms clustering_loss(Var p, const ClusterConfig& cfg, const ExpertMask& mask,
                                double beta, double mu);

/// Same as clustering_loss, but clusters without a surviving expert are left
/// out of both C_intra and C_inter instead of raising. With fewer than two
/// populated clusters C_inter is 1. Used for global-level dropout.
ClusteringTerms populated_clustering_loss(Var p, const ClusterConfig& cfg,
                                          const ExpertMask& mask, double beta, double mu);

double total_loss(double task, double balance, double clustering);
Var total_loss(Var task, Var balance, Var clustering);

/// Plain statistics of one routing step.
RoutingStats routing_stats(const Matrix& gates, std::span<const std::size_t> assignments,
                           const ClusterConfig& cfg, const ExpertMask& mask);

}  // namespace moec

#endif  // MOEC_LOSSES_H_

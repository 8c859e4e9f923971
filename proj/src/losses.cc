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

#include "moec/losses.h"

#include <string>

#include "moec/errors.h"

namespace moec {

std::string_view to_string(BalanceNMode mode) {
  return mode == BalanceNMode::kSurviving ? "surviving" : "full";
}

BalanceNMode parse_balance_n_mode(std::string_view text) {
  if (text == "full") return BalanceNMode::kFull;
  if (text == "surviving") return BalanceNMode::kSurviving;
  throw ContractError("unknown balance_n_mode '" + std::string(text) + "'");
}

std::vector<double> token_fractions(std::span<const std::size_t> assignments,
                                    std::size_t num_experts) {
  if (assignments.empty()) throw ContractError("token_fractions of an empty batch");
  std::vector<double> f(num_experts, 0.0);
  for (std::size_t id : assignments) {
    if (id < num_experts) f[id] += 1.0;
  }
  const auto tokens = static_cast<double>(assignments.size());
  for (double& v : f) v /= tokens;
  return f;
}

Var mean_routing_prob(Var gates) { return mean_cols(gates); }

Var balance_loss(std::span<const double> f, Var p, double n, double alpha) {
  if (p.rows() != 1 || p.cols() != f.size()) {
    throw DimensionError("balance_loss: f has " + std::to_string(f.size()) + " entries, p is " +
                         p.value().shape_string());
  }
  Var frac = p.tape().constant(Matrix::row_vector(f));
  return scale(sum(mul(frac, p)), alpha * n);
}

namespace {

void check_cluster_inputs(Var p, const ClusterConfig& cfg, const ExpertMask& mask) {
  if (p.rows() != 1 || p.cols() != cfg.num_experts()) {
    throw DimensionError("routing probabilities " + p.value().shape_string() + " for " +
                         std::to_string(cfg.num_experts()) + " experts");
  }
  if (mask.size() != cfg.num_experts()) {
    throw DimensionError("mask length does not match expert count");
  }
}

std::vector<std::size_t> survivors_or_throw(const ClusterConfig& cfg, const ExpertMask& mask,
                                            std::size_t cluster) {
  auto ids = mask.cluster_survivors(cfg, cluster);
  if (ids.empty()) {
    throw ContractError("cluster " + std::to_string(cluster) + " has no surviving expert");
  }
  return ids;
}

}  // namespace

Var intra_cluster_variance(Var p, const ClusterConfig& cfg, const ExpertMask& mask) {
  check_cluster_inputs(p, cfg, mask);
  std::vector<Var> variances;
  variances.reserve(cfg.num_clusters());
  for (std::size_t c = 0; c < cfg.num_clusters(); ++c) {
    const auto ids = survivors_or_throw(cfg, mask, c);
    Var members = gather_cols(p, ids);
    Var centre = broadcast(mean(members), 1, ids.size());
    variances.push_back(mean(square(sub(members, centre))));
  }
  return mean(concat_cols(variances));
}

Var cluster_means(Var p, const ClusterConfig& cfg, const ExpertMask& mask) {
  check_cluster_inputs(p, cfg, mask);
  std::vector<Var> means;
  means.reserve(cfg.num_clusters());
  for (std::size_t c = 0; c < cfg.num_clusters(); ++c) {
    means.push_back(mean(gather_cols(p, survivors_or_throw(cfg, mask, c))));
  }
  return concat_cols(means);
}

Var inter_cluster_constraint(Var means, double mu) {
  if (means.rows() != 1) throw DimensionError("cluster means must be a row vector");
  Tape& tape = means.tape();
  if (mu == 0.0) return tape.constant(Matrix::scalar(1.0));
  if (means.cols() < 2) {
    throw ContractError("inter-cluster constraint with mu != 0 needs at least two clusters");
  }
  const Matrix& mv = means.value();
  std::size_t top = 0;
  for (std::size_t i = 1; i < mv.cols(); ++i) {
    if (mv[i] > mv[top]) top = i;
  }
  if (!(mv[top] > kMinClusterMean)) {
    throw ContractError("largest cluster mean " + std::to_string(mv[top]) + " is not positive");
  }
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < mv.cols(); ++i) {
    if (i != top) rest.push_back(i);
  }
  Var first = max(means);
  Var second = max(gather_cols(means, rest));
  Var gap = div(sub(first, second), first);
  return exp(scale(gap, -mu));
}

ClusteringTerms clustering_loss(Var p, const ClusterConfig& cfg, const ExpertMask& mask,
                                double beta, double mu) {
  ClusteringTerms terms;
  terms.intra = intra_cluster_variance(p, cfg, mask);
  terms.inter = inter_cluster_constraint(cluster_means(p, cfg, mask), mu);
  terms.loss =
      scale(mul(terms.intra, terms.inter), beta * static_cast<double>(cfg.num_experts()));
  return terms;
}

ClusteringTerms populated_clustering_loss(Var p, const ClusterConfig& cfg,
                                          const ExpertMask& mask, double beta, double mu) {
  check_cluster_inputs(p, cfg, mask);
  std::vector<Var> variances;
  std::vector<Var> means;
  for (std::size_t c = 0; c < cfg.num_clusters(); ++c) {
    const auto ids = mask.cluster_survivors(cfg, c);
    if (ids.empty()) continue;
    Var members = gather_cols(p, ids);
    Var centre = mean(members);
    variances.push_back(mean(square(sub(members, broadcast(centre, 1, ids.size())))));
    means.push_back(centre);
  }
  if (variances.empty()) throw ContractError("no cluster has a surviving expert");
  ClusteringTerms terms;
  terms.intra = mean(concat_cols(variances));
  terms.inter = means.size() < 2 ? p.tape().constant(Matrix::scalar(1.0))
                                 : inter_cluster_constraint(concat_cols(means), mu);
  terms.loss =
      scale(mul(terms.intra, terms.inter), beta * static_cast<double>(cfg.num_experts()));
  return terms;
}

double total_loss(double task, double balance, double clustering) {
  return task + balance + clustering;
}

Var total_loss(Var task, Var balance, Var clustering) { return add(add(task, balance), clustering); }

RoutingStats routing_stats(const Matrix& gates, std::span<const std::size_t> assignments,
                           const ClusterConfig& cfg, const ExpertMask& mask) {
  const std::size_t n = cfg.num_experts();
  if (gates.cols() != n || gates.rows() != assignments.size()) {
    throw DimensionError("routing_stats: gates " + gates.shape_string() + " vs " +
                         std::to_string(assignments.size()) + " assignments");
  }
  RoutingStats stats;
  stats.tokens = assignments.size();
  stats.counts.assign(n, 0);
  for (std::size_t id : assignments) {
    if (id < n) ++stats.counts[id];
  }
  stats.f = token_fractions(assignments, n);
  stats.p.assign(n, 0.0);
  for (std::size_t t = 0; t < gates.rows(); ++t) {
    for (std::size_t e = 0; e < n; ++e) stats.p[e] += gates(t, e);
  }
  for (double& v : stats.p) v /= static_cast<double>(gates.rows());
  for (std::size_t c = 0; c < cfg.num_clusters(); ++c) {
    std::vector<double> probs;
    for (std::size_t e : mask.cluster_survivors(cfg, c)) probs.push_back(stats.p[e]);
    double m = 0.0;
    for (double v : probs) m += v;
    stats.cluster_means.push_back(probs.empty() ? 0.0 : m / static_cast<double>(probs.size()));
    stats.cluster_probs.push_back(std::move(probs));
  }
  return stats;
}

}  // namespace moec

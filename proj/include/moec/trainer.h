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

#ifndef MOEC_TRAINER_H_
#define MOEC_TRAINER_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "moec/dispatch.h"
#include "moec/dropout.h"
#include "moec/losses.h"
#include "moec/model.h"
#include "moec/synthetic.h"

namespace moec {

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_epsilon = 1e-6;
  double balance_coef = kDefaultBalanceCoef;
  double clustering_coef = kDefaultClusteringCoef;
  double inter_cluster_coef = kDefaultInterClusterCoef;
  /// When false the clustering term is measured but left out of the
  /// objective (the plain MoE baseline).
  bool clustering_loss = true;
  DropoutLevel dropout_level = DropoutLevel::kNone;
  double dropout_rate = 0.0;
  BalanceNMode balance_n_mode = BalanceNMode::kFull;
  std::size_t log_interval = 50;
  std::uint64_t seed = 1;

  void validate() const;
};

/// One logged step. Routing values come from the training batch at that
/// step, before the step's parameter update.
struct MetricsRow {
  std::size_t step = 0;
  double train_task_loss = 0.0;
  double val_task_loss = 0.0;
  double balance_loss = 0.0;
  double clustering_loss = 0.0;
  double total_loss = 0.0;
  double c_intra = 0.0;
  double c_inter = 0.0;
  double overflow_rate = 0.0;
  double temperature = 1.0;
  std::vector<double> expert_fractions;       // f_i on the training batch
  std::vector<double> cluster_shares;         // per cluster, training batch
  std::vector<double> within_cluster_shares;  // per expert, training batch
  std::vector<double> val_expert_fractions;   // f_i over the validation pass
  std::vector<double> val_within_cluster_shares;
};

/// Raised when a loss turns non-finite. `what()` carries the state dump.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepTrace {
  std::size_t step = 0;
  const MoEForward* forward = nullptr;
  LossBreakdown losses;
};

struct TrainHooks {
  /// Called after every forward pass on a training batch.
  std::function<void(const StepTrace&)> on_step;
};

struct TrainResult {
  ToyModel model;
  std::vector<MetricsRow> rows;
  double best_val_loss = 0.0;
  std::size_t best_step = 0;
};

/// Forward pass and objective of one training step.
struct StepObjective {
  MoEForward forward;
  Var total;
  ClusteringTerms clustering;
  LossBreakdown losses;
};

/// Runs `bound` on one batch under `mask` and assembles task + balance
/// (+ clustering when cfg.clustering_loss) on the same tape. The clustering
/// terms are always computed; clusters emptied by the mask are skipped.
StepObjective step_objective(const ToyModel& model, const BoundModel& bound, Var batch,
                             const Targets& targets, const ExpertMask& mask,
                             const TrainConfig& cfg);

/// Adam with bias correction over the parameters of a ToyModel.
class AdamOptimizer {
 public:
  AdamOptimizer(double learning_rate, double beta1, double beta2, double epsilon);

  /// `grads` follows ToyModel::for_each_parameter order.
  void step(ToyModel& model, const std::vector<Matrix>& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

/// Mean task loss over `data` with the inference mask, evaluated in chunks
/// of `batch_size` tokens. Dispatch results are appended to `dispatches`
/// when given.
double evaluate(const ToyModel& model, const Dataset& data, std::size_t batch_size,
                std::vector<DispatchResult>* dispatches = nullptr);

/// Runs `cfg.steps` updates; rows are logged at step 0, every
/// `log_interval` steps and at the final step.
TrainResult train(ToyModel model, const SyntheticTask& data, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

}  // namespace moec

#endif  // MOEC_TRAINER_H_

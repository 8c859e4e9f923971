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

#include "moec/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "moec/errors.h"
#include "moec/random.h"

namespace moec {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ContractError("batch_size must be positive");
  if (log_interval == 0) throw ContractError("log_interval must be positive");
  if (!(learning_rate >= 0.0)) throw ContractError("learning_rate must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ContractError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ContractError("adam_epsilon must be positive");
  if (!(balance_coef >= 0.0) || !(clustering_coef >= 0.0) || !(inter_cluster_coef >= 0.0)) {
    throw ContractError("loss coefficients must be non-negative");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ContractError("dropout rate must satisfy 0 <= rate < 1");
  }
}

AdamOptimizer::AdamOptimizer(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

void AdamOptimizer::step(ToyModel& model, const std::vector<Matrix>& grads) {
  if (m_.empty()) {
    for (const Matrix& g : grads) {
      m_.emplace_back(g.rows(), g.cols());
      v_.emplace_back(g.rows(), g.cols());
    }
  }
  if (grads.size() != m_.size()) throw DimensionError("Adam: gradient count changed");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  std::size_t k = 0;
  model.for_each_parameter([&](const std::string&, Matrix& param) {
    const Matrix& g = grads[k];
    Matrix& m = m_[k];
    Matrix& v = v_[k];
    if (!g.same_shape(param)) throw DimensionError("Adam: gradient shape mismatch");
    for (std::size_t i = 0; i < param.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      param[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
    ++k;
  });
}

double evaluate(const ToyModel& model, const Dataset& data, std::size_t batch_size,
                std::vector<DispatchResult>* dispatches) {
  if (batch_size == 0) throw ContractError("batch_size must be positive");
  const std::size_t n = data.size();
  const ExpertMask mask = inference_mask(model.layer.experts.size());
  double weighted = 0.0;
  std::vector<std::size_t> ids;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    ids.resize(stop - start);
    std::iota(ids.begin(), ids.end(), start);
    Tape tape;
    BoundModel bound = bind_model(tape, model, false);
    Var x = tape.constant(data.batch_inputs(ids));
    MoEForward fwd = moe_forward(x, model.layer, bound, mask, false);
    Var loss = task_loss(head_forward(fwd.output, bound), data.batch_targets(ids), model.task);
    weighted += loss.scalar() * static_cast<double>(ids.size());
    if (dispatches) dispatches->push_back(std::move(fwd.dispatch));
  }
  return weighted / static_cast<double>(n);
}

namespace {

// Epoch-wise reshuffled index stream over the training set.
class BatchSampler {
 public:
  BatchSampler(std::size_t size, std::uint64_t seed) : order_(size), rng_(seed) {
    std::iota(order_.begin(), order_.end(), 0);
    cursor_ = order_.size();
  }

  std::vector<std::size_t> next(std::size_t count) {
    std::vector<std::size_t> ids;
    ids.reserve(count);
    while (ids.size() < count) {
      if (cursor_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        cursor_ = 0;
      }
      ids.push_back(order_[cursor_++]);
    }
    return ids;
  }

 private:
  std::vector<std::size_t> order_;
  std::mt19937_64 rng_;
  std::size_t cursor_;
};

std::string dump_state(std::size_t step, const LossBreakdown& last, const ToyModel& model,
                       const std::string& cause) {
  std::ostringstream out;
  out << "non-finite training state at step " << step << ": " << cause << "\n"
      << "  last finite losses: task=" << last.task << " balance=" << last.balance
      << " clustering=" << last.clustering << "\n";
  model.for_each_parameter([&out](const std::string& name, const Matrix& m) {
    double peak = 0.0;
    bool finite = true;
    for (double v : m.values()) {
      finite = finite && std::isfinite(v);
      peak = std::max(peak, std::abs(v));
    }
    out << "  " << name << " max|.|=" << peak << (finite ? "" : " (non-finite)") << "\n";
  });
  return out.str();
}

}  // namespace

StepObjective step_objective(const ToyModel& model, const BoundModel& bound, Var batch,
                             const Targets& targets, const ExpertMask& mask,
                             const TrainConfig& cfg) {
  const ClusterConfig& clusters = model.layer.clusters;
  StepObjective obj;
  obj.losses.balance_coef = cfg.balance_coef;
  obj.losses.clustering_coef = cfg.clustering_coef;
  obj.losses.inter_cluster_coef = cfg.inter_cluster_coef;
  obj.forward = moe_forward(batch, model.layer, bound, mask, true);
  Var task = task_loss(head_forward(obj.forward.output, bound), targets, model.task);
  Var p = mean_routing_prob(obj.forward.gates);
  const double n = cfg.balance_n_mode == BalanceNMode::kFull
                       ? static_cast<double>(clusters.num_experts())
                       : static_cast<double>(mask.survivors());
  Var balance = balance_loss(obj.forward.stats.f, p, n, cfg.balance_coef);
  obj.clustering =
      populated_clustering_loss(p, clusters, mask, cfg.clustering_coef, cfg.inter_cluster_coef);
  obj.total = cfg.clustering_loss ? total_loss(task, balance, obj.clustering.loss)
                                  : add(task, balance);
  obj.losses.task = task.scalar();
  obj.losses.balance = balance.scalar();
  obj.losses.clustering = cfg.clustering_loss ? obj.clustering.loss.scalar() : 0.0;
  return obj;
}

TrainResult train(ToyModel model, const SyntheticTask& data, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  cfg.validate();
  const MoELayer& layer = model.layer;
  const ClusterConfig clusters = layer.clusters;

  TrainResult result;
  AdamOptimizer adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
  BatchSampler sampler(data.train.size(), derive_seed(cfg.seed, 3));
  const std::uint64_t mask_stream = derive_seed(cfg.seed, 4);
  LossBreakdown last;

  for (std::size_t step = 0; step <= cfg.steps; ++step) {
    const std::vector<std::size_t> ids = sampler.next(cfg.batch_size);
    const ExpertMask mask =
        make_mask(cfg.dropout_level, clusters, cfg.dropout_rate, derive_seed(mask_stream, step));

    Tape tape;
    BoundModel bound = bind_model(tape, model, true);
    StepObjective obj;
    try {
      obj = step_objective(model, bound, tape.constant(data.train.batch_inputs(ids)),
                           data.train.batch_targets(ids), mask, cfg);
    } catch (const NumericError& e) {
      throw TrainingError(dump_state(step, last, model, e.what()));
    }
    const LossBreakdown& losses = obj.losses;
    const MoEForward& fwd = obj.forward;
    if (!std::isfinite(losses.total())) {
      throw TrainingError(dump_state(step, last, model, "total loss"));
    }
    last = losses;
    if (hooks.on_step) hooks.on_step(StepTrace{step, &fwd, losses});

    if (step % cfg.log_interval == 0 || step == cfg.steps) {
      MetricsRow row;
      row.step = step;
      row.train_task_loss = losses.task;
      row.balance_loss = losses.balance;
      row.clustering_loss = losses.clustering;
      row.total_loss = losses.total();
      row.c_intra = obj.clustering.intra.scalar();
      row.c_inter = obj.clustering.inter.scalar();
      row.overflow_rate =
          static_cast<double>(fwd.dispatch.overflow) / static_cast<double>(ids.size());
      row.temperature =
          layer.router.log_temperature ? std::exp((*layer.router.log_temperature)[0]) : 1.0;
      const ClusterFractions train_fr = cluster_fractions(fwd.dispatch, clusters);
      row.expert_fractions = train_fr.expert;
      row.cluster_shares = train_fr.cluster;
      row.within_cluster_shares = train_fr.within_cluster;
      std::vector<DispatchResult> val_dispatch;
      row.val_task_loss = evaluate(model, data.validation, cfg.batch_size, &val_dispatch);
      const ClusterFractions val_fr = cluster_fractions(val_dispatch, clusters);
      row.val_expert_fractions = val_fr.expert;
      row.val_within_cluster_shares = val_fr.within_cluster;
      if (result.rows.empty() || row.val_task_loss < result.best_val_loss) {
        result.best_val_loss = row.val_task_loss;
        result.best_step = step;
      }
      result.rows.push_back(std::move(row));
    }
    if (step == cfg.steps) break;

    tape.backward(obj.total);
    std::vector<Matrix> grads;
    grads.reserve(bound.parameters.size());
    for (const Var& v : bound.parameters) grads.push_back(v.grad());
    adam.step(model, grads);
  }
  result.model = std::move(model);
  return result;
}

}  // namespace moec

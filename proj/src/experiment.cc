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

#include "moec/experiment.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "moec/errors.h"
#include "moec/random.h"

namespace moec {

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kClusterSize:
      return "cluster-size";
    case SweepAxis::kDropoutRate:
      return "dropout-rate";
    case SweepAxis::kMu:
      return "mu";
    case SweepAxis::kExpertCount:
      return "expert-count";
  }
  return "cluster-size";
}

SweepAxis parse_sweep_axis(std::string_view text) {
  if (text == "cluster-size") return SweepAxis::kClusterSize;
  if (text == "dropout-rate") return SweepAxis::kDropoutRate;
  if (text == "mu") return SweepAxis::kMu;
  if (text == "expert-count") return SweepAxis::kExpertCount;
  throw ConfigError("sweep.axis", "unknown axis '" + std::string(text) + "'");
}

ExperimentConfig ExperimentConfig::resolved() const {
  ExperimentConfig out = *this;
  out.task.seed = seed;
  out.train.seed = seed;
  out.model.hidden_dim = task.hidden_dim;
  out.model.output_dim = task.target_width();
  out.model.task = task.kind;
  return out;
}

void ExperimentConfig::validate() const {
  const ExperimentConfig r = resolved();
  r.task.validate();
  r.model.validate();
  r.train.validate();
  if (r.train.inter_cluster_coef > 0.0 && r.model.num_clusters < 2) {
    throw ContractError("inter_cluster_coef > 0 needs at least two clusters");
  }
}

ExperimentConfig clustering_preset() {
  ExperimentConfig cfg;
  cfg.task.groups = 8;
  cfg.task.train_size = 2048;
  cfg.task.validation_size = 512;
  cfg.model.num_experts = 8;
  cfg.model.num_clusters = 2;
  cfg.train.steps = 2000;
  return cfg;
}

ExperimentConfig overfit_preset() {
  ExperimentConfig cfg;
  cfg.task.groups = 8;
  cfg.task.families = 4;
  cfg.task.target_noise = 0.3;
  cfg.task.train_size = 256;
  cfg.task.validation_size = 1024;
  cfg.model.num_experts = 16;
  cfg.model.num_clusters = 4;
  cfg.train.steps = 2000;
  return cfg;
}

ExperimentConfig preset(std::string_view name) {
  if (name == "default") return ExperimentConfig{};
  if (name == "clustering") return clustering_preset();
  if (name == "overfit") return overfit_preset();
  throw ConfigError("preset", "unknown preset '" + std::string(name) + "'");
}

ExperimentConfig baseline_of(const ExperimentConfig& cfg) {
  ExperimentConfig out = cfg;
  out.train.clustering_loss = false;
  out.train.dropout_level = DropoutLevel::kNone;
  out.train.dropout_rate = 0.0;
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  const ExperimentConfig r = cfg.resolved();
  const SyntheticTask data = generate_synthetic(r.task);
  ToyModel model = init_model(r.model, derive_seed(r.seed, 2));
  return ExperimentResult{r.task, train(std::move(model), data, r.train, hooks)};
}

namespace {

std::size_t as_count(double value, const char* key) {
  if (!(value >= 1.0) || std::floor(value) != value) {
    throw ConfigError(key, "expected a positive integer, got " + std::to_string(value));
  }
  return static_cast<std::size_t>(value);
}

}  // namespace

ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, double value,
                            std::optional<DropoutLevel> level) {
  ExperimentConfig cfg = base;
  switch (axis) {
    case SweepAxis::kClusterSize: {
      const std::size_t size = as_count(value, "sweep.values");
      if (cfg.model.num_experts % size != 0) {
        throw ConfigError("sweep.values", "cluster size " + std::to_string(size) +
                                              " does not divide " +
                                              std::to_string(cfg.model.num_experts) + " experts");
      }
      cfg.model.num_clusters = cfg.model.num_experts / size;
      break;
    }
    case SweepAxis::kDropoutRate:
      if (!(value >= 0.0 && value < 1.0)) {
        throw ConfigError("sweep.values", "dropout rate must satisfy 0 <= rate < 1");
      }
      cfg.train.dropout_rate = value;
      if (level) {
        cfg.train.dropout_level = *level;
      } else if (cfg.train.dropout_level == DropoutLevel::kNone) {
        cfg.train.dropout_level = DropoutLevel::kCluster;
      }
      break;
    case SweepAxis::kMu:
      if (!(value >= 0.0)) throw ConfigError("sweep.values", "mu must be non-negative");
      cfg.train.inter_cluster_coef = value;
      break;
    case SweepAxis::kExpertCount: {
      const std::size_t size = base.model.num_experts / base.model.num_clusters;
      const std::size_t experts = as_count(value, "sweep.values");
      if (experts % size != 0) {
        throw ConfigError("sweep.values", "expert count " + std::to_string(experts) +
                                              " is not a multiple of cluster size " +
                                              std::to_string(size));
      }
      cfg.model.num_experts = experts;
      cfg.model.num_clusters = experts / size;
      break;
    }
  }
  try {
    cfg.validate();
  } catch (const ContractError& e) {
    throw ConfigError("sweep.values", e.what());
  }
  return cfg;
}

std::vector<SweepRow> sweep(const ExperimentConfig& base, const SweepSpec& spec) {
  struct Job {
    std::string block;
    double value;
    ExperimentConfig cfg;
  };
  std::vector<Job> jobs;
  std::vector<std::optional<DropoutLevel>> blocks;
  if (spec.axis == SweepAxis::kDropoutRate && !spec.levels.empty()) {
    for (DropoutLevel level : spec.levels) blocks.emplace_back(level);
  } else {
    blocks.emplace_back(std::nullopt);
  }
  for (const auto& level : blocks) {
    for (double v : spec.values) {
      ExperimentConfig cfg = apply_axis(base, spec.axis, v, level);
      cfg.sweep.reset();
      jobs.push_back(Job{level ? std::string(to_string(*level)) : std::string("all"), v,
                         std::move(cfg)});
    }
  }

  std::vector<SweepRow> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  const auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const ExperimentResult res = run_experiment(jobs[i].cfg);
        const TrainResult& tr = res.training;
        SweepRow row;
        row.block = jobs[i].block;
        row.value = jobs[i].value;
        row.seed = jobs[i].cfg.seed;
        row.final_val_loss = tr.rows.back().val_task_loss;
        row.best_val_loss = tr.best_val_loss;
        row.best_step = tr.best_step;
        row.final_c_intra = tr.rows.back().c_intra;
        double overflow = 0.0;
        for (const MetricsRow& m : tr.rows) overflow += m.overflow_rate;
        row.overflow_rate = overflow / static_cast<double>(tr.rows.size());
        rows[i] = std::move(row);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::size_t workers = spec.workers == 0 ? std::thread::hardware_concurrency() : spec.workers;
  workers = std::max<std::size_t>(1, std::min(workers, jobs.size()));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

}  // namespace moec

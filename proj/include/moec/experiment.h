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

#ifndef MOEC_EXPERIMENT_H_
#define MOEC_EXPERIMENT_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moec/model.h"
#include "moec/synthetic.h"
#include "moec/trainer.h"

namespace moec {

enum class SweepAxis { kClusterSize, kDropoutRate, kMu, kExpertCount };

std::string_view to_string(SweepAxis axis);
/// "cluster-size", "dropout-rate", "mu", "expert-count".
SweepAxis parse_sweep_axis(std::string_view text);

struct SweepSpec {
  SweepAxis axis = SweepAxis::kClusterSize;
  std::vector<double> values;
  /// Dropout-rate sweeps run one block per level; other axes ignore this.
  std::vector<DropoutLevel> levels;
  /// Worker threads; 0 picks the hardware concurrency.
  std::size_t workers = 0;
};

/// Everything one training run needs. `seed` feeds the data generator, the
/// parameter init, the batch order and the dropout masks.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  SyntheticTaskSpec task;
  ModelConfig model;
  TrainConfig train;
  std::optional<SweepSpec> sweep;

  /// Copies the seed into the task and train sections and derives the model
  /// dimensions from the task.
  ExperimentConfig resolved() const;
  void validate() const;
};

/// N = 8 in m = 2 clusters on G = 8 groups, 2k steps.
ExperimentConfig clustering_preset();
/// 256 training tokens, G = 8 in 4 families with noisy targets, N = 16 in
/// clusters of 4: few tokens against many experts.
ExperimentConfig overfit_preset();
/// Named presets: "default", "clustering", "overfit". Throws ConfigError.
ExperimentConfig preset(std::string_view name);

/// The MoE baseline of `cfg`: clustering term off, no expert dropout.
ExperimentConfig baseline_of(const ExperimentConfig& cfg);

struct ExperimentResult {
  SyntheticTaskSpec task;
  TrainResult training;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, const TrainHooks& hooks = {});

struct SweepRow {
  std::string block;  // dropout level for dropout-rate sweeps, "all" otherwise
  double value = 0.0;
  std::uint64_t seed = 0;
  double final_val_loss = 0.0;
  double best_val_loss = 0.0;
  std::size_t best_step = 0;
  double final_c_intra = 0.0;
  double overflow_rate = 0.0;  // mean over logged rows
};

/// Applies one axis value to a copy of `base`. Throws ConfigError when the
/// value is invalid for the base configuration.
ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, double value,
                            std::optional<DropoutLevel> level = std::nullopt);

/// One full training run per (block, value), all with the base seed. Rows
/// come back in block order, then value order.
std::vector<SweepRow> sweep(const ExperimentConfig& base, const SweepSpec& spec);

}  // namespace moec

#endif  // MOEC_EXPERIMENT_H_

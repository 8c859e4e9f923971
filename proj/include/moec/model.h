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

// Toy model: one MoE layer with a residual connection, followed by a linear
// task head.
//
//   scores -> gates -> top-1 -> capacity dispatch -> expert FFNs ->
//   gate-weighted combine -> + residual -> head
//
// Tokens that overflow an expert's capacity skip the expert path and carry
// only the residual.

#ifndef MOEC_MODEL_H_
#define MOEC_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moec/autodiff.h"
#include "moec/cluster_config.h"
#include "moec/dispatch.h"
#include "moec/dropout.h"
#include "moec/gating.h"
#include "moec/losses.h"
#include "moec/matrix.h"

namespace moec {

enum class TaskKind { kRegression, kClassification };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view text);

struct ModelConfig {
  std::size_t hidden_dim = 16;
  std::size_t ffn_dim = 32;
  /// Router space dimension. 0 routes in the hidden space without projection.
  std::size_t routing_dim = 8;
  std::size_t num_experts = 8;
  std::size_t num_clusters = 2;
  /// Regression output width or number of classes.
  std::size_t output_dim = 4;
  GatingKind gating = GatingKind::kSoftmax;
  bool normalize = true;
  bool learn_temperature = true;
  double capacity_factor = kDefaultCapacityFactor;
  TaskKind task = TaskKind::kRegression;

  void validate() const;
};

/// hidden -> ffn -> hidden with ReLU in between.
struct ExpertFFN {
  Matrix w1;  // hidden x ffn
  Matrix b1;  // 1 x ffn
  Matrix w2;  // ffn x hidden
  Matrix b2;  // 1 x hidden
};

struct MoELayer {
  RouterParams router;
  std::vector<ExpertFFN> experts;
  ClusterConfig clusters{1, 1};
  double capacity_factor = kDefaultCapacityFactor;

  std::size_t hidden_dim() const { return experts.empty() ? 0 : experts.front().w1.rows(); }
};

struct TaskHead {
  Matrix weight;  // hidden x output
  Matrix bias;    // 1 x output
};

struct ToyModel {
  MoELayer layer;
  TaskHead head;
  TaskKind task = TaskKind::kRegression;

  /// Visits every parameter as (name, matrix) in a fixed order.
  void for_each_parameter(const std::function<void(const std::string&, Matrix&)>& fn);
  void for_each_parameter(
      const std::function<void(const std::string&, const Matrix&)>& fn) const;
  std::size_t parameter_count() const;
};

/// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; temperature starts at 1.
ToyModel init_model(const ModelConfig& cfg, std::uint64_t seed);

struct ExpertVars {
  Var w1, b1, w2, b2;
};

/// Model parameters recorded on one tape. `parameters` follows the order of
/// ToyModel::for_each_parameter.
struct BoundModel {
  RouterVars router;
  std::vector<ExpertVars> experts;
  Var head_weight;
  Var head_bias;
  std::vector<Var> parameters;
};

BoundModel bind_model(Tape& tape, const ToyModel& model, bool trainable);
/// Wraps Vars already on a tape, given in for_each_parameter order.
BoundModel bind_model(const ToyModel& model, std::span<const Var> parameters);

struct MoEForward {
  Var output;  // T x hidden, residual included
  Var scores;
  Var gates;
  Selection selection;
  DispatchResult dispatch;
  RoutingStats stats;
  ExpertMask mask;
};

/// Runs the routing pipeline on `batch` (T x hidden). With `train` false the
/// mask is replaced by the all-true inference mask.
MoEForward moe_forward(Var batch, const MoELayer& layer, const BoundModel& bound,
                       const ExpertMask& mask, bool train);

/// Linear head on top of the layer output.
Var head_forward(Var hidden, const BoundModel& bound);

struct Targets {
  Matrix values;                    // regression: T x output
  std::vector<std::size_t> labels;  // classification: T class ids
};

/// Mean squared error over all entries, or mean negative log-likelihood of
/// the labels under a softmax of `outputs`.
Var task_loss(Var outputs, const Targets& targets, TaskKind kind);

/// Versioned text format: a header line, the parameter count, then for each
/// parameter a "name rows cols" line followed by one line of row-major values.
inline constexpr std::string_view kCheckpointMagic = "moec-checkpoint";
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ToyModel& model);
/// Overwrites the parameters of `model`; names and shapes must match.
void load_checkpoint(const std::filesystem::path& path, ToyModel& model);

}  // namespace moec

#endif  // MOEC_MODEL_H_

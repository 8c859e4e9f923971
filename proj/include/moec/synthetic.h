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

#ifndef MOEC_SYNTHETIC_H_
#define MOEC_SYNTHETIC_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "moec/matrix.h"
#include "moec/model.h"

namespace moec {

/// Tokens drawn around G group centres. Each group has its own target
/// function: a linear map for regression, or the group id as class label.
///
/// With `families` > 0 the groups are split into that many contiguous
/// families. A group's centre and map are its family's centre and map plus a
/// perturbation scaled by `family_spread`, so groups of one family look alike
/// and want similar outputs.
struct SyntheticTaskSpec {
  TaskKind kind = TaskKind::kRegression;
  std::size_t hidden_dim = 16;
  std::size_t groups = 8;
  /// Regression target width. Classification uses `groups` classes.
  std::size_t output_dim = 4;
  /// Standard deviation of each centre coordinate.
  double center_scale = 1.0;
  /// Standard deviation of the per-token noise around its centre.
  double noise_scale = 0.5;
  /// Number of group families; 0 draws every group independently.
  std::size_t families = 0;
  /// Relative size of the per-group perturbation inside a family.
  double family_spread = 0.5;
  /// Standard deviation of Gaussian noise added to regression targets.
  double target_noise = 0.0;
  std::size_t train_size = 2048;
  std::size_t validation_size = 512;
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t target_width() const {
    return kind == TaskKind::kClassification ? groups : output_dim;
  }
};

struct Dataset {
  Matrix inputs;                    // n x hidden_dim
  Targets targets;                  // regression values or class labels
  std::vector<std::size_t> groups;  // latent group of each token

  std::size_t size() const noexcept { return inputs.rows(); }
  /// Rows `ids` as a batch.
  Matrix batch_inputs(std::span<const std::size_t> ids) const;
  Targets batch_targets(std::span<const std::size_t> ids) const;
};

struct SyntheticTask {
  Matrix centers;                 // G x hidden_dim
  std::vector<Matrix> maps;       // regression: G maps hidden_dim x output_dim
  Dataset train;
  Dataset validation;
};

/// Centres and maps come from the task seed; training and validation tokens
/// come from two further streams derived from it.
SyntheticTask generate_synthetic(const SyntheticTaskSpec& spec);

}  // namespace moec

#endif  // MOEC_SYNTHETIC_H_

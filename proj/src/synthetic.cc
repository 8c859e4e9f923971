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

#include "moec/synthetic.h"

#include <cmath>
#include <random>

#include "moec/errors.h"
#include "moec/random.h"

namespace moec {

void SyntheticTaskSpec::validate() const {
  if (hidden_dim == 0) throw ContractError("hidden_dim must be positive");
  if (groups == 0) throw ContractError("need at least one token group");
  if (kind == TaskKind::kRegression && output_dim == 0) {
    throw ContractError("output_dim must be positive");
  }
  if (kind == TaskKind::kClassification && groups < 2) {
    throw ContractError("classification needs at least two groups");
  }
  if (families > groups) throw ContractError("more families than groups");
  if (!(center_scale >= 0.0) || !(noise_scale >= 0.0) || !(family_spread >= 0.0) ||
      !(target_noise >= 0.0)) {
    throw ContractError("scales must be non-negative");
  }
  if (train_size == 0 || validation_size == 0) {
    throw ContractError("train and validation sets must be non-empty");
  }
}

Matrix Dataset::batch_inputs(std::span<const std::size_t> ids) const {
  Matrix out(ids.size(), inputs.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto src = inputs.row(ids[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Targets Dataset::batch_targets(std::span<const std::size_t> ids) const {
  Targets out;
  if (!targets.labels.empty()) {
    for (std::size_t id : ids) out.labels.push_back(targets.labels[id]);
    return out;
  }
  out.values = Matrix(ids.size(), targets.values.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto src = targets.values.row(ids[i]);
    std::copy(src.begin(), src.end(), out.values.row(i).begin());
  }
  return out;
}

namespace {

Dataset sample(const SyntheticTaskSpec& spec, const SyntheticTask& task, std::size_t count,
               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_group(0, spec.groups - 1);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t d = spec.hidden_dim;

  Dataset data;
  data.inputs = Matrix(count, d);
  data.groups.resize(count);
  if (spec.kind == TaskKind::kRegression) {
    data.targets.values = Matrix(count, spec.output_dim);
  }
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t g = pick_group(rng);
    data.groups[n] = g;
    auto x = data.inputs.row(n);
    for (std::size_t j = 0; j < d; ++j) x[j] = task.centers(g, j) + spec.noise_scale * noise(rng);
    if (spec.kind == TaskKind::kClassification) {
      data.targets.labels.push_back(g);
      continue;
    }
    const Matrix& map = task.maps[g];
    auto y = data.targets.values.row(n);
    for (std::size_t k = 0; k < spec.output_dim; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += x[j] * map(j, k);
      y[k] = acc + (spec.target_noise > 0.0 ? spec.target_noise * noise(rng) : 0.0);
    }
  }
  return data;
}

}  // namespace

SyntheticTask generate_synthetic(const SyntheticTaskSpec& spec) {
  spec.validate();
  SyntheticTask task;
  std::mt19937_64 rng(derive_seed(spec.seed, 0));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double map_scale = 1.0 / std::sqrt(static_cast<double>(spec.hidden_dim));
  const bool regression = spec.kind == TaskKind::kRegression;
  if (spec.families == 0) {
    task.centers = Matrix(spec.groups, spec.hidden_dim);
    for (double& v : task.centers.values()) v = spec.center_scale * gauss(rng);
    if (regression) {
      for (std::size_t g = 0; g < spec.groups; ++g) {
        Matrix map(spec.hidden_dim, spec.output_dim);
        for (double& v : map.values()) v = map_scale * gauss(rng);
        task.maps.push_back(std::move(map));
      }
    }
  } else {
    Matrix family_centers(spec.families, spec.hidden_dim);
    for (double& v : family_centers.values()) v = spec.center_scale * gauss(rng);
    std::vector<Matrix> family_maps;
    for (std::size_t f = 0; f < spec.families && regression; ++f) {
      Matrix map(spec.hidden_dim, spec.output_dim);
      for (double& v : map.values()) v = map_scale * gauss(rng);
      family_maps.push_back(std::move(map));
    }
    task.centers = Matrix(spec.groups, spec.hidden_dim);
    for (std::size_t g = 0; g < spec.groups; ++g) {
      const std::size_t f = g * spec.families / spec.groups;
      for (std::size_t j = 0; j < spec.hidden_dim; ++j) {
        task.centers(g, j) =
            family_centers(f, j) + spec.family_spread * spec.center_scale * gauss(rng);
      }
      if (regression) {
        Matrix map = family_maps[f];
        for (double& v : map.values()) v += spec.family_spread * map_scale * gauss(rng);
        task.maps.push_back(std::move(map));
      }
    }
  }
  task.train = sample(spec, task, spec.train_size, derive_seed(spec.seed, 1));
  task.validation = sample(spec, task, spec.validation_size, derive_seed(spec.seed, 2));
  return task;
}

}  // namespace moec

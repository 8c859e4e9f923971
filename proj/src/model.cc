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

#include "moec/model.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "moec/errors.h"

namespace moec {

std::string_view to_string(TaskKind kind) {
  return kind == TaskKind::kClassification ? "classification" : "regression";
}

TaskKind parse_task_kind(std::string_view text) {
  if (text == "regression") return TaskKind::kRegression;
  if (text == "classification") return TaskKind::kClassification;
  throw ContractError("unknown task kind '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
  if (hidden_dim == 0 || ffn_dim == 0 || output_dim == 0) {
    throw ContractError("model dimensions must be positive");
  }
  if (task == TaskKind::kClassification && output_dim < 2) {
    throw ContractError("classification needs at least two classes");
  }
  if (!(capacity_factor > 0.0)) throw ContractError("capacity factor must be positive");
  ClusterConfig(num_experts, num_clusters);
}

void ToyModel::for_each_parameter(
    const std::function<void(const std::string&, Matrix&)>& fn) {
  fn("router.expert_embeddings", layer.router.expert_embeddings);
  if (layer.router.projection) fn("router.projection", *layer.router.projection);
  if (layer.router.log_temperature) fn("router.log_temperature", *layer.router.log_temperature);
  for (std::size_t i = 0; i < layer.experts.size(); ++i) {
    const std::string prefix = "experts." + std::to_string(i) + ".";
    fn(prefix + "w1", layer.experts[i].w1);
    fn(prefix + "b1", layer.experts[i].b1);
    fn(prefix + "w2", layer.experts[i].w2);
    fn(prefix + "b2", layer.experts[i].b2);
  }
  fn("head.weight", head.weight);
  fn("head.bias", head.bias);
}

void ToyModel::for_each_parameter(
    const std::function<void(const std::string&, const Matrix&)>& fn) const {
  const_cast<ToyModel*>(this)->for_each_parameter(
      [&fn](const std::string& name, Matrix& m) { fn(name, m); });
}

std::size_t ToyModel::parameter_count() const {
  std::size_t count = 0;
  for_each_parameter([&count](const std::string&, const Matrix& m) { count += m.size(); });
  return count;
}

namespace {

Matrix uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in,
                    std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

}  // namespace

ToyModel init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ToyModel model;
  model.task = cfg.task;
  MoELayer& layer = model.layer;
  layer.clusters = ClusterConfig(cfg.num_experts, cfg.num_clusters);
  layer.capacity_factor = cfg.capacity_factor;

  const std::size_t route_dim = cfg.routing_dim == 0 ? cfg.hidden_dim : cfg.routing_dim;
  layer.router.kind = cfg.gating;
  layer.router.normalize = cfg.normalize;
  layer.router.expert_embeddings = uniform_init(cfg.num_experts, route_dim, route_dim, rng);
  if (cfg.routing_dim != 0) {
    layer.router.projection = uniform_init(cfg.hidden_dim, route_dim, cfg.hidden_dim, rng);
  }
  if (cfg.learn_temperature) layer.router.log_temperature = Matrix::scalar(0.0);

  layer.experts.reserve(cfg.num_experts);
  for (std::size_t i = 0; i < cfg.num_experts; ++i) {
    ExpertFFN e;
    e.w1 = uniform_init(cfg.hidden_dim, cfg.ffn_dim, cfg.hidden_dim, rng);
    e.b1 = uniform_init(1, cfg.ffn_dim, cfg.hidden_dim, rng);
    e.w2 = uniform_init(cfg.ffn_dim, cfg.hidden_dim, cfg.ffn_dim, rng);
    e.b2 = uniform_init(1, cfg.hidden_dim, cfg.ffn_dim, rng);
    layer.experts.push_back(std::move(e));
  }
  model.head.weight = uniform_init(cfg.hidden_dim, cfg.output_dim, cfg.hidden_dim, rng);
  model.head.bias = uniform_init(1, cfg.output_dim, cfg.hidden_dim, rng);
  layer.router.validate(cfg.hidden_dim);
  return model;
}

BoundModel bind_model(Tape& tape, const ToyModel& model, bool trainable) {
  BoundModel bound;
  const auto bind = [&](const Matrix& m) {
    Var v = trainable ? tape.leaf(m) : tape.constant(m);
    bound.parameters.push_back(v);
    return v;
  };
  const RouterParams& router = model.layer.router;
  bound.router.kind = router.kind;
  bound.router.normalize = router.normalize;
  bound.router.expert_embeddings = bind(router.expert_embeddings);
  if (router.projection) bound.router.projection = bind(*router.projection);
  if (router.log_temperature) bound.router.log_temperature = bind(*router.log_temperature);
  for (const ExpertFFN& e : model.layer.experts) {
    ExpertVars vars;
    vars.w1 = bind(e.w1);
    vars.b1 = bind(e.b1);
    vars.w2 = bind(e.w2);
    vars.b2 = bind(e.b2);
    bound.experts.push_back(vars);
  }
  bound.head_weight = bind(model.head.weight);
  bound.head_bias = bind(model.head.bias);
  return bound;
}

BoundModel bind_model(const ToyModel& model, std::span<const Var> parameters) {
  std::size_t expected = 0;
  model.for_each_parameter([&expected](const std::string&, const Matrix&) { ++expected; });
  if (parameters.size() != expected) {
    throw DimensionError("bind_model: expected " + std::to_string(expected) +
                         " parameters, got " + std::to_string(parameters.size()));
  }
  std::size_t next = 0;
  BoundModel bound;
  const auto take = [&](const Matrix& m) {
    Var v = parameters[next++];
    if (v.rows() != m.rows() || v.cols() != m.cols()) {
      throw DimensionError("bind_model: parameter " + std::to_string(next - 1) + " has shape " +
                           v.value().shape_string() + ", expected " + m.shape_string());
    }
    bound.parameters.push_back(v);
    return v;
  };
  const RouterParams& router = model.layer.router;
  bound.router.kind = router.kind;
  bound.router.normalize = router.normalize;
  bound.router.expert_embeddings = take(router.expert_embeddings);
  if (router.projection) bound.router.projection = take(*router.projection);
  if (router.log_temperature) bound.router.log_temperature = take(*router.log_temperature);
  for (const ExpertFFN& e : model.layer.experts) {
    ExpertVars vars;
    vars.w1 = take(e.w1);
    vars.b1 = take(e.b1);
    vars.w2 = take(e.w2);
    vars.b2 = take(e.b2);
    bound.experts.push_back(vars);
  }
  bound.head_weight = take(model.head.weight);
  bound.head_bias = take(model.head.bias);
  return bound;
}

namespace {

Var affine(Var x, Var w, Var b) {
  Var y = matmul(x, w);
  return add(y, broadcast(b, y.rows(), y.cols()));
}

}  // namespace

MoEForward moe_forward(Var batch, const MoELayer& layer, const BoundModel& bound,
                       const ExpertMask& mask, bool train) {
  const std::size_t tokens = batch.rows();
  const std::size_t dim = batch.cols();
  const std::size_t experts = layer.experts.size();
  if (dim != layer.hidden_dim()) {
    throw DimensionError("batch width " + std::to_string(dim) + " does not match hidden dim " +
                         std::to_string(layer.hidden_dim()));
  }
  if (bound.experts.size() != experts) {
    throw DimensionError("bound model does not match layer expert count");
  }

  MoEForward fwd;
  fwd.mask = train ? mask : inference_mask(experts);
  fwd.scores = routing_scores(batch, bound.router, fwd.mask);
  fwd.gates = gate_values(fwd.scores, bound.router.kind);
  fwd.selection = top_k_select(fwd.gates.value(), 1, fwd.mask);
  fwd.dispatch = dispatch(fwd.gates.value(), fwd.selection, layer.capacity_factor, fwd.mask);

  std::vector<std::vector<std::size_t>> routed(experts);
  Selection accepted(tokens);
  for (std::size_t t = 0; t < tokens; ++t) {
    const std::size_t e = fwd.dispatch.assignment[t];
    if (e == DispatchResult::kOverflow) continue;
    routed[e].push_back(t);
    accepted[t].push_back(e);
  }
  std::vector<ExpertBlock> blocks;
  for (std::size_t e = 0; e < experts; ++e) {
    if (routed[e].empty()) continue;
    const ExpertVars& p = bound.experts[e];
    Var x = gather_rows(batch, routed[e]);
    Var y = affine(relu(affine(x, p.w1, p.b1)), p.w2, p.b2);
    blocks.push_back(ExpertBlock{e, std::move(routed[e]), y});
  }
  Var mixed = combine_outputs(blocks, fwd.gates, accepted, dim);
  fwd.output = add(batch, mixed);
  fwd.stats = routing_stats(fwd.gates.value(), fwd.dispatch.assignment, layer.clusters, fwd.mask);
  return fwd;
}

Var head_forward(Var hidden, const BoundModel& bound) {
  return affine(hidden, bound.head_weight, bound.head_bias);
}

Var task_loss(Var outputs, const Targets& targets, TaskKind kind) {
  Tape& tape = outputs.tape();
  if (kind == TaskKind::kRegression) {
    if (!outputs.value().same_shape(targets.values)) {
      throw DimensionError("task_loss: outputs " + outputs.value().shape_string() +
                           " vs targets " + targets.values.shape_string());
    }
    return mean(square(sub(outputs, tape.constant(targets.values))));
  }
  const std::size_t rows = outputs.rows();
  const std::size_t cols = outputs.cols();
  if (targets.labels.size() != rows) {
    throw DimensionError("task_loss: " + std::to_string(targets.labels.size()) +
                         " labels for " + std::to_string(rows) + " rows");
  }
  for (std::size_t label : targets.labels) {
    if (label >= cols) throw DimensionError("task_loss: label out of range");
  }
  Var shift = stop_gradient(max_rows(outputs));
  Var shifted = sub(outputs, broadcast(shift, rows, cols));
  Var log_norm = log(sum_rows(exp(shifted)));
  std::vector<std::size_t> row_ids(rows);
  for (std::size_t r = 0; r < rows; ++r) row_ids[r] = r;
  Var picked = pick(shifted, row_ids, targets.labels);
  return mean(sub(log_norm, picked));
}

void save_checkpoint(const std::filesystem::path& path, const ToyModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  std::size_t count = 0;
  model.for_each_parameter([&count](const std::string&, const Matrix&) { ++count; });
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "parameters " << count << '\n';
  char buf[32];
  model.for_each_parameter([&](const std::string& name, const Matrix& m) {
    out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t i = 0; i < m.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", m[i]);
      out << (i == 0 ? "" : " ") << buf;
    }
    out << '\n';
  });
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

void load_checkpoint(const std::filesystem::path& path, ToyModel& model) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kCheckpointMagic || version != kCheckpointVersion) {
    throw ConfigError("header", "not a version " + std::to_string(kCheckpointVersion) +
                                    " checkpoint: " + path.string());
  }
  std::string word;
  std::size_t count = 0;
  in >> word >> count;
  std::size_t expected = 0;
  model.for_each_parameter([&expected](const std::string&, const Matrix&) { ++expected; });
  if (word != "parameters" || count != expected) {
    throw ConfigError("parameters", "checkpoint holds " + std::to_string(count) +
                                        " parameters, model has " + std::to_string(expected));
  }
  model.for_each_parameter([&](const std::string& name, Matrix& m) {
    std::string stored;
    std::size_t rows = 0;
    std::size_t cols = 0;
    in >> stored >> rows >> cols;
    if (stored != name || rows != m.rows() || cols != m.cols()) {
      throw ConfigError(name, "checkpoint entry '" + stored + "' (" + std::to_string(rows) +
                                  "x" + std::to_string(cols) + ") does not match " +
                                  m.shape_string());
    }
    for (double& v : m.values()) {
      if (!(in >> v)) throw ConfigError(name, "truncated values");
    }
  });
}

}  // namespace moec

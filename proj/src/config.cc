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

#include "moec/config.h"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "moec/errors.h"

namespace moec {

namespace {

using Json = nlohmann::json;

// Reads typed entries from one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const Json* find(const std::string& key) {
    seen_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  void read(const std::string& key, std::size_t& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(key_path(key), "expected a non-negative integer");
      out = v->get<std::size_t>();
    }
  }

  void read(const std::string& key, std::uint64_t& out, int /*tag*/) {
    if (const Json* v = find(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(key_path(key), "expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }

  void read(const std::string& key, double& out) {
    if (const Json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(key_path(key), "expected a number");
      out = v->get<double>();
    }
  }

  void read(const std::string& key, bool& out) {
    if (const Json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(key_path(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  template <typename Parse, typename T>
  void read_enum(const std::string& key, T& out, Parse parse) {
    if (const Json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(key_path(key), "expected a string");
      try {
        out = parse(v->get<std::string>());
      } catch (const ContractError& e) {
        throw ConfigError(key_path(key), e.what());
      } catch (const ConfigError& e) {
        throw ConfigError(key_path(key), e.what());
      }
    }
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.contains(it.key())) throw ConfigError(key_path(it.key()), "unknown key");
    }
  }

 private:
  const Json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_task(Section s, SyntheticTaskSpec& task) {
  s.read_enum("kind", task.kind, parse_task_kind);
  s.read("hidden_dim", task.hidden_dim);
  s.read("groups", task.groups);
  s.read("output_dim", task.output_dim);
  s.read("center_scale", task.center_scale);
  s.read("noise_scale", task.noise_scale);
  s.read("families", task.families);
  s.read("family_spread", task.family_spread);
  s.read("target_noise", task.target_noise);
  s.read("train_size", task.train_size);
  s.read("validation_size", task.validation_size);
  s.finish();
}

void read_model(Section s, ModelConfig& model) {
  s.read("ffn_dim", model.ffn_dim);
  s.read("routing_dim", model.routing_dim);
  s.read("num_experts", model.num_experts);
  if (s.has("cluster_size") && s.has("num_clusters")) {
    throw ConfigError(s.key_path("cluster_size"), "give cluster_size or num_clusters, not both");
  }
  std::size_t cluster_size = 0;
  s.read("cluster_size", cluster_size);
  s.read("num_clusters", model.num_clusters);
  if (s.has("cluster_size")) {
    if (cluster_size == 0 || model.num_experts % cluster_size != 0) {
      throw ConfigError(s.key_path("cluster_size"),
                        "cluster size must divide num_experts (" +
                            std::to_string(model.num_experts) + ")");
    }
    model.num_clusters = model.num_experts / cluster_size;
  }
  s.read_enum("gating", model.gating, parse_gating_kind);
  s.read("normalize", model.normalize);
  s.read("learn_temperature", model.learn_temperature);
  s.read("capacity_factor", model.capacity_factor);
  s.finish();
}

void read_train(Section s, TrainConfig& train) {
  s.read("steps", train.steps);
  s.read("batch_size", train.batch_size);
  s.read("learning_rate", train.learning_rate);
  s.read("adam_beta1", train.adam_beta1);
  s.read("adam_beta2", train.adam_beta2);
  s.read("adam_epsilon", train.adam_epsilon);
  s.read("balance_coef", train.balance_coef);
  s.read("clustering_coef", train.clustering_coef);
  s.read("inter_cluster_coef", train.inter_cluster_coef);
  s.read("clustering_loss", train.clustering_loss);
  s.read_enum("dropout_level", train.dropout_level, parse_dropout_level);
  s.read("dropout_rate", train.dropout_rate);
  s.read_enum("balance_n_mode", train.balance_n_mode, parse_balance_n_mode);
  s.read("log_interval", train.log_interval);
  s.finish();
}

SweepSpec read_sweep(Section s) {
  SweepSpec spec;
  s.read_enum("axis", spec.axis, parse_sweep_axis);
  if (!s.has("axis")) throw ConfigError(s.key_path("axis"), "missing sweep axis");
  if (const Json* v = s.find("values")) {
    if (!v->is_array() || v->empty()) {
      throw ConfigError(s.key_path("values"), "expected a non-empty array of numbers");
    }
    for (const Json& x : *v) {
      if (!x.is_number()) throw ConfigError(s.key_path("values"), "expected numbers");
      spec.values.push_back(x.get<double>());
    }
  } else {
    throw ConfigError(s.key_path("values"), "missing sweep values");
  }
  if (const Json* v = s.find("levels")) {
    if (!v->is_array()) throw ConfigError(s.key_path("levels"), "expected an array");
    for (const Json& x : *v) {
      if (!x.is_string()) throw ConfigError(s.key_path("levels"), "expected strings");
      try {
        const DropoutLevel level = parse_dropout_level(x.get<std::string>());
        if (level == DropoutLevel::kNone) {
          throw ContractError("level 'none' cannot be swept over dropout rates");
        }
        spec.levels.push_back(level);
      } catch (const ContractError& e) {
        throw ConfigError(s.key_path("levels"), e.what());
      }
    }
  }
  s.read("workers", spec.workers);
  s.finish();
  return spec;
}

// Surfaces semantic constraints as errors against the key that carries them.
void check_semantics(const ExperimentConfig& cfg) {
  const TrainConfig& t = cfg.train;
  if (!(t.dropout_rate >= 0.0 && t.dropout_rate < 1.0)) {
    throw ConfigError("train.dropout_rate",
                      "dropout rate must satisfy 0 <= rate < 1, got " +
                          std::to_string(t.dropout_rate));
  }
  if (t.batch_size == 0) throw ConfigError("train.batch_size", "must be positive");
  if (t.log_interval == 0) throw ConfigError("train.log_interval", "must be positive");
  if (!(t.learning_rate >= 0.0)) throw ConfigError("train.learning_rate", "must be >= 0");
  if (!(t.adam_beta1 >= 0.0 && t.adam_beta1 < 1.0)) {
    throw ConfigError("train.adam_beta1", "must lie in [0, 1)");
  }
  if (!(t.adam_beta2 >= 0.0 && t.adam_beta2 < 1.0)) {
    throw ConfigError("train.adam_beta2", "must lie in [0, 1)");
  }
  if (!(t.adam_epsilon > 0.0)) throw ConfigError("train.adam_epsilon", "must be positive");
  if (!(t.balance_coef >= 0.0)) throw ConfigError("train.balance_coef", "must be >= 0");
  if (!(t.clustering_coef >= 0.0)) throw ConfigError("train.clustering_coef", "must be >= 0");
  if (!(t.inter_cluster_coef >= 0.0)) {
    throw ConfigError("train.inter_cluster_coef", "must be >= 0");
  }
  const ModelConfig& m = cfg.model;
  if (m.num_experts == 0) throw ConfigError("model.num_experts", "must be positive");
  if (m.num_clusters == 0 || m.num_experts % m.num_clusters != 0) {
    throw ConfigError("model.num_clusters", "must divide num_experts");
  }
  if (!(m.capacity_factor > 0.0)) throw ConfigError("model.capacity_factor", "must be positive");
  if (t.inter_cluster_coef > 0.0 && m.num_clusters < 2) {
    throw ConfigError("train.inter_cluster_coef", "needs at least two clusters");
  }
  const SyntheticTaskSpec& task = cfg.task;
  if (task.groups == 0) throw ConfigError("task.groups", "must be positive");
  if (task.hidden_dim == 0) throw ConfigError("task.hidden_dim", "must be positive");
  if (task.train_size == 0) throw ConfigError("task.train_size", "must be positive");
  if (task.validation_size == 0) throw ConfigError("task.validation_size", "must be positive");
  if (task.families > task.groups) {
    throw ConfigError("task.families", "cannot exceed task.groups");
  }
  try {
    cfg.validate();
  } catch (const ContractError& e) {
    throw ConfigError("config", e.what());
  }
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("<document>", std::string("malformed JSON: ") + e.what());
  }
  Section root(doc, "");
  ExperimentConfig cfg;
  if (const Json* v = root.find("preset")) {
    if (!v->is_string()) throw ConfigError("preset", "expected a string");
    cfg = preset(v->get<std::string>());
  }
  root.read("seed", cfg.seed, 0);
  if (const Json* v = root.find("task")) read_task(Section(*v, "task"), cfg.task);
  if (const Json* v = root.find("model")) read_model(Section(*v, "model"), cfg.model);
  if (const Json* v = root.find("train")) read_train(Section(*v, "train"), cfg.train);
  if (const Json* v = root.find("sweep")) cfg.sweep = read_sweep(Section(*v, "sweep"));
  root.finish();
  check_semantics(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string dump_config(const ExperimentConfig& cfg) {
  const ExperimentConfig r = cfg.resolved();
  Json doc;
  doc["seed"] = r.seed;
  doc["task"] = {{"kind", to_string(r.task.kind)},
                 {"hidden_dim", r.task.hidden_dim},
                 {"groups", r.task.groups},
                 {"output_dim", r.task.output_dim},
                 {"center_scale", r.task.center_scale},
                 {"noise_scale", r.task.noise_scale},
                 {"families", r.task.families},
                 {"family_spread", r.task.family_spread},
                 {"target_noise", r.task.target_noise},
                 {"train_size", r.task.train_size},
                 {"validation_size", r.task.validation_size}};
  doc["model"] = {{"ffn_dim", r.model.ffn_dim},
                  {"routing_dim", r.model.routing_dim},
                  {"num_experts", r.model.num_experts},
                  {"num_clusters", r.model.num_clusters},
                  {"gating", to_string(r.model.gating)},
                  {"normalize", r.model.normalize},
                  {"learn_temperature", r.model.learn_temperature},
                  {"capacity_factor", r.model.capacity_factor}};
  doc["train"] = {{"steps", r.train.steps},
                  {"batch_size", r.train.batch_size},
                  {"learning_rate", r.train.learning_rate},
                  {"adam_beta1", r.train.adam_beta1},
                  {"adam_beta2", r.train.adam_beta2},
                  {"adam_epsilon", r.train.adam_epsilon},
                  {"balance_coef", r.train.balance_coef},
                  {"clustering_coef", r.train.clustering_coef},
                  {"inter_cluster_coef", r.train.inter_cluster_coef},
                  {"clustering_loss", r.train.clustering_loss},
                  {"dropout_level", to_string(r.train.dropout_level)},
                  {"dropout_rate", r.train.dropout_rate},
                  {"balance_n_mode", to_string(r.train.balance_n_mode)},
                  {"log_interval", r.train.log_interval}};
  if (r.sweep) {
    Json levels = Json::array();
    for (DropoutLevel l : r.sweep->levels) levels.push_back(to_string(l));
    doc["sweep"] = {{"axis", to_string(r.sweep->axis)},
                    {"values", r.sweep->values},
                    {"levels", levels},
                    {"workers", r.sweep->workers}};
  }
  return doc.dump(2) + "\n";
}

}  // namespace moec

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

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "moec/errors.h"
#include "moec/metrics_io.h"

namespace moec {
namespace {

std::string error_key(std::string_view text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<no error>";
}

TEST(ConfigTest, EmptyDocumentGivesDefaults) {
  const ExperimentConfig cfg = parse_config("{}");
  EXPECT_EQ(cfg.seed, 1u);
  EXPECT_EQ(cfg.model.num_experts, 8u);
  EXPECT_EQ(cfg.train.batch_size, 64u);
  EXPECT_EQ(cfg.train.learning_rate, 1e-3);
  EXPECT_EQ(cfg.train.adam_beta2, 0.98);
  EXPECT_EQ(cfg.train.dropout_level, DropoutLevel::kNone);
  EXPECT_FALSE(cfg.sweep.has_value());
}

TEST(ConfigTest, ReadsEverySection) {
  const ExperimentConfig cfg = parse_config(R"({
    "seed": 42,
    "task": {"kind": "classification", "groups": 6, "families": 3, "target_noise": 0.1},
    "model": {"num_experts": 12, "cluster_size": 3, "gating": "sigmoid", "normalize": false},
    "train": {"steps": 10, "dropout_level": "global", "dropout_rate": 0.25,
              "balance_n_mode": "surviving", "clustering_loss": false},
    "sweep": {"axis": "dropout-rate", "values": [0, 0.5], "levels": ["cluster", "global"]}
  })");
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.task.kind, TaskKind::kClassification);
  EXPECT_EQ(cfg.task.families, 3u);
  EXPECT_EQ(cfg.task.target_noise, 0.1);
  EXPECT_EQ(cfg.model.num_clusters, 4u);
  EXPECT_EQ(cfg.model.gating, GatingKind::kSigmoid);
  EXPECT_FALSE(cfg.model.normalize);
  EXPECT_EQ(cfg.train.dropout_level, DropoutLevel::kGlobal);
  EXPECT_EQ(cfg.train.balance_n_mode, BalanceNMode::kSurviving);
  EXPECT_FALSE(cfg.train.clustering_loss);
  ASSERT_TRUE(cfg.sweep.has_value());
  EXPECT_EQ(cfg.sweep->axis, SweepAxis::kDropoutRate);
  EXPECT_EQ(cfg.sweep->values, std::vector<double>({0, 0.5}));
  EXPECT_EQ(cfg.sweep->levels.size(), 2u);
  EXPECT_EQ(cfg.resolved().model.output_dim, 6u);
}

TEST(ConfigTest, PresetIsOverriddenByLaterKeys) {
  const ExperimentConfig cfg =
      parse_config(R"({"preset": "overfit", "train": {"steps": 7}})");
  EXPECT_EQ(cfg.task.train_size, 256u);
  EXPECT_EQ(cfg.model.num_experts, 16u);
  EXPECT_EQ(cfg.train.steps, 7u);
  EXPECT_EQ(error_key(R"({"preset": "giant"})"), "preset");
}

TEST(ConfigTest, ErrorsNameTheOffendingKey) {
  EXPECT_EQ(error_key(R"({"train": {"dropout_rate": 1.0, "dropout_level": "cluster"}})"),
            "train.dropout_rate");
  EXPECT_EQ(error_key(R"({"train": {"dropout_rate": -0.5}})"), "train.dropout_rate");
  EXPECT_EQ(error_key(R"({"train": {"learnig_rate": 0.1}})"), "train.learnig_rate");
  EXPECT_EQ(error_key(R"({"extra": 1})"), "extra");
  EXPECT_EQ(error_key(R"({"model": {"num_experts": 8, "cluster_size": 3}})"),
            "model.cluster_size");
  EXPECT_EQ(error_key(R"({"model": {"cluster_size": 2, "num_clusters": 4}})"),
            "model.cluster_size");
  EXPECT_EQ(error_key(R"({"model": {"num_clusters": 3}})"), "model.num_clusters");
  EXPECT_EQ(error_key(R"({"model": {"gating": "relu"}})"), "model.gating");
  EXPECT_EQ(error_key(R"({"train": {"steps": -3}})"), "train.steps");
  EXPECT_EQ(error_key(R"({"train": {"steps": "ten"}})"), "train.steps");
  EXPECT_EQ(error_key(R"({"task": {"families": 9}})"), "task.families");
  EXPECT_EQ(error_key(R"({"sweep": {"values": [1]}})"), "sweep.axis");
  EXPECT_EQ(error_key(R"({"sweep": {"axis": "mu", "values": []}})"), "sweep.values");
  EXPECT_EQ(error_key(R"({"sweep": {"axis": "mu", "values": [1], "levels": ["none"]}})"),
            "sweep.levels");
  EXPECT_EQ(error_key(R"({"sweep": {"axis": "depth", "values": [1]}})"), "sweep.axis");
  EXPECT_EQ(error_key(R"({"task": 3})"), "task");
  EXPECT_EQ(error_key("{\"seed\": "), "<document>");
}

TEST(ConfigTest, DropoutRateMessageIsReadable) {
  try {
    parse_config(R"({"train": {"dropout_rate": 1.0}})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("0 <= rate < 1"), std::string::npos);
  }
}

TEST(ConfigTest, DumpRoundTrips) {
  const ExperimentConfig cfg = parse_config(R"({
    "seed": 9, "preset": "clustering",
    "task": {"family_spread": 0.25},
    "model": {"capacity_factor": 1.25},
    "train": {"inter_cluster_coef": 0.5},
    "sweep": {"axis": "cluster-size", "values": [1, 2, 4], "workers": 2}
  })");
  const std::string text = dump_config(cfg);
  const ExperimentConfig again = parse_config(text);
  EXPECT_EQ(dump_config(again), text);
  EXPECT_EQ(again.task.family_spread, 0.25);
  EXPECT_EQ(again.model.capacity_factor, 1.25);
  EXPECT_EQ(again.train.inter_cluster_coef, 0.5);
  EXPECT_EQ(again.sweep->workers, 2u);
}

TEST(ConfigTest, ShippedConfigsLoad) {
  std::size_t count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(MOEC_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    ++count;
    EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
  }
  EXPECT_GE(count, 1u);
}

TEST(ConfigTest, MissingFileIsConfigError) {
  EXPECT_THROW(load_config("/nonexistent/moec.json"), ConfigError);
}

TEST(MetricsIoTest, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
}

MetricsRow sample_row() {
  MetricsRow row;
  row.step = 50;
  row.train_task_loss = 1.5;
  row.val_task_loss = 1.25;
  row.expert_fractions = {0.5, 0.25, 0.25, 0.0};
  row.cluster_shares = {0.75, 0.25};
  row.within_cluster_shares = {2.0 / 3.0, 1.0 / 3.0, 1.0, 0.0};
  row.val_expert_fractions = {0.25, 0.25, 0.25, 0.25};
  row.val_within_cluster_shares = {0.5, 0.5, 0.5, 0.5};
  return row;
}

TEST(MetricsIoTest, MetricsCsvLayout) {
  std::ostringstream out;
  const std::vector<MetricsRow> rows{sample_row()};
  write_metrics_csv(out, rows, ClusterConfig(4, 2));
  std::istringstream in(out.str());
  std::string header, line, extra;
  std::getline(in, header);
  std::getline(in, line);
  EXPECT_FALSE(std::getline(in, extra));
  EXPECT_EQ(header,
            "step,train_task_loss,val_task_loss,balance_loss,clustering_loss,total_loss,"
            "c_intra,c_inter,overflow_rate,temperature,f_0,f_1,f_2,f_3,cluster_share_0,"
            "cluster_share_1");
  EXPECT_EQ(line, "50,1.5,1.25,0,0,0,0,0,0,1,0.5,0.25,0.25,0,0.75,0.25");
}

TEST(MetricsIoTest, FractionsCsvHasTrainAndInferenceRows) {
  std::ostringstream out;
  const std::vector<MetricsRow> rows{sample_row()};
  write_fractions_csv(out, rows, ClusterConfig(4, 2));
  std::istringstream in(out.str());
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 1u + 8u);
  EXPECT_EQ(lines[0], "step,phase,expert,cluster,fraction,within_cluster_share");
  EXPECT_EQ(lines[1], "50,train,0,0,0.5,0.66666666666666663");
  EXPECT_EQ(lines[5], "50,inference,0,0,0.25,0.5");
}

TEST(MetricsIoTest, SweepCsvAndMetadata) {
  SweepRow row;
  row.block = "cluster";
  row.value = 0.5;
  row.seed = 3;
  row.best_step = 100;
  std::ostringstream out;
  const std::vector<SweepRow> rows{row, row};
  write_sweep_csv(out, SweepAxis::kDropoutRate, rows);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')),
            "axis,block,value,seed,final_val_loss,best_val_loss,best_step,final_c_intra,"
            "overflow_rate");
  EXPECT_NE(out.str().find("dropout-rate,cluster,0.5,3,0,0,100,0,0"), std::string::npos);
  const SweepSpec spec{SweepAxis::kDropoutRate, {0.5}, {DropoutLevel::kCluster}, 1};
  const std::string meta = sweep_metadata(spec, rows);
  EXPECT_NE(meta.find("\"paired_seeds\": true"), std::string::npos);
  EXPECT_NE(meta.find("\"axis\": \"dropout-rate\""), std::string::npos);
}

}  // namespace
}  // namespace moec

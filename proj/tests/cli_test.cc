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


#include "cli.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace moec::tools {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           (std::string("moec_cli_") +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  int run(const std::vector<std::string>& args) {
    out_.str("");
    err_.str("");
    return run_cli(args, out_, err_);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  static constexpr const char* kSmall = R"({
    "seed": 4,
    "task": {"groups": 4, "train_size": 128, "validation_size": 64},
    "model": {"num_experts": 4, "cluster_size": 2, "ffn_dim": 8},
    "train": {"steps": 30, "batch_size": 32, "log_interval": 10}
  })";

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(CliTest, TrainWritesOutputs) {
  const fs::path cfg = write_config("c.json", kSmall);
  ASSERT_EQ(run({"train", "--config", cfg.string(), "--out", (dir_ / "run").string()}), kExitOk)
      << err_.str();
  const std::string metrics = slurp(dir_ / "run" / "metrics.csv");
  EXPECT_EQ(metrics.rfind("step,train_task_loss,val_task_loss", 0), 0u);
  EXPECT_TRUE(fs::exists(dir_ / "run" / "fractions.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "run" / "config.resolved.json"));
  EXPECT_TRUE(fs::exists(dir_ / "run" / "model.ckpt"));
  EXPECT_NE(out_.str().find("trained 30 steps"), std::string::npos);
}

TEST_F(CliTest, RerunIsByteIdentical) {
  const fs::path cfg = write_config("c.json", kSmall);
  ASSERT_EQ(run({"train", "--config", cfg.string(), "--out", (dir_ / "a").string(), "--quiet"}),
            kExitOk);
  ASSERT_EQ(run({"train", "--config", cfg.string(), "--out", (dir_ / "b").string(), "--quiet"}),
            kExitOk);
  EXPECT_TRUE(out_.str().empty());
  EXPECT_EQ(slurp(dir_ / "a" / "metrics.csv"), slurp(dir_ / "b" / "metrics.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "fractions.csv"), slurp(dir_ / "b" / "fractions.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "model.ckpt"), slurp(dir_ / "b" / "model.ckpt"));
}

TEST_F(CliTest, SeedFlagOverridesConfig) {
  const fs::path cfg = write_config("c.json", kSmall);
  ASSERT_EQ(run({"train", "--config", cfg.string(), "--out", (dir_ / "a").string(), "--quiet"}),
            kExitOk);
  ASSERT_EQ(run({"train", "--config", cfg.string(), "--out", (dir_ / "b").string(), "--seed",
                 "5", "--quiet"}),
            kExitOk);
  EXPECT_NE(slurp(dir_ / "a" / "metrics.csv"), slurp(dir_ / "b" / "metrics.csv"));
  EXPECT_NE(slurp(dir_ / "b" / "config.resolved.json").find("\"seed\": 5"), std::string::npos);
}

TEST_F(CliTest, DropoutRateOfOneIsAUsageError) {
  const fs::path cfg =
      write_config("bad.json", R"({"train": {"dropout_level": "cluster", "dropout_rate": 1.0}})");
  EXPECT_EQ(run({"train", "--config", cfg.string(), "--out", (dir_ / "x").string()}), kExitUsage);
  EXPECT_NE(err_.str().find("train.dropout_rate"), std::string::npos);
  EXPECT_NE(err_.str().find("dropout rate"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "x" / "metrics.csv"));
}

TEST_F(CliTest, ConfigAndUsageErrors) {
  const fs::path cfg = write_config("bad.json", R"({"model": {"experts": 4}})");
  EXPECT_EQ(run({"train", "--config", cfg.string(), "--out", dir_.string()}), kExitUsage);
  EXPECT_NE(err_.str().find("model.experts"), std::string::npos);
  EXPECT_EQ(run({"train", "--config", (dir_ / "absent.json").string(), "--out", dir_.string()}),
            kExitUsage);
  EXPECT_EQ(run({"train", "--out", dir_.string()}), kExitUsage);
  EXPECT_EQ(run({"frobnicate"}), kExitUsage);
  EXPECT_EQ(run({}), kExitUsage);
  EXPECT_EQ(run({"--help"}), kExitOk);
  EXPECT_NE(out_.str().find("check-grads"), std::string::npos);
}

TEST_F(CliTest, SweepWritesPairedRows) {
  const fs::path cfg = write_config("s.json", R"({
    "seed": 4,
    "task": {"groups": 4, "train_size": 128, "validation_size": 64},
    "model": {"num_experts": 8, "ffn_dim": 8},
    "train": {"steps": 10, "batch_size": 32, "log_interval": 5},
    "sweep": {"axis": "cluster-size", "values": [1, 4, 8], "workers": 1}
  })");
  ASSERT_EQ(run({"sweep", "--config", cfg.string(), "--out", dir_.string(), "--quiet"}), kExitOk)
      << err_.str();
  std::istringstream csv(slurp(dir_ / "sweep.csv"));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 1u + 3u);
  EXPECT_NE(slurp(dir_ / "sweep_meta.json").find("\"paired_seeds\": true"), std::string::npos);
}

TEST_F(CliTest, SweepWithoutSectionIsAUsageError) {
  const fs::path cfg = write_config("c.json", kSmall);
  EXPECT_EQ(run({"sweep", "--config", cfg.string(), "--out", dir_.string()}), kExitUsage);
}

TEST_F(CliTest, StatsReadsCheckpoint) {
  const fs::path cfg = write_config("c.json", kSmall);
  ASSERT_EQ(run({"train", "--config", cfg.string(), "--out", dir_.string(), "--quiet"}), kExitOk);
  ASSERT_EQ(run({"stats", "--config", cfg.string(), "--checkpoint",
                 (dir_ / "model.ckpt").string(), "--out", (dir_ / "stats").string()}),
            kExitOk)
      << err_.str();
  const std::string stats = slurp(dir_ / "stats" / "inference_stats.csv");
  EXPECT_EQ(stats.rfind("expert,cluster,fraction,within_cluster_share\n", 0), 0u);
  const fs::path other = write_config("o.json", R"({"model": {"num_experts": 8}})");
  EXPECT_EQ(run({"stats", "--config", other.string(), "--checkpoint",
                 (dir_ / "model.ckpt").string(), "--out", dir_.string()}),
            kExitUsage);
}

TEST_F(CliTest, GradientAndOracleChecksPass) {
  EXPECT_EQ(run({"check-grads", "--points", "5"}), kExitOk) << err_.str();
  EXPECT_NE(out_.str().find("PASS"), std::string::npos);
  EXPECT_EQ(run({"validate-oracles", "--trials", "20", "--quiet"}), kExitOk) << err_.str();
  EXPECT_EQ(run({"check-grads", "--inject-fault", "clustering-sign"}), kExitUsage);
}

}  // namespace
}  // namespace moec::tools

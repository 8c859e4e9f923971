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


#include "moec/metrics_io.h"

#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace moec {

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows,
                       const ClusterConfig& clusters) {
  out << "step,train_task_loss,val_task_loss,balance_loss,clustering_loss,total_loss,"
         "c_intra,c_inter,overflow_rate,temperature";
  for (std::size_t i = 0; i < clusters.num_experts(); ++i) out << ",f_" << i;
  for (std::size_t c = 0; c < clusters.num_clusters(); ++c) out << ",cluster_share_" << c;
  out << "\n";
  for (const MetricsRow& r : rows) {
    out << r.step;
    for (double v : {r.train_task_loss, r.val_task_loss, r.balance_loss, r.clustering_loss,
                     r.total_loss, r.c_intra, r.c_inter, r.overflow_rate, r.temperature}) {
      out << ',' << format_double(v);
    }
    for (double v : r.expert_fractions) out << ',' << format_double(v);
    for (double v : r.cluster_shares) out << ',' << format_double(v);
    out << "\n";
  }
}

void write_fractions_csv(std::ostream& out, std::span<const MetricsRow> rows,
                         const ClusterConfig& clusters) {
  out << "step,phase,expert,cluster,fraction,within_cluster_share\n";
  const auto emit = [&](std::size_t step, const char* phase, const std::vector<double>& frac,
                        const std::vector<double>& within) {
    for (std::size_t i = 0; i < frac.size(); ++i) {
      out << step << ',' << phase << ',' << i << ',' << clusters.cluster_of(i) << ','
          << format_double(frac[i]) << ',' << format_double(within[i]) << "\n";
    }
  };
  for (const MetricsRow& r : rows) {
    emit(r.step, "train", r.expert_fractions, r.within_cluster_shares);
    emit(r.step, "inference", r.val_expert_fractions, r.val_within_cluster_shares);
  }
}

void write_sweep_csv(std::ostream& out, SweepAxis axis, std::span<const SweepRow> rows) {
  out << "axis,block,value,seed,final_val_loss,best_val_loss,best_step,final_c_intra,"
         "overflow_rate\n";
  for (const SweepRow& r : rows) {
    out << to_string(axis) << ',' << r.block << ',' << format_double(r.value) << ',' << r.seed
        << ',' << format_double(r.final_val_loss) << ',' << format_double(r.best_val_loss) << ','
        << r.best_step << ',' << format_double(r.final_c_intra) << ','
        << format_double(r.overflow_rate) << "\n";
  }
}

std::string sweep_metadata(const SweepSpec& spec, std::span<const SweepRow> rows) {
  nlohmann::json doc;
  doc["axis"] = to_string(spec.axis);
  doc["values"] = spec.values;
  std::vector<std::string> blocks;
  std::set<std::uint64_t> distinct;
  nlohmann::json runs = nlohmann::json::array();
  for (const SweepRow& r : rows) {
    if (blocks.empty() || blocks.back() != r.block) blocks.push_back(r.block);
    distinct.insert(r.seed);
    runs.push_back({{"block", r.block}, {"value", r.value}, {"seed", r.seed}});
  }
  doc["blocks"] = blocks;
  doc["runs"] = runs;
  doc["paired_seeds"] = distinct.size() <= 1;
  return doc.dump(2) + "\n";
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace moec

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


// CSV writers for training and sweep output. Column orders are documented in
// docs/metrics.md. Doubles are printed with %.17g so files round-trip.

#ifndef MOEC_METRICS_IO_H_
#define MOEC_METRICS_IO_H_

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "moec/cluster_config.h"
#include "moec/experiment.h"
#include "moec/trainer.h"

namespace moec {

/// %.17g, so a double written here parses back to the same bits.
std::string format_double(double value);

/// Header: step, train_task_loss, val_task_loss, balance_loss,
/// clustering_loss, total_loss, c_intra, c_inter, overflow_rate,
/// temperature, f_0..f_{N-1}, cluster_share_0..cluster_share_{m-1}.
void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows,
                       const ClusterConfig& clusters);

/// Long format, one line per (step, phase, expert):
/// step, phase, expert, cluster, fraction, within_cluster_share.
/// `phase` is "train" (the logged training batch) or "inference" (the
/// validation pass with no experts dropped).
void write_fractions_csv(std::ostream& out, std::span<const MetricsRow> rows,
                         const ClusterConfig& clusters);

/// Header: axis, block, value, seed, final_val_loss, best_val_loss,
/// best_step, final_c_intra, overflow_rate.
void write_sweep_csv(std::ostream& out, SweepAxis axis, std::span<const SweepRow> rows);

/// JSON sidecar for a sweep: axis, values, blocks, the seed of every row and
/// whether all rows share one seed.
std::string sweep_metadata(const SweepSpec& spec, std::span<const SweepRow> rows);

/// Writes `text` to `path`, throwing std::runtime_error on I/O failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace moec

#endif  // MOEC_METRICS_IO_H_

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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "moec/config.h"
#include "moec/errors.h"
#include "moec/experiment.h"
#include "moec/metrics_io.h"
#include "moec/random.h"
#include "suites.h"

namespace moec::tools {

namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config, bool needs_out) {
  auto* config = cmd->add_option("--config", c.config, "Experiment config (JSON)");
  if (needs_config) config->required()->check(CLI::ExistingFile);
  auto* out = cmd->add_option("--out", c.out, "Output directory");
  if (needs_out) out->required();
  cmd->add_option("--seed", c.seed, "Seed; overrides the config seed");
  cmd->add_flag("--quiet", c.quiet, "Only print errors");
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

void prepare_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string());
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

int print_suite(const std::vector<SuiteLine>& lines, std::ostream& out, std::ostream& err,
                bool quiet) {
  bool ok = true;
  for (const SuiteLine& l : lines) {
    ok = ok && l.passed();
    std::ostream& sink = l.passed() ? out : err;
    if (quiet && l.passed()) continue;
    sink << (l.passed() ? "PASS " : "FAIL ") << l.name << ": max error "
         << fmt("%.3e", l.max_error) << " (tolerance " << fmt("%.0e", l.tolerance) << ", "
         << l.cases << " cases)";
    if (!l.passed()) {
      sink << ", worst case " << l.worst_case;
      if (!l.detail.empty()) sink << ", " << l.detail;
    }
    sink << "\n";
  }
  return ok ? kExitOk : kExitFailure;
}

int cmd_train(const Common& c, std::ostream& out) {
  const ExperimentConfig cfg = load(c);
  const fs::path dir(c.out);
  prepare_out(dir);
  const ExperimentResult res = run_experiment(cfg);
  const ExperimentConfig r = cfg.resolved();
  const ClusterConfig clusters(r.model.num_experts, r.model.num_clusters);
  std::ostringstream metrics, fractions;
  write_metrics_csv(metrics, res.training.rows, clusters);
  write_fractions_csv(fractions, res.training.rows, clusters);
  write_text_file(dir / "metrics.csv", metrics.str());
  write_text_file(dir / "fractions.csv", fractions.str());
  write_text_file(dir / "config.resolved.json", dump_config(cfg));
  save_checkpoint(dir / "model.ckpt", res.training.model);
  if (!c.quiet) {
    const MetricsRow& last = res.training.rows.back();
    out << "trained " << r.train.steps << " steps, seed " << r.seed << "\n"
        << "  final val loss " << fmt("%.6f", last.val_task_loss) << ", best "
        << fmt("%.6f", res.training.best_val_loss) << " at step " << res.training.best_step
        << "\n"
        << "  final C_intra " << fmt("%.3e", last.c_intra) << ", overflow rate "
        << fmt("%.4f", last.overflow_rate) << "\n"
        << "  wrote " << (dir / "metrics.csv").string() << ", fractions.csv, model.ckpt\n";
  }
  return kExitOk;
}

int cmd_sweep(const Common& c, std::ostream& out) {
  const ExperimentConfig cfg = load(c);
  if (!cfg.sweep) throw ConfigError("sweep", "config has no sweep section");
  const fs::path dir(c.out);
  prepare_out(dir);
  const std::vector<SweepRow> rows = sweep(cfg, *cfg.sweep);
  std::ostringstream csv;
  write_sweep_csv(csv, cfg.sweep->axis, rows);
  write_text_file(dir / "sweep.csv", csv.str());
  write_text_file(dir / "sweep_meta.json", sweep_metadata(*cfg.sweep, rows));
  if (!c.quiet) {
    for (const SweepRow& row : rows) {
      out << to_string(cfg.sweep->axis) << " " << row.block << " " << fmt("%g", row.value)
          << ": best val " << fmt("%.6f", row.best_val_loss) << ", final C_intra "
          << fmt("%.3e", row.final_c_intra) << "\n";
    }
    out << "wrote " << (dir / "sweep.csv").string() << "\n";
  }
  return kExitOk;
}

int cmd_stats(const Common& c, const std::string& checkpoint, std::ostream& out) {
  const ExperimentConfig cfg = load(c);
  const ExperimentConfig r = cfg.resolved();
  ToyModel model = init_model(r.model, derive_seed(r.seed, 2));
  load_checkpoint(checkpoint, model);
  const SyntheticTask data = generate_synthetic(r.task);
  std::vector<DispatchResult> dispatches;
  const double loss = evaluate(model, data.validation, r.train.batch_size, &dispatches);
  const ClusterFractions fr = cluster_fractions(dispatches, model.layer.clusters);
  const fs::path dir(c.out);
  prepare_out(dir);
  std::ostringstream csv;
  csv << "expert,cluster,fraction,within_cluster_share\n";
  for (std::size_t e = 0; e < fr.expert.size(); ++e) {
    csv << e << ',' << model.layer.clusters.cluster_of(e) << ',' << format_double(fr.expert[e])
        << ',' << format_double(fr.within_cluster[e]) << "\n";
  }
  write_text_file(dir / "inference_stats.csv", csv.str());
  if (!c.quiet) {
    out << "validation loss " << fmt("%.6f", loss) << " over " << fr.tokens << " tokens\n";
    for (std::size_t k = 0; k < fr.cluster.size(); ++k) {
      out << "  cluster " << k << " share " << fmt("%.4f", fr.cluster[k]) << "\n";
    }
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mixture-of-expert-clusters toy simulator", "moec"};
  app.require_subcommand(1);

  Common train_opts, sweep_opts, stats_opts;
  auto* train = app.add_subcommand("train", "Train one configuration");
  add_common(train, train_opts, true, true);

  auto* sweep_cmd = app.add_subcommand("sweep", "Run the sweep section of a config");
  add_common(sweep_cmd, sweep_opts, true, true);

  Common grad_opts;
  std::size_t points = 50;
  auto* grads = app.add_subcommand("check-grads", "Finite-difference gradient checks");
  add_common(grads, grad_opts, false, false);
  grads->add_option("--points", points, "Random points per loss surface")
      ->check(CLI::PositiveNumber);
  std::string fault = "none";
#ifdef MOEC_FAULT_INJECTION
  grads->add_option("--inject-fault", fault, "Corrupt a gradient on purpose")
      ->check(CLI::IsMember({"none", "clustering-sign"}));
#endif

  Common oracle_opts;
  std::size_t trials = 200;
  auto* oracles = app.add_subcommand("validate-oracles", "Compare against reference code");
  add_common(oracles, oracle_opts, false, false);
  oracles->add_option("--trials", trials, "Random cases per comparison")
      ->check(CLI::PositiveNumber);

  std::string checkpoint;
  auto* stats = app.add_subcommand("stats", "Inference routing statistics of a checkpoint");
  add_common(stats, stats_opts, true, true);
  stats->add_option("--checkpoint", checkpoint, "Checkpoint written by train")
      ->required()
      ->check(CLI::ExistingFile);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(train_opts, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_opts, out);
    if (stats->parsed()) return cmd_stats(stats_opts, checkpoint, out);
    if (grads->parsed()) {
      const GradientFault f =
          fault == "clustering-sign" ? GradientFault::kClusteringSign : GradientFault::kNone;
      return print_suite(run_gradient_suite(points, grad_opts.seed.value_or(1), f), out, err,
                         grad_opts.quiet);
    }
    if (oracles->parsed()) {
      return print_suite(run_oracle_suite(trials, oracle_opts.seed.value_or(1)), out, err,
                         oracle_opts.quiet);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TrainingError& e) {
    err << "training failed: " << e.what();
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace moec::tools

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


#include "suites.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <span>

#include "moec/autodiff.h"
#include "moec/cluster_config.h"
#include "moec/dispatch.h"
#include "moec/dropout.h"
#include "moec/gating.h"
#include "moec/grad_check.h"
#include "moec/losses.h"
#include "moec/model.h"
#include "moec/random.h"
#include "moec/trainer.h"
#include "reference/reference.h"

namespace moec::tools {

namespace {

namespace ref = moec::reference;

Matrix gaussian(std::size_t rows, std::size_t cols, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, scale);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = gauss(rng);
  return m;
}

ref::Mat to_ref(const Matrix& m) {
  ref::Mat out(m.rows(), ref::Vec(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  }
  return out;
}

ref::Vec to_ref_vec(const Matrix& m) { return {m.values().begin(), m.values().end()}; }

SuiteLine named(std::string name, double tolerance) {
  SuiteLine line;
  line.name = std::move(name);
  line.tolerance = tolerance;
  return line;
}

void record(SuiteLine& line, double err, std::size_t index, const std::string& detail = {}) {
  if (err > line.max_error || line.cases == 0) {
    line.max_error = std::max(line.max_error, err);
    line.worst_case = index;
    if (!detail.empty()) line.detail = detail;
  }
  ++line.cases;
}

double max_abs_diff(const Matrix& a, const ref::Mat& b) {
  double err = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) err = std::max(err, std::abs(a(r, c) - b[r][c]));
  }
  return err;
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

// Scores with dropped experts replaced by the sentinel, built from a leaf.
Var masked_logits(Var z, const ExpertMask& mask) {
  if (mask.survivors() == mask.size()) return z;
  Matrix keep(z.rows(), z.cols(), 1.0);
  Matrix sentinel(z.rows(), z.cols(), 0.0);
  for (std::size_t e = 0; e < mask.size(); ++e) {
    if (mask.active(e)) continue;
    for (std::size_t t = 0; t < z.rows(); ++t) {
      keep(t, e) = 0.0;
      sentinel(t, e) = kMaskedScore;
    }
  }
  Tape& tape = z.tape();
  return add(mul(z, tape.constant(keep)), tape.constant(sentinel));
}

struct LogitCase {
  Matrix logits;
  ExpertMask mask;
  std::vector<double> f;
};

// Random logits for T = 16 tokens over N = 8 experts in m = 2 clusters.
// Every fifth case makes routing nearly uniform inside each cluster; every
// third runs under a cluster-level mask.
LogitCase logit_case(std::size_t index, const ClusterConfig& clusters, std::mt19937_64& rng) {
  constexpr std::size_t kTokens = 16;
  const std::size_t n = clusters.num_experts();
  LogitCase c;
  c.logits = gaussian(kTokens, n, 1.5, rng);
  if (index % 5 == 4) {
    const Matrix base = gaussian(kTokens, clusters.num_clusters(), 1.5, rng);
    const Matrix jitter = gaussian(kTokens, n, 1e-3, rng);
    for (std::size_t t = 0; t < kTokens; ++t) {
      for (std::size_t e = 0; e < n; ++e) {
        c.logits(t, e) = base(t, clusters.cluster_of(e)) + jitter(t, e);
      }
    }
  }
  c.mask = index % 3 == 2 ? cluster_level_mask(clusters, 0.5, rng()) : inference_mask(n);
  std::uniform_int_distribution<std::size_t> pick(0, n);
  std::vector<std::size_t> assignment(kTokens);
  for (std::size_t& a : assignment) {
    a = pick(rng);
    if (a < n && !c.mask.active(a)) a = n;
  }
  c.f = token_fractions(assignment, n);
  return c;
}

std::string describe(const GradCheckReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "coordinate %zu: analytic %.9g numeric %.9g", r.worst_index,
                r.analytic, r.numeric);
  return buf;
}

SuiteLine logit_surface(const std::string& name, std::size_t points, std::uint64_t seed,
                        const std::function<Var(Var gates, const LogitCase&)>& loss,
                        bool flip_sign) {
  const ClusterConfig clusters(8, 2);
  std::mt19937_64 rng(seed);
  SuiteLine line = named(name, kGradientTolerance);
  GradientTamper tamper;
  if (flip_sign) {
    tamper = [](std::vector<double>& g) {
      for (double& v : g) v = -v;
    };
  }
  for (std::size_t i = 0; i < points; ++i) {
    const LogitCase c = logit_case(i, clusters, rng);
    const Matrix pts[] = {c.logits};
    const GradCheckReport r = check_tape_gradient(
        MultiTapeFunction([&](Tape&, std::span<const Var> leaves) {
          return loss(gate_values(masked_logits(leaves[0], c.mask), GatingKind::kSoftmax), c);
        }),
        pts, kFiniteDifferenceStep, tamper);
    record(line, r.max_rel_error, i, describe(r));
  }
  return line;
}

SuiteLine objective_surface(std::size_t points, std::uint64_t seed) {
  SuiteLine line = named("end-to-end objective", kGradientTolerance);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < points; ++i) {
    ModelConfig mc;
    mc.hidden_dim = 6;
    mc.ffn_dim = 8;
    mc.routing_dim = i % 7 == 6 ? 0 : 4;
    mc.num_experts = 4;
    mc.num_clusters = 2;
    mc.output_dim = 3;
    mc.gating = i % 4 == 3 ? GatingKind::kSigmoid : GatingKind::kSoftmax;
    mc.task = i % 2 == 1 ? TaskKind::kClassification : TaskKind::kRegression;
    ToyModel model = init_model(mc, rng());
    if (model.layer.router.log_temperature) {
      (*model.layer.router.log_temperature)[0] = std::uniform_real_distribution<>(-0.5, 0.5)(rng);
    }
    constexpr std::size_t kTokens = 12;
    const Matrix batch = gaussian(kTokens, mc.hidden_dim, 1.0, rng);
    Targets targets;
    if (mc.task == TaskKind::kRegression) {
      targets.values = gaussian(kTokens, mc.output_dim, 1.0, rng);
    } else {
      std::uniform_int_distribution<std::size_t> label(0, mc.output_dim - 1);
      for (std::size_t t = 0; t < kTokens; ++t) targets.labels.push_back(label(rng));
    }
    TrainConfig tc;
    tc.inter_cluster_coef = i % 3 == 0 ? 1.0 : 0.0;
    const ExpertMask mask = i % 5 == 2 ? cluster_level_mask(model.layer.clusters, 0.5, rng())
                                       : inference_mask(mc.num_experts);
    std::vector<Matrix> params;
    model.for_each_parameter([&params](const std::string&, const Matrix& m) {
      params.push_back(m);
    });
    const GradCheckReport r = check_tape_gradient(
        MultiTapeFunction([&](Tape& tape, std::span<const Var> leaves) {
          const BoundModel bound = bind_model(model, leaves);
          return step_objective(model, bound, tape.constant(batch), targets, mask, tc).total;
        }),
        params);
    record(line, r.max_rel_error, i, describe(r));
  }
  return line;
}

}  // namespace

std::vector<SuiteLine> run_gradient_suite(std::size_t points, std::uint64_t seed,
                                          GradientFault fault) {
  const ClusterConfig clusters(8, 2);
  const bool flip = fault == GradientFault::kClusteringSign;
  std::vector<SuiteLine> lines;
  lines.push_back(logit_surface(
      "balance loss", points, derive_seed(seed, 10),
      [](Var gates, const LogitCase& c) {
        return balance_loss(c.f, mean_routing_prob(gates), 8.0, 1.0);
      },
      false));
  lines.push_back(logit_surface(
      "clustering loss mu=0", points, derive_seed(seed, 11),
      [&clusters](Var gates, const LogitCase& c) {
        return clustering_loss(mean_routing_prob(gates), clusters, c.mask, 1.0, 0.0).loss;
      },
      flip));
  lines.push_back(logit_surface(
      "clustering loss mu=1", points, derive_seed(seed, 12),
      [&clusters](Var gates, const LogitCase& c) {
        return clustering_loss(mean_routing_prob(gates), clusters, c.mask, 1.0, 1.0).loss;
      },
      flip));
  lines.push_back(objective_surface(points, derive_seed(seed, 13)));
  return lines;
}

std::vector<SuiteLine> run_oracle_suite(std::size_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 20));
  // Exact comparisons count mismatches, so any mismatch exceeds 0.5.
  SuiteLine scores = named("routing scores", 1e-12), softmax = named("softmax gates", 1e-12),
            sigmoid = named("sigmoid gates", 1e-12), top1 = named("top-1 selection", 0.5),
            balance = named("balance loss", 1e-12),
            variance = named("intra-cluster variance", 1e-12),
            clustering = named("clustering loss", 1e-12),
            capacity = named("expert capacity", 0.5), replay = named("dispatch replay", 0.5),
            fractions = named("token fractions", 1e-12), forward = named("moe forward", 1e-10);

  std::uniform_int_distribution<std::size_t> small(1, 6);
  for (std::size_t i = 0; i < trials; ++i) {
    const std::size_t size = small(rng);
    const std::size_t m = small(rng);
    const ClusterConfig cfg(size * m, m);
    const std::size_t n = cfg.num_experts();
    const std::size_t tokens = 1 + small(rng) * 5;
    const std::size_t d = 1 + small(rng);
    const ExpertMask mask =
        i % 2 == 0 ? cluster_level_mask(cfg, 0.5, rng()) : inference_mask(n);

    // Router scores and gates.
    Tape tape;
    RouterParams rp;
    rp.expert_embeddings = gaussian(n, i % 3 == 0 ? d : 3, 1.0, rng);
    if (i % 3 != 0) rp.projection = gaussian(d, 3, 1.0, rng);
    rp.log_temperature = Matrix::scalar(std::uniform_real_distribution<>(-1.0, 1.0)(rng));
    rp.normalize = i % 3 != 0;
    const Matrix h = gaussian(tokens, d, 1.0, rng);
    const RouterVars rv = bind_router(tape, rp, false);
    Var s = routing_scores(tape.constant(h), rv, mask);
    const ref::Mat ref_s =
        ref::scores(to_ref(h), to_ref(rp.expert_embeddings),
                    rp.projection ? std::optional(to_ref(*rp.projection)) : std::nullopt,
                    (*rp.log_temperature)[0], rp.normalize, mask.keep);
    record(scores, max_abs_diff(s.value(), ref_s), i);
    Var g = gate_values(s, GatingKind::kSoftmax);
    const ref::Mat ref_g = ref::softmax(ref_s);
    record(softmax, max_abs_diff(g.value(), ref_g), i);
    record(sigmoid, max_abs_diff(gate_values(s, GatingKind::kSigmoid).value(), ref::sigmoid(ref_s)),
           i);

    // Top-1 on coarsened gates so that ties occur.
    Matrix coarse = g.value();
    for (double& v : coarse.values()) v = std::round(v * 4.0) / 4.0;
    const Selection sel = top_k_select(coarse, 1, mask);
    const std::vector<std::size_t> ref_sel = ref::top1_by_sort(to_ref(coarse), mask.keep);
    double mismatch = 0.0;
    for (std::size_t t = 0; t < tokens; ++t) mismatch += sel[t][0] != ref_sel[t] ? 1.0 : 0.0;
    record(top1, mismatch, i);

    // Losses on the mean gate vector.
    const ref::Vec p = ref::column_mean(ref_g);
    Var pv = mean_routing_prob(g);
    std::vector<std::size_t> assignment(tokens);
    std::uniform_int_distribution<std::size_t> pick(0, n);
    for (std::size_t& a : assignment) a = pick(rng);
    const std::vector<double> f = token_fractions(assignment, n);
    std::vector<std::size_t> ref_assignment = assignment;
    for (std::size_t& a : ref_assignment) {
      if (a == n) a = ref::kOverflow;
    }
    const ref::Vec ref_f = ref::histogram(ref_assignment, n);
    double frac_err = 0.0;
    for (std::size_t e = 0; e < n; ++e) frac_err = std::max(frac_err, std::abs(f[e] - ref_f[e]));
    record(fractions, frac_err, i);
    record(balance,
           rel_diff(balance_loss(f, pv, static_cast<double>(n), 0.01).scalar(),
                    ref::balance(ref_f, p, static_cast<double>(n), 0.01)),
           i);
    const double mu = i % 2 == 0 ? 0.0 : 1.0;
    const ref::Clustering rc =
        ref::clustering(p, m, mask.keep, 0.01, m >= 2 ? mu : 0.0);
    const ClusteringTerms ct = clustering_loss(pv, cfg, mask, 0.01, m >= 2 ? mu : 0.0);
    record(variance, std::abs(ct.intra.scalar() - rc.intra), i);
    record(clustering, std::abs(ct.loss.scalar() - rc.loss), i);

    // Capacity and dispatch.
    const double cf = std::uniform_real_distribution<>(0.25, 3.0)(rng);
    const std::size_t c_lib = expert_capacity(cf, tokens, n);
    const std::size_t c_ref = ref::capacity(cf, tokens, n);
    record(capacity, c_lib == c_ref ? 0.0 : 1.0, i);
    const DispatchResult dr = dispatch(g.value(), top_k_select(g.value(), 1, mask), cf, mask);
    std::vector<std::size_t> choices;
    for (const auto& row : top_k_select(g.value(), 1, mask)) choices.push_back(row[0]);
    const ref::Replay rr = ref::replay_dispatch(choices, n, c_ref);
    double dispatch_err = dr.overflow == rr.overflow ? 0.0 : 1.0;
    for (std::size_t t = 0; t < tokens; ++t) {
      const std::size_t a = dr.assignment[t] == DispatchResult::kOverflow ? ref::kOverflow
                                                                          : dr.assignment[t];
      if (a != rr.assignment[t]) dispatch_err = 1.0;
    }
    if (dr.counts != rr.counts) dispatch_err = 1.0;
    record(replay, dispatch_err, i);

    // Whole layer plus head.
    ModelConfig mc;
    mc.hidden_dim = d;
    mc.ffn_dim = 1 + small(rng);
    mc.routing_dim = i % 3 == 0 ? 0 : 3;
    mc.num_experts = n;
    mc.num_clusters = m;
    mc.output_dim = 2;
    mc.normalize = i % 3 != 0;
    mc.gating = i % 4 == 1 ? GatingKind::kSigmoid : GatingKind::kSoftmax;
    mc.capacity_factor = cf;
    ToyModel model = init_model(mc, rng());
    Tape mt;
    const BoundModel bound = bind_model(mt, model, false);
    const MoEForward fw = moe_forward(mt.constant(h), model.layer, bound, mask, true);
    const Var out = head_forward(fw.output, bound);
    ref::Model rm;
    rm.embeddings = to_ref(model.layer.router.expert_embeddings);
    if (model.layer.router.projection) rm.projection = to_ref(*model.layer.router.projection);
    rm.log_temperature =
        model.layer.router.log_temperature ? (*model.layer.router.log_temperature)[0] : 0.0;
    rm.normalize = model.layer.router.normalize;
    rm.sigmoid_gates = mc.gating == GatingKind::kSigmoid;
    for (const ExpertFFN& e : model.layer.experts) {
      rm.w1.push_back(to_ref(e.w1));
      rm.b1.push_back(to_ref_vec(e.b1));
      rm.w2.push_back(to_ref(e.w2));
      rm.b2.push_back(to_ref_vec(e.b2));
    }
    rm.head_w = to_ref(model.head.weight);
    rm.head_b = to_ref_vec(model.head.bias);
    rm.capacity_factor = cf;
    const ref::Forward rf = ref::forward(rm, to_ref(h), mask.keep);
    double fwd_err = max_abs_diff(out.value(), rf.outputs);
    for (std::size_t t = 0; t < tokens; ++t) {
      const std::size_t a = fw.dispatch.assignment[t] == DispatchResult::kOverflow
                                ? ref::kOverflow
                                : fw.dispatch.assignment[t];
      if (a != rf.assignment[t]) fwd_err = std::max(fwd_err, 1.0);
    }
    record(forward, fwd_err, i);
  }

  // Closed-form values.
  SuiteLine uniform_balance = named("balance at uniform f = p", 1e-12);
  for (std::size_t n : {2u, 4u, 8u, 16u, 64u}) {
    Tape tape;
    const std::vector<double> f(n, 1.0 / static_cast<double>(n));
    Var p = tape.constant(Matrix::row_vector(f));
    const double alpha = 0.01;
    record(uniform_balance,
           std::abs(balance_loss(f, p, static_cast<double>(n), alpha).scalar() - alpha), n);
  }
  SuiteLine fixed_clustering = named("clustering loss closed form", 1e-9);
  {
    Tape tape;
    const ClusterConfig cfg(4, 2);
    Var p = tape.constant(Matrix::row_vector(std::vector<double>{0.4, 0.2, 0.3, 0.1}));
    const double lib = clustering_loss(p, cfg, inference_mask(4), 0.01, 1.0).loss.scalar();
    const double closed = 0.01 * 4.0 * 0.01 * std::exp(-1.0 / 3.0);
    const double scripted =
        ref::clustering({0.4, 0.2, 0.3, 0.1}, 2, std::vector<bool>(4, true), 0.01, 1.0).loss;
    record(fixed_clustering, std::max(std::abs(lib - closed), std::abs(lib - scripted)), 0);
  }
  return {scores,   softmax, sigmoid,  top1,          balance,         variance,
          clustering, capacity, replay, fractions, forward, uniform_balance, fixed_clustering};
}

}  // namespace moec::tools

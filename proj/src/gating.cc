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

#include "moec/gating.h"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>
#include <utility>

#include "moec/errors.h"

namespace moec {

std::string_view to_string(GatingKind kind) {
  return kind == GatingKind::kSigmoid ? "sigmoid" : "softmax";
}

GatingKind parse_gating_kind(std::string_view text) {
  if (text == "softmax") return GatingKind::kSoftmax;
  if (text == "sigmoid") return GatingKind::kSigmoid;
  throw ContractError("unknown gating kind '" + std::string(text) + "'");
}

void RouterParams::validate(std::size_t hidden_dim) const {
  if (num_experts() == 0) throw ContractError("router needs at least one expert");
  if (projection) {
    if (projection->rows() != hidden_dim || projection->cols() != routing_dim()) {
      throw DimensionError("projection " + projection->shape_string() +
                           " does not map hidden dim " + std::to_string(hidden_dim) +
                           " to routing dim " + std::to_string(routing_dim()));
    }
  } else if (routing_dim() != hidden_dim) {
    throw DimensionError("expert embeddings have dim " + std::to_string(routing_dim()) +
                         " but tokens have dim " + std::to_string(hidden_dim));
  }
  if (log_temperature && (log_temperature->rows() != 1 || log_temperature->cols() != 1)) {
    throw DimensionError("log temperature must be 1x1");
  }
}

RouterVars bind_router(Tape& tape, const RouterParams& params, bool trainable) {
  const auto bind = [&](const Matrix& m) { return trainable ? tape.leaf(m) : tape.constant(m); };
  RouterVars vars;
  vars.expert_embeddings = bind(params.expert_embeddings);
  if (params.projection) vars.projection = bind(*params.projection);
  if (params.log_temperature) vars.log_temperature = bind(*params.log_temperature);
  vars.kind = params.kind;
  vars.normalize = params.normalize;
  return vars;
}

namespace {

Var unit_rows(Var x) {
  Var norms = sqrt(sum_rows(square(x)));
  return div(x, broadcast(norms, x.rows(), x.cols()));
}

}  // namespace

Var routing_scores(Var hidden, const RouterVars& router, const ExpertMask& mask) {
  const std::size_t tokens = hidden.rows();
  const std::size_t experts = router.expert_embeddings.rows();
  if (mask.size() != experts) {
    throw DimensionError("mask has " + std::to_string(mask.size()) + " entries for " +
                         std::to_string(experts) + " experts");
  }
  Var routed = hidden;
  if (router.projection) {
    if (hidden.cols() != router.projection->rows()) {
      throw DimensionError("token dim " + std::to_string(hidden.cols()) +
                           " does not match projection " +
                           router.projection->value().shape_string());
    }
    routed = matmul(hidden, *router.projection);
  }
  if (routed.cols() != router.expert_embeddings.cols()) {
    throw DimensionError("routing dim mismatch: tokens " + routed.value().shape_string() +
                         ", experts " + router.expert_embeddings.value().shape_string());
  }
  Var embeddings = router.expert_embeddings;
  if (router.normalize) {
    routed = unit_rows(routed);
    embeddings = unit_rows(embeddings);
  }
  Var scores = matmul(routed, transpose(embeddings));
  if (router.log_temperature) {
    Var inv_temperature = exp(neg(*router.log_temperature));
    scores = mul(scores, broadcast(inv_temperature, tokens, experts));
  }
  if (mask.survivors() == experts) return scores;

  Matrix keep(tokens, experts, 1.0);
  Matrix sentinel(tokens, experts, 0.0);
  for (std::size_t e = 0; e < experts; ++e) {
    if (mask.active(e)) continue;
    for (std::size_t t = 0; t < tokens; ++t) {
      keep(t, e) = 0.0;
      sentinel(t, e) = kMaskedScore;
    }
  }
  Tape& tape = hidden.tape();
  return add(mul(scores, tape.constant(std::move(keep))), tape.constant(std::move(sentinel)));
}

Var gate_values(Var scores, GatingKind kind) {
  const Matrix& sv = scores.value();
  for (std::size_t t = 0; t < sv.rows(); ++t) {
    const auto row = sv.row(t);
    if (std::none_of(row.begin(), row.end(), [](double s) { return s > 0.5 * kMaskedScore; })) {
      throw ContractError("token " + std::to_string(t) + " has no unmasked expert");
    }
  }
  if (kind == GatingKind::kSigmoid) return sigmoid(scores);
  Var shift = stop_gradient(max_rows(scores));
  Var numer = exp(sub(scores, broadcast(shift, sv.rows(), sv.cols())));
  return div(numer, broadcast(sum_rows(numer), sv.rows(), sv.cols()));
}

Selection top_k_select(const Matrix& gates, std::size_t k, const ExpertMask& mask) {
  if (mask.size() != gates.cols()) {
    throw DimensionError("mask length does not match gate columns");
  }
  const std::vector<std::size_t> candidates = mask.survivor_ids();
  if (k == 0 || k > candidates.size()) {
    throw ContractError("cannot select " + std::to_string(k) + " of " +
                        std::to_string(candidates.size()) + " candidate experts");
  }
  Selection selection(gates.rows());
  std::vector<std::size_t> order;
  for (std::size_t t = 0; t < gates.rows(); ++t) {
    order = candidates;
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (gates(t, a) != gates(t, b)) return gates(t, a) > gates(t, b);
                        return a < b;
                      });
    selection[t].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return selection;
}

Var combine_outputs(std::span<const ExpertBlock> blocks, Var gates, const Selection& selection,
                    std::size_t dim) {
  const std::size_t tokens = gates.rows();
  if (selection.size() != tokens) {
    throw DimensionError("selection covers " + std::to_string(selection.size()) +
                         " tokens, gates cover " + std::to_string(tokens));
  }
  std::set<std::pair<std::size_t, std::size_t>> provided;
  for (const ExpertBlock& block : blocks) {
    if (block.outputs.rows() != block.tokens.size() || block.outputs.cols() != dim) {
      throw DimensionError("expert " + std::to_string(block.expert) + " output block " +
                           block.outputs.value().shape_string() + " does not match its " +
                           std::to_string(block.tokens.size()) + " tokens");
    }
    for (std::size_t t : block.tokens) provided.emplace(t, block.expert);
  }
  std::size_t selected_pairs = 0;
  for (std::size_t t = 0; t < tokens; ++t) {
    for (std::size_t e : selection[t]) {
      ++selected_pairs;
      if (!provided.contains({t, e})) {
        throw ContractError("missing output of expert " + std::to_string(e) + " for token " +
                            std::to_string(t));
      }
    }
  }
  if (selected_pairs != provided.size()) {
    throw ContractError("expert outputs supplied for unselected tokens");
  }

  Tape& tape = gates.tape();
  Var total = tape.constant(Matrix(tokens, dim));
  for (const ExpertBlock& block : blocks) {
    if (block.tokens.empty()) continue;
    const std::vector<std::size_t> expert_col(block.tokens.size(), block.expert);
    Var weight = pick(gates, block.tokens, expert_col);
    Var weighted = mul(block.outputs, broadcast(weight, block.tokens.size(), dim));
    total = add(total, scatter_rows(weighted, block.tokens, tokens));
  }
  return total;
}

}  // namespace moec

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

// Router: token-to-expert scores, gate values, top-k selection and the
// gate-weighted combination of expert outputs.
//
// Scores are s_i = h . e_i. With `normalize` set, the token is first
// projected to the routing dimension and both the projected token and the
// expert embedding are scaled to unit length, so s_i is a cosine divided by
// the temperature. Masked experts get the kMaskedScore sentinel, which drives
// their softmax gate to exactly zero.

#ifndef MOEC_GATING_H_
#define MOEC_GATING_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "moec/autodiff.h"
#include "moec/dropout.h"
#include "moec/matrix.h"

namespace moec {

inline constexpr double kMaskedScore = -1e30;

enum class GatingKind { kSoftmax, kSigmoid };

std::string_view to_string(GatingKind kind);
GatingKind parse_gating_kind(std::string_view text);

struct RouterParams {
  /// N x routing_dim. Without a projection routing_dim equals hidden_dim.
  Matrix expert_embeddings;
  /// hidden_dim x routing_dim.
  std::optional<Matrix> projection;
  /// 1x1 log of the temperature; the temperature itself stays positive.
  std::optional<Matrix> log_temperature;
  GatingKind kind = GatingKind::kSoftmax;
  bool normalize = true;

  std::size_t num_experts() const noexcept { return expert_embeddings.rows(); }
  std::size_t routing_dim() const noexcept { return expert_embeddings.cols(); }
  /// Throws on N == 0 or inconsistent projection shape.
  void validate(std::size_t hidden_dim) const;
};

/// Router parameters recorded on a tape.
struct RouterVars {
  Var expert_embeddings;
  std::optional<Var> projection;
  std::optional<Var> log_temperature;
  GatingKind kind = GatingKind::kSoftmax;
  bool normalize = true;
};

/// Records the parameters as leaves (trainable) or constants.
RouterVars bind_router(Tape& tape, const RouterParams& params, bool trainable);

/// Per-token selected expert ids, best first.
using Selection = std::vector<std::vector<std::size_t>>;

/// T x N routing scores; masked columns hold kMaskedScore.
Var routing_scores(Var hidden, const RouterVars& router, const ExpertMask& mask);

/// Softmax (max-subtracted) or sigmoid over masked scores. Throws
/// ContractError when some token has no unmasked candidate.
Var gate_values(Var scores, GatingKind kind);

/// Indices of the k largest gate values among unmasked experts, ties broken
/// toward the lower index.
Selection top_k_select(const Matrix& gates, std::size_t k, const ExpertMask& mask);

/// Output rows of one expert for the tokens routed to it.
struct ExpertBlock {
  std::size_t expert = 0;
  std::vector<std::size_t> tokens;
  Var outputs;  // tokens.size() x dim
};

/// y_t = sum over e in selection[t] of gates(t, e) * E_e(x_t). Gate values are
/// used as-is, without renormalizing over the selection. Throws ContractError
/// if a selected (token, expert) pair has no output row.
Var combine_outputs(std::span<const ExpertBlock> blocks, Var gates, const Selection& selection,
                    std::size_t dim);

}  // namespace moec

#endif  // MOEC_GATING_H_

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

// Reverse-mode differentiation over 2-D double matrices.
//
// A Tape owns every value produced during one forward pass. Operations are
// free functions taking and returning `Var` handles; each call appends one
// record holding the output value and the rule that maps the output's
// gradient onto its inputs. `Tape::backward` walks the records once, from
// the root down to the first leaf.
//
// Every recorded value is checked for NaN/Inf and a NumericError is thrown
// at the producing operation.

#ifndef MOEC_AUTODIFF_H_
#define MOEC_AUTODIFF_H_

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "moec/matrix.h"

namespace moec {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid as long as the
/// tape is alive.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  /// Gradient of the last backward root with respect to this value. Zero
  /// for values that do not depend on a leaf; empty before any backward.
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Receives the gradient flowing into the node and accumulates it into
  /// the node's parents through `Tape::accumulate`.
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input.
  Var leaf(Matrix value);
  /// Input that never receives a gradient.
  Var constant(Matrix value);

  /// Appends an operation result. Used by the primitive implementations.
  Var record(std::string_view op, Matrix value, std::vector<Var> parents,
             BackwardFn backward);

  /// Computes d(root)/d(node) for every node. `root` must be a 1x1 value
  /// produced on this tape. Gradients from an earlier call are discarded.
  void backward(Var root);

  /// Adds `delta` into the gradient slot of `target` when it needs one.
  void accumulate(Var target, const Matrix& delta);
  bool needs_grad(Var v) const { return nodes_[v.id()].needs_grad; }

  std::size_t size() const noexcept { return nodes_.size(); }
  /// Number of records whose backward rule ran in the last backward call.
  std::size_t last_backward_visits() const noexcept { return last_visits_; }

 private:
  friend class Var;

  struct Node {
    std::string_view op;
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    std::vector<Var> parents;
    BackwardFn backward;
  };

  Var push(Node node);
  void check_owned(Var v) const;

  std::deque<Node> nodes_;
  std::size_t last_visits_ = 0;
};

// Matrix product.
Var matmul(Var a, Var b);
Var transpose(Var a);

// Elementwise binary operations on operands of identical shape.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }

// Elementwise unary operations.
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var neg(Var a);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var square(Var a);
Var relu(Var a);
Var sigmoid(Var a);

// Reductions. `sum_rows` collapses each row to one value (r x 1);
// `sum_cols` collapses each column (1 x c).
Var sum(Var a);
Var mean(Var a);
Var sum_rows(Var a);
Var sum_cols(Var a);
Var mean_cols(Var a);

/// Largest entry (1x1). The gradient goes to a single entry: the first
/// maximum in row-major order.
Var max(Var a);
/// Row-wise maximum (r x 1), lowest column index on ties.
Var max_rows(Var a);

/// Expands a 1x1, 1xc or rx1 value to rows x cols.
Var broadcast(Var a, std::size_t rows, std::size_t cols);

Var gather_cols(Var a, std::span<const std::size_t> cols);
Var gather_rows(Var a, std::span<const std::size_t> rows);
/// Places row i of `a` at row `rows[i]` of a zero matrix with `total_rows`
/// rows. Target rows must be distinct.
Var scatter_rows(Var a, std::span<const std::size_t> rows, std::size_t total_rows);
/// Entries a(rows[i], cols[i]) stacked into an n x 1 column.
Var pick(Var a, std::span<const std::size_t> rows, std::span<const std::size_t> cols);
/// Horizontal concatenation of values with equal row counts.
Var concat_cols(std::span<const Var> parts);

/// Identity in the forward pass; passes no gradient upstream.
Var stop_gradient(Var a);

}  // namespace moec

#endif  // MOEC_AUTODIFF_H_

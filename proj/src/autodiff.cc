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

#include "moec/autodiff.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "moec/errors.h"

namespace moec {

const Matrix& Var::value() const { return tape_->nodes_[id_].value; }

const Matrix& Var::grad() const { return tape_->nodes_[id_].grad; }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw DimensionError("scalar() on a " + v.shape_string() + " value");
  }
  return v[0];
}

Var Tape::push(Node node) {
  if (!node.value.all_finite()) {
    throw NumericError("non-finite value produced by '" + std::string(node.op) + "'");
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) {
    throw ContractError("value does not belong to this tape");
  }
}

Var Tape::leaf(Matrix value) {
  Node node;
  node.op = "leaf";
  node.value = std::move(value);
  node.needs_grad = true;
  return push(std::move(node));
}

Var Tape::constant(Matrix value) {
  Node node;
  node.op = "constant";
  node.value = std::move(value);
  return push(std::move(node));
}

Var Tape::record(std::string_view op, Matrix value, std::vector<Var> parents,
                 BackwardFn backward) {
  Node node;
  node.op = op;
  node.value = std::move(value);
  for (const Var& p : parents) {
    check_owned(p);
    node.needs_grad = node.needs_grad || nodes_[p.id_].needs_grad;
  }
  if (node.needs_grad) {
    node.parents = std::move(parents);
    node.backward = std::move(backward);
  }
  return push(std::move(node));
}

void Tape::accumulate(Var target, const Matrix& delta) {
  Node& node = nodes_[target.id_];
  if (!node.needs_grad) return;
  if (!delta.same_shape(node.value)) {
    throw DimensionError("gradient shape " + delta.shape_string() + " does not match value " +
                         node.value.shape_string() + " of '" + std::string(node.op) + "'");
  }
  auto g = node.grad.values();
  auto d = delta.values();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i];
}

void Tape::backward(Var root) {
  check_owned(root);
  const Matrix& rv = nodes_[root.id_].value;
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw ContractError("backward root must be a scalar, got " + rv.shape_string());
  }
  for (Node& node : nodes_) {
    node.grad = Matrix(node.value.rows(), node.value.cols());
  }
  last_visits_ = 0;
  if (!nodes_[root.id_].needs_grad) return;
  nodes_[root.id_].grad[0] = 1.0;
  for (std::size_t i = root.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.needs_grad || !node.backward) continue;
    ++last_visits_;
    node.backward(*this, node.grad);
  }
}

namespace {

void require_same_shape(std::string_view op, Var a, Var b) {
  if (!a.value().same_shape(b.value())) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.value().shape_string() +
                         " vs " + b.value().shape_string());
  }
}

Matrix transpose_matmul_left(const Matrix& a, const Matrix& g) {
  // a^T g
  Matrix out(a.cols(), g.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      for (std::size_t j = 0; j < g.cols(); ++j) out(i, j) += aki * g(k, j);
    }
  }
  return out;
}

Matrix matmul_transpose_right(const Matrix& g, const Matrix& b) {
  // g b^T
  Matrix out(g.rows(), b.rows());
  for (std::size_t i = 0; i < g.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < g.cols(); ++k) acc += g(i, k) * b(j, k);
      out(i, j) = acc;
    }
  }
  return out;
}

}  // namespace

Var matmul(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions differ " + av.shape_string() + " x " +
                         bv.shape_string());
  }
  Matrix out(av.rows(), bv.cols());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    for (std::size_t k = 0; k < av.cols(); ++k) {
      const double aik = av(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < bv.cols(); ++j) out(i, j) += aik * bv(k, j);
    }
  }
  return a.tape().record("matmul", std::move(out), {a, b},
                         [a, b](Tape& tape, const Matrix& g) {
                           if (tape.needs_grad(a)) {
                             tape.accumulate(a, matmul_transpose_right(g, b.value()));
                           }
                           if (tape.needs_grad(b)) {
                             tape.accumulate(b, transpose_matmul_left(a.value(), g));
                           }
                         });
}

Var transpose(Var a) {
  const Matrix& av = a.value();
  Matrix out(av.cols(), av.rows());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < av.cols(); ++c) out(c, r) = av(r, c);
  }
  return a.tape().record("transpose", std::move(out), {a}, [a](Tape& tape, const Matrix& g) {
    Matrix ga(g.cols(), g.rows());
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) ga(c, r) = g(r, c);
    }
    tape.accumulate(a, ga);
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return a.tape().record("add", std::move(out), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g);
    tape.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape().record("sub", std::move(out), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g);
    if (tape.needs_grad(b)) {
      Matrix ng = g;
      for (double& v : ng.values()) v = -v;
      tape.accumulate(b, ng);
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().record("mul", std::move(out), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    if (tape.needs_grad(a)) {
      Matrix ga = g;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= b.value()[i];
      tape.accumulate(a, ga);
    }
    if (tape.needs_grad(b)) {
      Matrix gb = g;
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= a.value()[i];
      tape.accumulate(b, gb);
    }
  });
}

Var div(Var a, Var b) {
  require_same_shape("div", a, b);
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= b.value()[i];
  return a.tape().record("div", std::move(out), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (tape.needs_grad(a)) {
      Matrix ga = g;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] /= bv[i];
      tape.accumulate(a, ga);
    }
    if (tape.needs_grad(b)) {
      Matrix gb = g;
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= -av[i] / (bv[i] * bv[i]);
      tape.accumulate(b, gb);
    }
  });
}

namespace {

// Elementwise op whose derivative is expressed through input and output.
template <typename F, typename DF>
Var elementwise(std::string_view op, Var a, F f, DF df) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  return a.tape().record(op, std::move(out), {a}, [a, df](Tape& tape, const Matrix& g) {
    const Matrix& av = a.value();
    Matrix ga = g;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= df(av[i]);
    tape.accumulate(a, ga);
  });
}

}  // namespace

Var scale(Var a, double factor) {
  return elementwise(
      "scale", a, [factor](double x) { return factor * x; },
      [factor](double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return elementwise(
      "add_scalar", a, [offset](double x) { return x + offset; }, [](double) { return 1.0; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var exp(Var a) {
  return elementwise(
      "exp", a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var log(Var a) {
  return elementwise(
      "log", a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var sqrt(Var a) {
  return elementwise(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double x) { return 0.5 / std::sqrt(x); });
}

Var square(Var a) {
  return elementwise(
      "square", a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var relu(Var a) {
  return elementwise(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var sigmoid(Var a) {
  return elementwise("sigmoid", a, stable_sigmoid, [](double x) {
    const double s = stable_sigmoid(x);
    return s * (1.0 - s);
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return a.tape().record("sum", Matrix::scalar(total), {a}, [a](Tape& tape, const Matrix& g) {
    tape.accumulate(a, Matrix(a.rows(), a.cols(), g[0]));
  });
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().size());
  if (a.value().empty()) throw DimensionError("mean of an empty value");
  return scale(sum(a), 1.0 / n);
}

Var sum_rows(Var a) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (double v : av.row(r)) out(r, 0) += v;
  }
  return a.tape().record("sum_rows", std::move(out), {a}, [a](Tape& tape, const Matrix& g) {
    Matrix ga(a.rows(), a.cols());
    for (std::size_t r = 0; r < ga.rows(); ++r) {
      for (double& v : ga.row(r)) v = g(r, 0);
    }
    tape.accumulate(a, ga);
  });
}

Var sum_cols(Var a) {
  const Matrix& av = a.value();
  Matrix out(1, av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < av.cols(); ++c) out(0, c) += av(r, c);
  }
  return a.tape().record("sum_cols", std::move(out), {a}, [a](Tape& tape, const Matrix& g) {
    Matrix ga(a.rows(), a.cols());
    for (std::size_t r = 0; r < ga.rows(); ++r) {
      for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) = g(0, c);
    }
    tape.accumulate(a, ga);
  });
}

Var mean_cols(Var a) {
  if (a.rows() == 0) throw DimensionError("mean_cols of a value with no rows");
  return scale(sum_cols(a), 1.0 / static_cast<double>(a.rows()));
}

Var max(Var a) {
  const Matrix& av = a.value();
  if (av.empty()) throw DimensionError("max of an empty value");
  std::size_t best = 0;
  for (std::size_t i = 1; i < av.size(); ++i) {
    if (av[i] > av[best]) best = i;
  }
  return a.tape().record("max", Matrix::scalar(av[best]), {a},
                         [a, best](Tape& tape, const Matrix& g) {
                           Matrix ga(a.rows(), a.cols());
                           ga[best] = g[0];
                           tape.accumulate(a, ga);
                         });
}

Var max_rows(Var a) {
  const Matrix& av = a.value();
  if (av.cols() == 0) throw DimensionError("max_rows of a value with no columns");
  Matrix out(av.rows(), 1);
  std::vector<std::size_t> arg(av.rows(), 0);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 1; c < av.cols(); ++c) {
      if (av(r, c) > av(r, arg[r])) arg[r] = c;
    }
    out(r, 0) = av(r, arg[r]);
  }
  return a.tape().record("max_rows", std::move(out), {a},
                         [a, arg = std::move(arg)](Tape& tape, const Matrix& g) {
                           Matrix ga(a.rows(), a.cols());
                           for (std::size_t r = 0; r < ga.rows(); ++r) ga(r, arg[r]) = g(r, 0);
                           tape.accumulate(a, ga);
                         });
}

Var broadcast(Var a, std::size_t rows, std::size_t cols) {
  const Matrix& av = a.value();
  const bool row_ok = av.rows() == 1 || av.rows() == rows;
  const bool col_ok = av.cols() == 1 || av.cols() == cols;
  if (!row_ok || !col_ok) {
    throw DimensionError("broadcast: cannot expand " + av.shape_string() + " to (" +
                         std::to_string(rows) + "x" + std::to_string(cols) + ")");
  }
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out(r, c) = av(av.rows() == 1 ? 0 : r, av.cols() == 1 ? 0 : c);
    }
  }
  return a.tape().record("broadcast", std::move(out), {a}, [a](Tape& tape, const Matrix& g) {
    Matrix ga(a.rows(), a.cols());
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) {
        ga(a.rows() == 1 ? 0 : r, a.cols() == 1 ? 0 : c) += g(r, c);
      }
    }
    tape.accumulate(a, ga);
  });
}

Var gather_cols(Var a, std::span<const std::size_t> cols) {
  const Matrix& av = a.value();
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  Matrix out(av.rows(), idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] >= av.cols()) throw DimensionError("gather_cols: column out of range");
    for (std::size_t r = 0; r < av.rows(); ++r) out(r, j) = av(r, idx[j]);
  }
  return a.tape().record("gather_cols", std::move(out), {a},
                         [a, idx = std::move(idx)](Tape& tape, const Matrix& g) {
                           Matrix ga(a.rows(), a.cols());
                           for (std::size_t j = 0; j < idx.size(); ++j) {
                             for (std::size_t r = 0; r < ga.rows(); ++r) ga(r, idx[j]) += g(r, j);
                           }
                           tape.accumulate(a, ga);
                         });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  const Matrix& av = a.value();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  Matrix out(idx.size(), av.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= av.rows()) throw DimensionError("gather_rows: row out of range");
    std::copy(av.row(idx[i]).begin(), av.row(idx[i]).end(), out.row(i).begin());
  }
  return a.tape().record("gather_rows", std::move(out), {a},
                         [a, idx = std::move(idx)](Tape& tape, const Matrix& g) {
                           Matrix ga(a.rows(), a.cols());
                           for (std::size_t i = 0; i < idx.size(); ++i) {
                             for (std::size_t c = 0; c < ga.cols(); ++c) ga(idx[i], c) += g(i, c);
                           }
                           tape.accumulate(a, ga);
                         });
}

Var scatter_rows(Var a, std::span<const std::size_t> rows, std::size_t total_rows) {
  const Matrix& av = a.value();
  if (rows.size() != av.rows()) throw DimensionError("scatter_rows: index count mismatch");
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  std::vector<bool> used(total_rows, false);
  Matrix out(total_rows, av.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= total_rows) throw DimensionError("scatter_rows: row out of range");
    if (used[idx[i]]) throw ContractError("scatter_rows: duplicate target row");
    used[idx[i]] = true;
    std::copy(av.row(i).begin(), av.row(i).end(), out.row(idx[i]).begin());
  }
  return a.tape().record("scatter_rows", std::move(out), {a},
                         [a, idx = std::move(idx)](Tape& tape, const Matrix& g) {
                           Matrix ga(a.rows(), a.cols());
                           for (std::size_t i = 0; i < idx.size(); ++i) {
                             std::copy(g.row(idx[i]).begin(), g.row(idx[i]).end(),
                                       ga.row(i).begin());
                           }
                           tape.accumulate(a, ga);
                         });
}

Var pick(Var a, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
  if (rows.size() != cols.size()) throw DimensionError("pick: index lists differ in length");
  const Matrix& av = a.value();
  std::vector<std::size_t> flat(rows.size());
  Matrix out(rows.size(), 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.rows() || cols[i] >= av.cols()) {
      throw DimensionError("pick: index out of range");
    }
    flat[i] = rows[i] * av.cols() + cols[i];
    out[i] = av[flat[i]];
  }
  return a.tape().record("pick", std::move(out), {a},
                         [a, flat = std::move(flat)](Tape& tape, const Matrix& g) {
                           Matrix ga(a.rows(), a.cols());
                           for (std::size_t i = 0; i < flat.size(); ++i) ga[flat[i]] += g[i];
                           tape.accumulate(a, ga);
                         });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols of no parts");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw DimensionError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    offsets.push_back(offset);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < p.cols(); ++c) out(r, offset + c) = p.value()(r, c);
    }
    offset += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().tape().record(
      "concat_cols", std::move(out), inputs,
      [inputs, offsets = std::move(offsets)](Tape& tape, const Matrix& g) {
        for (std::size_t k = 0; k < inputs.size(); ++k) {
          const Var& p = inputs[k];
          if (!tape.needs_grad(p)) continue;
          Matrix gp(p.rows(), p.cols());
          for (std::size_t r = 0; r < gp.rows(); ++r) {
            for (std::size_t c = 0; c < gp.cols(); ++c) gp(r, c) = g(r, offsets[k] + c);
          }
          tape.accumulate(p, gp);
        }
      });
}

Var stop_gradient(Var a) { return a.tape().record("stop_gradient", a.value(), {}, nullptr); }

}  // namespace moec

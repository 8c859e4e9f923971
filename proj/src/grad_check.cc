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

#include "moec/grad_check.h"

#include <algorithm>
#include <cmath>

#include "moec/errors.h"

namespace moec {

GradCheckReport finite_difference_check(const ScalarFunction& f,
                                        std::span<const double> point,
                                        std::span<const double> analytic, double step) {
  if (analytic.size() != point.size()) {
    throw DimensionError("finite_difference_check: gradient length differs from point");
  }
  GradCheckReport report;
  std::vector<double> x(point.begin(), point.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f(x);
    x[i] = saved - step;
    const double down = f(x);
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
    if (err > report.max_rel_error || i == 0) {
      report.max_rel_error = std::max(report.max_rel_error, err);
      report.worst_index = i;
      report.analytic = analytic[i];
      report.numeric = numeric;
    }
  }
  return report;
}

GradCheckReport check_tape_gradient(const MultiTapeFunction& build,
                                    std::span<const Matrix> points, double step,
                                    const GradientTamper& tamper) {
  std::vector<double> flat;
  std::vector<double> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const Matrix& p : points) leaves.push_back(tape.leaf(p));
    Var root = build(tape, leaves);
    tape.backward(root);
    for (std::size_t k = 0; k < leaves.size(); ++k) {
      const auto v = points[k].values();
      const auto g = leaves[k].grad().values();
      flat.insert(flat.end(), v.begin(), v.end());
      analytic.insert(analytic.end(), g.begin(), g.end());
    }
  }
  if (tamper) tamper(analytic);
  const auto evaluate = [&](std::span<const double> x) {
    Tape tape;
    std::vector<Var> leaves;
    std::size_t offset = 0;
    for (const Matrix& p : points) {
      std::vector<double> values(x.begin() + static_cast<std::ptrdiff_t>(offset),
                                 x.begin() + static_cast<std::ptrdiff_t>(offset + p.size()));
      leaves.push_back(tape.constant(Matrix(p.rows(), p.cols(), std::move(values))));
      offset += p.size();
    }
    return build(tape, leaves).scalar();
  };
  return finite_difference_check(evaluate, flat, analytic, step);
}

GradCheckReport check_tape_gradient(const TapeFunction& build, const Matrix& point,
                                    double step) {
  const Matrix points[] = {point};
  return check_tape_gradient(
      MultiTapeFunction([&build](Tape& tape, std::span<const Var> leaves) {
        return build(tape, leaves[0]);
      }),
      points, step);
}

}  // namespace moec

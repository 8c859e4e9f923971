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

#ifndef MOEC_GRAD_CHECK_H_
#define MOEC_GRAD_CHECK_H_

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "moec/autodiff.h"
#include "moec/matrix.h"

namespace moec {

inline constexpr double kFiniteDifferenceStep = 1e-6;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Compares `analytic` against central differences of `f` at `point`.
/// Error per coordinate is |analytic - numeric| / max(1, |numeric|).
GradCheckReport finite_difference_check(const ScalarFunction& f,
                                        std::span<const double> point,
                                        std::span<const double> analytic,
                                        double step = kFiniteDifferenceStep);

/// Builds a scalar on a fresh tape from one leaf.
using TapeFunction = std::function<Var(Tape&, Var)>;

/// Analytic gradient from `Tape::backward`, numeric gradient from forward
/// evaluations of the same builder.
GradCheckReport check_tape_gradient(const TapeFunction& build, const Matrix& point,
                                    double step = kFiniteDifferenceStep);

/// Several leaves at once; `points` are flattened in order. `tamper`, when
/// set, may edit the flattened analytic gradient before the comparison
/// (used to confirm that a corrupted gradient is caught).
using MultiTapeFunction = std::function<Var(Tape&, std::span<const Var>)>;
using GradientTamper = std::function<void(std::vector<double>&)>;
GradCheckReport check_tape_gradient(const MultiTapeFunction& build,
                                    std::span<const Matrix> points,
                                    double step = kFiniteDifferenceStep,
                                    const GradientTamper& tamper = {});

}  // namespace moec

#endif  // MOEC_GRAD_CHECK_H_

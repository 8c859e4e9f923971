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


#ifndef MOEC_TESTS_TEST_UTIL_H_
#define MOEC_TESTS_TEST_UTIL_H_

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>

#include "moec/matrix.h"

namespace moec::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                            double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

inline ::testing::AssertionResult MatrixNear(const Matrix& actual, const Matrix& expected,
                                             double tol) {
  if (!actual.same_shape(expected)) {
    return ::testing::AssertionFailure()
           << "shape " << actual.shape_string() << " vs " << expected.shape_string();
  }
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (!(std::abs(actual[i] - expected[i]) <= tol)) {
      return ::testing::AssertionFailure() << "entry " << i << ": " << actual[i] << " vs "
                                           << expected[i] << " (tol " << tol << ")";
    }
  }
  return ::testing::AssertionSuccess();
}

}  // namespace moec::testing

#endif  // MOEC_TESTS_TEST_UTIL_H_

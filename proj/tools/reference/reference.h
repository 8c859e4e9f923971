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


// Straightforward re-implementations of the routing math on plain vectors,
// written without any of the library code. Tests and `moec validate-oracles`
// compare the library against these.

#ifndef MOEC_TOOLS_REFERENCE_REFERENCE_H_
#define MOEC_TOOLS_REFERENCE_REFERENCE_H_

#include <cstddef>
#include <optional>
#include <vector>

namespace moec::reference {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major, rows of equal length

inline constexpr std::size_t kOverflow = static_cast<std::size_t>(-1);

/// Triple loop.
Mat matmul(const Mat& a, const Mat& b);

/// s[t][i] = <z_t, e_i> * exp(-log_temperature) with z_t = h_t W (or h_t
/// without a projection); with `normalize` the dot product is a cosine.
/// Dropped experts get -1e30.
Mat scores(const Mat& h, const Mat& embeddings, const std::optional<Mat>& projection,
           double log_temperature, bool normalize, const std::vector<bool>& keep);

/// Row softmax in long double; entries at or below -1e29 become exactly 0.
Mat softmax(const Mat& s);
Mat sigmoid(const Mat& s);

/// Best kept expert of each row by stable sort on (-gate, index).
std::vector<std::size_t> top1_by_sort(const Mat& gates, const std::vector<bool>& keep);

/// Column means.
Vec column_mean(const Mat& g);

/// alpha * n * sum f_i p_i.
double balance(const Vec& f, const Vec& p, double n, double alpha);

/// Two-pass population variance.
double variance(const Vec& v);

/// beta * N * C_intra * C_inter with experts grouped contiguously into m
/// clusters and dropped experts ignored. max and max2 come from a sorted
/// copy of the cluster means.
struct Clustering {
  double loss = 0.0;
  double intra = 0.0;
  double inter = 1.0;
};
Clustering clustering(const Vec& p, std::size_t m, const std::vector<bool>& keep, double beta,
                      double mu);

/// Smallest integer c with c * experts >= capacity_factor * tokens.
std::size_t capacity(double capacity_factor, std::size_t tokens, std::size_t experts);

/// Token-by-token replay of capacity-limited dispatch.
struct Replay {
  std::vector<std::size_t> assignment;
  std::vector<std::size_t> counts;
  std::size_t overflow = 0;
};
Replay replay_dispatch(const std::vector<std::size_t>& choices, std::size_t experts,
                       std::size_t capacity);

/// counts / tokens, with kOverflow entries skipped.
Vec histogram(const std::vector<std::size_t>& assignment, std::size_t experts);

/// One expert FFN on one token: relu(x W1 + b1) W2 + b2.
Vec expert_ffn(const Vec& x, const Mat& w1, const Vec& b1, const Mat& w2, const Vec& b2);

/// Plain parameter bundle of the toy model.
struct Model {
  Mat embeddings;
  std::optional<Mat> projection;
  double log_temperature = 0.0;
  bool normalize = true;
  bool sigmoid_gates = false;
  std::vector<Mat> w1, w2;
  std::vector<Vec> b1, b2;
  Mat head_w;
  Vec head_b;
  double capacity_factor = 2.0;
};

struct Forward {
  Mat gates;
  std::vector<std::size_t> assignment;
  Mat layer_out;  // residual included
  Mat outputs;    // after the head
};

/// Scores, gates, top-1, replayed dispatch, gate-weighted expert output plus
/// residual, then the head.
Forward forward(const Model& model, const Mat& h, const std::vector<bool>& keep);

double mse(const Mat& outputs, const Mat& targets);

}  // namespace moec::reference

#endif  // MOEC_TOOLS_REFERENCE_REFERENCE_H_

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


#include "reference.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace moec::reference {

Mat matmul(const Mat& a, const Mat& b) {
  const std::size_t n = a.size(), k = b.size(), m = b.empty() ? 0 : b[0].size();
  Mat out(n, Vec(m, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i].size() != k) throw std::invalid_argument("matmul: inner dimensions differ");
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += a[i][t] * b[t][j];
      out[i][j] = acc;
    }
  }
  return out;
}

namespace {

double norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

Mat scores(const Mat& h, const Mat& embeddings, const std::optional<Mat>& projection,
           double log_temperature, bool normalize, const std::vector<bool>& keep) {
  const Mat z = projection ? matmul(h, *projection) : h;
  Mat out(h.size(), Vec(embeddings.size(), 0.0));
  for (std::size_t t = 0; t < h.size(); ++t) {
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
      if (!keep[i]) {
        out[t][i] = -1e30;
        continue;
      }
      double dot = 0.0;
      for (std::size_t j = 0; j < z[t].size(); ++j) dot += z[t][j] * embeddings[i][j];
      if (normalize) dot /= norm(z[t]) * norm(embeddings[i]);
      out[t][i] = dot * std::exp(-log_temperature);
    }
  }
  return out;
}

Mat softmax(const Mat& s) {
  Mat out = s;
  for (Vec& row : out) {
    long double top = -INFINITY;
    for (double v : row) {
      if (v > -1e29) top = std::max<long double>(top, v);
    }
    long double total = 0.0L;
    for (double v : row) {
      if (v > -1e29) total += std::exp(static_cast<long double>(v) - top);
    }
    for (double& v : row) {
      v = v > -1e29 ? static_cast<double>(std::exp(static_cast<long double>(v) - top) / total)
                    : 0.0;
    }
  }
  return out;
}

Mat sigmoid(const Mat& s) {
  Mat out = s;
  for (Vec& row : out) {
    for (double& v : row) {
      v = v > -1e29 ? static_cast<double>(1.0L / (1.0L + std::exp(-static_cast<long double>(v))))
                    : 0.0;
    }
  }
  return out;
}

std::vector<std::size_t> top1_by_sort(const Mat& gates, const std::vector<bool>& keep) {
  std::vector<std::size_t> best;
  for (const Vec& row : gates) {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (keep[i]) ids.push_back(i);
    }
    std::stable_sort(ids.begin(), ids.end(),
                     [&row](std::size_t a, std::size_t b) { return row[a] > row[b]; });
    best.push_back(ids.empty() ? kOverflow : ids.front());
  }
  return best;
}

Vec column_mean(const Mat& g) {
  Vec out(g.empty() ? 0 : g[0].size(), 0.0);
  for (const Vec& row : g) {
    for (std::size_t i = 0; i < row.size(); ++i) out[i] += row[i];
  }
  for (double& v : out) v /= static_cast<double>(g.size());
  return out;
}

double balance(const Vec& f, const Vec& p, double n, double alpha) {
  double dot = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) dot += f[i] * p[i];
  return alpha * n * dot;
}

double variance(const Vec& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size());
}

Clustering clustering(const Vec& p, std::size_t m, const std::vector<bool>& keep, double beta,
                      double mu) {
  const std::size_t n = p.size();
  const std::size_t size = n / m;
  Clustering out;
  Vec means;
  double total_var = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    Vec members;
    for (std::size_t j = c * size; j < (c + 1) * size; ++j) {
      if (keep[j]) members.push_back(p[j]);
    }
    if (members.empty()) throw std::invalid_argument("empty cluster");
    total_var += variance(members);
    means.push_back(std::accumulate(members.begin(), members.end(), 0.0) /
                    static_cast<double>(members.size()));
  }
  out.intra = total_var / static_cast<double>(m);
  if (mu != 0.0) {
    Vec sorted = means;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    out.inter = std::exp(-mu * (sorted[0] - sorted[1]) / sorted[0]);
  }
  out.loss = beta * static_cast<double>(n) * out.intra * out.inter;
  return out;
}

std::size_t capacity(double capacity_factor, std::size_t tokens, std::size_t experts) {
  const double need = capacity_factor * static_cast<double>(tokens);
  std::size_t c = 0;
  while (static_cast<double>(c * experts) < need) ++c;
  return c;
}

Replay replay_dispatch(const std::vector<std::size_t>& choices, std::size_t experts,
                       std::size_t capacity) {
  Replay r;
  r.counts.assign(experts, 0);
  for (std::size_t e : choices) {
    if (r.counts[e] < capacity) {
      ++r.counts[e];
      r.assignment.push_back(e);
    } else {
      ++r.overflow;
      r.assignment.push_back(kOverflow);
    }
  }
  return r;
}

Vec histogram(const std::vector<std::size_t>& assignment, std::size_t experts) {
  Vec out(experts, 0.0);
  for (std::size_t e : assignment) {
    if (e != kOverflow) out[e] += 1.0;
  }
  for (double& v : out) v /= static_cast<double>(assignment.size());
  return out;
}

Vec expert_ffn(const Vec& x, const Mat& w1, const Vec& b1, const Mat& w2, const Vec& b2) {
  Vec hidden(b1);
  for (std::size_t j = 0; j < hidden.size(); ++j) {
    for (std::size_t i = 0; i < x.size(); ++i) hidden[j] += x[i] * w1[i][j];
    hidden[j] = std::max(0.0, hidden[j]);
  }
  Vec out(b2);
  for (std::size_t j = 0; j < out.size(); ++j) {
    for (std::size_t i = 0; i < hidden.size(); ++i) out[j] += hidden[i] * w2[i][j];
  }
  return out;
}

Forward forward(const Model& model, const Mat& h, const std::vector<bool>& keep) {
  Forward fw;
  const Mat s = scores(h, model.embeddings, model.projection, model.log_temperature,
                       model.normalize, keep);
  fw.gates = model.sigmoid_gates ? sigmoid(s) : softmax(s);
  const std::vector<std::size_t> choice = top1_by_sort(fw.gates, keep);
  const std::size_t n = model.embeddings.size();
  const Replay r = replay_dispatch(choice, n, capacity(model.capacity_factor, h.size(), n));
  fw.assignment = r.assignment;
  fw.layer_out = h;
  for (std::size_t t = 0; t < h.size(); ++t) {
    const std::size_t e = r.assignment[t];
    if (e == kOverflow) continue;
    const Vec y = expert_ffn(h[t], model.w1[e], model.b1[e], model.w2[e], model.b2[e]);
    for (std::size_t j = 0; j < y.size(); ++j) fw.layer_out[t][j] += fw.gates[t][e] * y[j];
  }
  fw.outputs = matmul(fw.layer_out, model.head_w);
  for (Vec& row : fw.outputs) {
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += model.head_b[j];
  }
  return fw;
}

double mse(const Mat& outputs, const Mat& targets) {
  double ss = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < outputs.size(); ++t) {
    for (std::size_t j = 0; j < outputs[t].size(); ++j) {
      const double d = outputs[t][j] - targets[t][j];
      ss += d * d;
      ++count;
    }
  }
  return ss / static_cast<double>(count);
}

}  // namespace moec::reference

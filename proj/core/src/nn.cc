// Copyright 2026 The ProxyMoE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "proxymoe/nn.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "proxymoe/error.h"

namespace proxymoe {

std::size_t param_count(const ConstParamViews& views) {
  std::size_t n = 0;
  for (const auto& v : views) n += v.size();
  return n;
}

void sgd_step(const ParamViews& dst, const ConstParamViews& grad, double lr) {
  if (dst.size() != grad.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "sgd_step: view count differs");
  }
  for (std::size_t v = 0; v < dst.size(); ++v) {
    if (dst[v].size() != grad[v].size()) {
      throw Error(ErrorKind::kDimensionMismatch, "sgd_step: view size differs");
    }
    for (std::size_t i = 0; i < dst[v].size(); ++i) dst[v][i] -= lr * grad[v][i];
  }
}

bool params_equal(const ConstParamViews& a, const ConstParamViews& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t v = 0; v < a.size(); ++v) {
    if (!std::equal(a[v].begin(), a[v].end(), b[v].begin(), b[v].end())) {
      return false;
    }
  }
  return true;
}

Dense::Dense(std::size_t in, std::size_t out)
    : weight(out, in), bias(out, 0.0) {}

Dense Dense::random(std::size_t in, std::size_t out, Rng& rng) {
  Dense d(in, out);
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& w : d.weight.mutable_entries()) w = rng.uniform(-scale, scale);
  return d;
}

Vector Dense::forward(std::span<const double> x) const {
  if (x.size() != in()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "Dense: input has " + std::to_string(x.size()) +
                    " dims, expected " + std::to_string(in()));
  }
  Vector y = bias;
  for (std::size_t o = 0; o < out(); ++o) {
    const auto row = weight.row(o);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += row[i] * x[i];
    y[o] += s;
  }
  return y;
}

Vector Dense::backward(std::span<const double> x,
                       std::span<const double> grad_out, Dense& grad) const {
  for (std::size_t o = 0; o < out(); ++o) {
    const double g = grad_out[o];
    if (g == 0.0) continue;
    auto grow = grad.weight.row(o);
    for (std::size_t i = 0; i < x.size(); ++i) grow[i] += g * x[i];
    grad.bias[o] += g;
  }
  return backward_input(grad_out);
}

Vector Dense::backward_input(std::span<const double> grad_out) const {
  Vector gx(in(), 0.0);
  for (std::size_t o = 0; o < out(); ++o) {
    const double g = grad_out[o];
    if (g == 0.0) continue;
    const auto row = weight.row(o);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * row[i];
  }
  return gx;
}

ParamViews Dense::params() { return {weight.mutable_entries(), bias}; }

ConstParamViews Dense::params() const { return {weight.entries(), bias}; }

Ffn Ffn::random(std::size_t in, std::size_t hidden, std::size_t out,
                Rng& rng) {
  Ffn f;
  f.up = Dense::random(in, hidden, rng);
  f.down = Dense::random(hidden, out, rng);
  return f;
}

Vector Ffn::forward(std::span<const double> x) const {
  Cache cache;
  return forward(x, cache);
}

Vector Ffn::forward(std::span<const double> x, Cache& cache) const {
  cache.hidden = up.forward(x);
  for (double& h : cache.hidden) h = std::max(h, 0.0);
  return down.forward(cache.hidden);
}

Vector Ffn::backward(std::span<const double> x, const Cache& cache,
                     std::span<const double> grad_out, Ffn& grad) const {
  Vector gh = down.backward(cache.hidden, grad_out, grad.down);
  for (std::size_t i = 0; i < gh.size(); ++i) {
    if (cache.hidden[i] <= 0.0) gh[i] = 0.0;
  }
  return up.backward(x, gh, grad.up);
}

ParamViews Ffn::params() {
  ParamViews v = up.params();
  for (auto s : down.params()) v.push_back(s);
  return v;
}

ConstParamViews Ffn::params() const {
  ConstParamViews v = up.params();
  for (auto s : down.params()) v.push_back(s);
  return v;
}

Ffn Ffn::zeros_like() const {
  Ffn f;
  f.up = up.zeros_like();
  f.down = down.zeros_like();
  return f;
}

Vector softmax(std::span<const double> logits) {
  Vector p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double mx = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (double& v : p) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

}  // namespace proxymoe

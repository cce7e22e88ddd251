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


// Minimal dense layers with hand-written backward passes.

#ifndef PROXYMOE_NN_H_
#define PROXYMOE_NN_H_

#include <cstddef>
#include <span>
#include <vector>

#include "proxymoe/linalg.h"
#include "proxymoe/rng.h"

namespace proxymoe {

// Flat views over every trainable array of a module, in a fixed order.
using ParamViews = std::vector<std::span<double>>;
using ConstParamViews = std::vector<std::span<const double>>;

std::size_t param_count(const ConstParamViews& views);
// dst -= lr * grad, view by view. Shapes must agree.
void sgd_step(const ParamViews& dst, const ConstParamViews& grad, double lr);
bool params_equal(const ConstParamViews& a, const ConstParamViews& b);

// y = W x + b with W stored out x in.
struct Dense {
  Matrix weight;
  Vector bias;

  Dense() = default;
  Dense(std::size_t in, std::size_t out);
  // Uniform(-1/sqrt(in), 1/sqrt(in)) weights, zero bias.
  static Dense random(std::size_t in, std::size_t out, Rng& rng);

  std::size_t in() const noexcept { return weight.cols(); }
  std::size_t out() const noexcept { return weight.rows(); }

  Vector forward(std::span<const double> x) const;
  // Accumulates parameter gradients into `grad` (same shape) and returns the
  // input gradient W^T g.
  Vector backward(std::span<const double> x, std::span<const double> grad_out,
                  Dense& grad) const;
  // Input gradient only.
  Vector backward_input(std::span<const double> grad_out) const;

  ParamViews params();
  ConstParamViews params() const;
  Dense zeros_like() const { return Dense(in(), out()); }

  friend bool operator==(const Dense&, const Dense&) = default;
};

// Two-layer feed-forward block: down(relu(up(x))).
struct Ffn {
  Dense up;
  Dense down;

  struct Cache {
    Vector hidden;  // post-ReLU activations
  };

  Ffn() = default;
  static Ffn random(std::size_t in, std::size_t hidden, std::size_t out,
                    Rng& rng);

  std::size_t in() const noexcept { return up.in(); }
  std::size_t out() const noexcept { return down.out(); }

  Vector forward(std::span<const double> x) const;
  Vector forward(std::span<const double> x, Cache& cache) const;
  Vector backward(std::span<const double> x, const Cache& cache,
                  std::span<const double> grad_out, Ffn& grad) const;

  ParamViews params();
  ConstParamViews params() const;
  Ffn zeros_like() const;

  friend bool operator==(const Ffn&, const Ffn&) = default;
};

Vector softmax(std::span<const double> logits);

}  // namespace proxymoe

#endif  // PROXYMOE_NN_H_

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


#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "proxymoe/error.h"
#include "proxymoe/privacy.h"
#include "proxymoe/rng.h"
#include "test_util.h"

namespace proxymoe {
namespace {

using testing::kind_of;

// Uniform in the ball of radius b.
Vector in_ball(std::size_t d, double b, Rng& rng) {
  Vector v = testing::random_vector(d, rng);
  const double n = norm(v);
  const double r = b * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
  for (double& x : v) x *= r / n;
  return v;
}

double distance(const Vector& a, const Vector& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

TEST(RoutingVector, HandExample) {
  const std::vector<Vector> priv = {{1, 0}, {3, 0}};
  const std::vector<Vector> proxy = {{0, 2}};
  const Vector e = routing_vector(priv, proxy);
  EXPECT_NEAR(e[0], 4.0 / 3, 1e-15);
  EXPECT_NEAR(e[1], 2.0 / 3, 1e-15);
  const Vector dec = routing_vector_decomposed(priv, proxy);
  EXPECT_NEAR(dec[0], 2.0 / 3 * 2, 1e-15);
  EXPECT_NEAR(dec[1], 1.0 / 3 * 2, 1e-15);
}

TEST(RoutingVector, EdgeCases) {
  const std::vector<Vector> none;
  const std::vector<Vector> proxy = {{0, 2}, {2, 0}};
  EXPECT_EQ(routing_vector(none, proxy), (Vector{1, 1}));
  const std::vector<Vector> same = {{0.5, -1}, {0.5, -1}, {0.5, -1}};
  EXPECT_EQ(routing_vector(same, same), (Vector{0.5, -1}));
  EXPECT_EQ(kind_of([&] { routing_vector(none, none); }), ErrorKind::kEmptyUnion);
  const std::vector<Vector> bad = {{1, 2, 3}};
  EXPECT_EQ(kind_of([&] { routing_vector(bad, proxy); }),
            ErrorKind::kDimensionMismatch);
}

TEST(RoutingVector, DecompositionIdentity) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 1 + rng.below(8);
    std::vector<Vector> priv, proxy;
    for (std::size_t i = 0, n = rng.below(20); i < n; ++i) priv.push_back(in_ball(d, 1, rng));
    for (std::size_t i = 0, m = 1 + rng.below(20); i < m; ++i) proxy.push_back(in_ball(d, 1, rng));
    const Vector a = routing_vector(priv, proxy);
    const Vector b = routing_vector_decomposed(priv, proxy);
    for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(Bounds, Formulae) {
  const SensitivityBound b = sensitivity_bound(1.0, 2, 2);
  EXPECT_DOUBLE_EQ(b.tight, 0.5);
  EXPECT_DOUBLE_EQ(b.loose, 1.0);
  const SensitivityBound z = sensitivity_bound(0.0, 5, 3);
  EXPECT_EQ(z.tight, 0.0);
  EXPECT_EQ(z.loose, 0.0);
  EXPECT_EQ(kind_of([] { sensitivity_bound(1.0, 2, 0); }), ErrorKind::kInvalidCounts);
  EXPECT_EQ(kind_of([] { sensitivity_bound(-1.0, 2, 1); }), ErrorKind::kInvalidArgument);
  EXPECT_DOUBLE_EQ(private_only_sensitivity(1.0, 2), 1.0);
  EXPECT_DOUBLE_EQ(private_only_sensitivity(1.0, 1), 2.0);
  EXPECT_EQ(kind_of([] { private_only_sensitivity(1.0, 0); }), ErrorKind::kInvalidCounts);
  EXPECT_LT(sensitivity_bound(1.0, 2, 2).tight, private_only_sensitivity(1.0, 2));
}

TEST(Bounds, OrderingAndMonotonicity) {
  for (std::size_t n = 1; n < 30; ++n) {
    double previous = INFINITY;
    for (std::size_t m = 1; m < 30; ++m) {
      const SensitivityBound b = sensitivity_bound(1.7, n, m);
      EXPECT_LE(b.tight, b.loose);
      EXPECT_LT(b.tight, private_only_sensitivity(1.7, n));
      EXPECT_LT(b.tight, previous);
      previous = b.tight;
    }
  }
}

TEST(Empirical, AntipodalWitnessIsTight) {
  const std::vector<Vector> priv = {{1, 0}, {1, 0}};
  const std::vector<Vector> proxy = {{0, 0}, {0, 0}};
  const std::vector<Vector> cand = {{-1, 0}};
  const SensitivityReport r = empirical_sensitivity(priv, proxy, cand);
  EXPECT_NEAR(r.empirical_max, 0.5, 1e-12);
  EXPECT_NEAR(r.bound, 0.5, 1e-15);
  EXPECT_TRUE(r.tightness_witness);
  EXPECT_TRUE(r.bound_holds);
  EXPECT_EQ(r.num_private, 2u);
  EXPECT_EQ(r.num_proxy, 2u);
  EXPECT_DOUBLE_EQ(r.private_only_bound, 1.0);
  EXPECT_LE(r.decomposition_residual, 1e-12);
}

TEST(Empirical, SelfReplacementIsANoOp) {
  Rng rng(2);
  std::vector<Vector> proxy;
  for (int i = 0; i < 3; ++i) proxy.push_back(in_ball(3, 1, rng));
  const std::vector<Vector> same = {{0.1, 0.2, 0.3}};
  const std::vector<Vector> priv(5, same[0]);
  EXPECT_EQ(empirical_sensitivity(priv, proxy, same).empirical_max, 0.0);
}

TEST(Empirical, RandomTrialsRespectTheBound) {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 1 + rng.below(5);
    std::vector<Vector> priv, proxy, cand;
    for (std::size_t i = 0, n = 1 + rng.below(10); i < n; ++i) priv.push_back(in_ball(d, 1, rng));
    for (std::size_t i = 0, m = 1 + rng.below(10); i < m; ++i) proxy.push_back(in_ball(d, 1, rng));
    for (int i = 0; i < 5; ++i) cand.push_back(in_ball(d, 1, rng));
    const SensitivityReport r = empirical_sensitivity(priv, proxy, cand);
    EXPECT_TRUE(r.bound_holds);
    EXPECT_LE(r.empirical_max, r.bound + 1e-12);
    EXPECT_LE(r.bound, r.loose_bound);
    EXPECT_LT(r.bound, r.private_only_bound);
    EXPECT_LE(r.decomposition_residual, 1e-12);
    // The same maximum, recomputed here.
    const Vector e = routing_vector(priv, proxy);
    double worst = 0;
    for (std::size_t i = 0; i < priv.size(); ++i) {
      for (const auto& c : cand) {
        auto swapped = priv;
        swapped[i] = c;
        worst = std::max(worst, distance(e, routing_vector(swapped, proxy)));
      }
    }
    EXPECT_NEAR(r.empirical_max, worst, 1e-12);
  }
}

TEST(Empirical, Errors) {
  const std::vector<Vector> none;
  const std::vector<Vector> one = {{1, 0}};
  EXPECT_EQ(kind_of([&] { empirical_sensitivity(none, one, one); }),
            ErrorKind::kEmptyPrivateSet);
  EXPECT_EQ(kind_of([&] { empirical_sensitivity(one, none, one); }),
            ErrorKind::kInvalidCounts);
  const std::vector<Vector> wide = {{1, 0, 0}};
  EXPECT_EQ(kind_of([&] { empirical_sensitivity(one, one, wide); }),
            ErrorKind::kDimensionMismatch);
}

TEST(Recovery, HandExample) {
  const Vector e{4.0 / 3, 2.0 / 3};
  const Vector mu_proxy{0, 2};
  const std::vector<std::size_t> ns = {2, 4};
  const auto rec = recover_private_mean(e, mu_proxy, 1, ns);
  ASSERT_EQ(rec.size(), 2u);
  EXPECT_NEAR(rec[0][0], 2.0, 1e-12);
  EXPECT_NEAR(rec[0][1], 0.0, 1e-12);
  EXPECT_NEAR(rec[1][0], 5.0 / 3, 1e-12);
  EXPECT_NEAR(rec[1][1], 1.0 / 3, 1e-12);
  const std::vector<std::size_t> zero = {0};
  EXPECT_EQ(kind_of([&] { recover_private_mean(e, mu_proxy, 1, zero); }),
            ErrorKind::kInvalidCounts);
}

TEST(Recovery, ProxyMeanIsTheOnlyIdentifiableCase) {
  const Vector mu{0.3, -0.7};
  const std::vector<std::size_t> ns = {1, 2, 7, 50};
  for (const auto& r : recover_private_mean(mu, mu, 3, ns)) {
    EXPECT_NEAR(r[0], mu[0], 1e-12);
    EXPECT_NEAR(r[1], mu[1], 1e-12);
  }
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector e = testing::random_vector(3, rng);
    const Vector p = testing::random_vector(3, rng);
    const std::vector<std::size_t> two = {1 + rng.below(20), 21 + rng.below(20)};
    const auto r = recover_private_mean(e, p, 1 + rng.below(10), two);
    EXPECT_GT(distance(r[0], r[1]), 1e-6);
  }
}

}  // namespace
}  // namespace proxymoe

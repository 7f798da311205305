/*
 * Copyright 2026 The memprior Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <cmath>
#include <limits>

#include "memprior/embedding_core.hpp"
#include "memprior/errors.hpp"
#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

using namespace memprior;

TEST_CASE("l2_normalize examples and rejected input") {
  const Vector v = l2_normalize(Vector{3.0f, 4.0f});
  CHECK(v[0] == doctest::Approx(0.6));
  CHECK(v[1] == doctest::Approx(0.8));
  CHECK(l2_normalize(Vector(5)) == Vector(5));
  CHECK(l2_normalize(Vector{1e-14f, 0.0f}) == Vector(2));
  CHECK_THROWS_AS(l2_normalize(Vector{1.0f, std::numeric_limits<float>::quiet_NaN()}), InvalidInput);
  CHECK_THROWS_AS(l2_normalize(Vector{std::numeric_limits<float>::infinity()}), InvalidInput);
}

TEST_CASE("l2_normalize: property, norm 1 and direction kept") {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const Vector g = gaussian_vector(rng, 1 + static_cast<std::size_t>(t % 40), 3.0);
    const Vector n = l2_normalize(g);
    CHECK(l2_norm(n) == doctest::Approx(1.0).epsilon(1e-6));
    const auto o = oracle::normalized(g);
    for (std::size_t i = 0; i < g.dim(); ++i) CHECK(n[i] == doctest::Approx(static_cast<double>(o[i])).epsilon(1e-6));
  }
}

TEST_CASE("inner: matches long double oracle, rejects mismatched dims") {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const Vector a = gaussian_vector(rng, 64), b = gaussian_vector(rng, 64);
    CHECK(inner(a, b) == doctest::Approx(static_cast<double>(oracle::dot(a, b))).epsilon(1e-12));
  }
  CHECK_THROWS_AS(inner(Vector(3), Vector(4)), InvalidInput);
}

TEST_CASE("weighted_combine") {
  const std::vector<Vector> vs{Vector{1.0f, 0.0f}, Vector{0.0f, 2.0f}};
  const std::vector<double> w{2.0, 0.5};
  CHECK(weighted_combine(vs, w) == Vector{2.0f, 1.0f});
}

TEST_CASE("mean_pool_region: covered centers averaged, fallback to the center cell") {
  FeatureGrid g(4, 4, 1);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) g.cell(r, c)[0] = static_cast<float>(10 * r + c);
  // centers at 0.125, 0.375, ...; box [0, 0.5]^2 covers rows/cols 0..1
  CHECK(mean_pool_region(g, {0.0, 0.0, 0.5, 0.5})[0] == doctest::Approx((0 + 1 + 10 + 11) / 4.0));
  // tiny box between centers: falls back to the cell containing its center
  CHECK(mean_pool_region(g, {0.76, 0.26, 0.8, 0.3})[0] == doctest::Approx(13.0));
  CHECK(mean_pool_region(g, {0.0, 0.0, 1.0, 1.0})[0] == doctest::Approx(16.5));
}

TEST_CASE("bilinear_sample is exact at centers and clamped outside") {
  FeatureGrid g(2, 2, 1);
  g.cell(0, 0)[0] = 0.0f;
  g.cell(0, 1)[0] = 4.0f;
  g.cell(1, 0)[0] = 8.0f;
  g.cell(1, 1)[0] = 12.0f;
  CHECK(bilinear_sample(g, {0.25, 0.25})[0] == doctest::Approx(0.0));
  CHECK(bilinear_sample(g, {0.75, 0.75})[0] == doctest::Approx(12.0));
  CHECK(bilinear_sample(g, {0.5, 0.25})[0] == doctest::Approx(2.0));
  CHECK(bilinear_sample(g, {0.5, 0.5})[0] == doctest::Approx(6.0));
  CHECK(bilinear_sample(g, {0.0, 0.0})[0] == doctest::Approx(0.0));
  CHECK(bilinear_sample(g, {1.0, 1.0})[0] == doctest::Approx(12.0));
}

TEST_CASE("gaussian_smooth matches direct 2-D convolution and keeps mass") {
  Rng rng(3);
  const ScalarMap m = fixtures::random_map(rng, 9, 13);
  CHECK(gaussian_smooth(m, 0.0) == m);
  for (double sigma : {0.5, 1.0, 2.0, 3.7}) {
    const ScalarMap s = gaussian_smooth(m, sigma);
    const auto o = oracle::gaussian_2d(m, sigma);
    double in = 0, out = 0;
    for (std::size_t i = 0; i < m.data.size(); ++i) {
      CHECK(s.data[i] == doctest::Approx(static_cast<double>(o[i])).epsilon(1e-5));
      in += m.data[i];
      out += s.data[i];
    }
    CHECK(out == doctest::Approx(in).epsilon(1e-5));
  }
  CHECK_THROWS_AS(gaussian_smooth(m, -1.0), InvalidInput);
}

TEST_CASE("gaussian_smooth: a centered impulse stays symmetric") {
  ScalarMap m(11, 11);
  m.at(5, 5) = 1.0f;
  const ScalarMap s = gaussian_smooth(m, 1.5);
  for (std::size_t r = 0; r < 11; ++r)
    for (std::size_t c = 0; c < 11; ++c) {
      CHECK(s.at(r, c) == doctest::Approx(s.at(10 - r, c)));
      CHECK(s.at(r, c) == doctest::Approx(s.at(c, r)));
    }
}

TEST_CASE("minmax_rescale keeps order and zeroes flat maps") {
  Rng rng(4);
  const ScalarMap m = fixtures::random_map(rng, 6, 7, -3.0, 5.0);
  const ScalarMap s = minmax_rescale(m);
  float lo = 1, hi = 0;
  for (float x : s.data) lo = std::min(lo, x), hi = std::max(hi, x);
  CHECK(lo == 0.0f);
  CHECK(hi == doctest::Approx(1.0));
  for (std::size_t i = 0; i + 1 < m.data.size(); ++i) CHECK((m.data[i] < m.data[i + 1]) == (s.data[i] < s.data[i + 1]));
  CHECK(minmax_rescale(ScalarMap(3, 3, 2.5f)) == ScalarMap(3, 3, 0.0f));
}

TEST_CASE("layer_norm against the oracle with gain and bias") {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    const Vector v = gaussian_vector(rng, 32, 2.0);
    const Vector one(32, 1.0f), zero(32, 0.0f);
    const Vector y = layer_norm(v, one, zero);
    const auto o = oracle::layer_norm(v, 1e-5L);
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < 32; ++i) {
      CHECK(y[i] == doctest::Approx(static_cast<double>(o[i])).epsilon(1e-5));
      mean += y[i];
    }
    mean /= 32;
    for (float x : y) var += (x - mean) * (x - mean);
    CHECK(std::abs(mean) < 1e-5);
    CHECK(var / 32 == doctest::Approx(1.0).epsilon(1e-3));
    const Vector g(32, 2.0f), b(32, -1.0f);
    const Vector z = layer_norm(v, g, b);
    for (std::size_t i = 0; i < 32; ++i) CHECK(z[i] == doctest::Approx(2.0 * y[i] - 1.0).epsilon(1e-5));
  }
  CHECK_THROWS_AS(layer_norm(Vector(4), Vector(3), Vector(4)), InvalidInput);
}

TEST_CASE("iou and box validity") {
  CHECK(iou({0, 0, 0.5, 0.5}, {0, 0, 0.5, 0.5}) == doctest::Approx(1.0));
  CHECK(iou({0, 0, 0.5, 0.5}, {0.5, 0.5, 1, 1}) == 0.0);
  CHECK(iou({0, 0, 0.5, 0.5}, {0.25, 0, 0.75, 0.5}) == doctest::Approx(1.0 / 3.0));
  CHECK_FALSE(Box2D{0.5, 0, 0.4, 1}.valid());
  CHECK_FALSE(Box2D{0, 0, 1.1, 1}.valid());
  CHECK_THROWS_AS(require_valid({0, 0.5, 1, 0.5}), InvalidInput);
}

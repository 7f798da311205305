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

#include <algorithm>
#include <cmath>
#include <limits>

#include "memprior/errors.hpp"
#include "memprior/prompt_refinement.hpp"
#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

using namespace memprior;

namespace {

// Brute force over every cell: keep those within half a window (Chebyshev) of the anchor's cell.
std::vector<long double> dense_oracle(const FeatureGrid& g, const ScalarMap& heat, const Point2D& a, long window,
                                      bool normalize) {
  const long H = static_cast<long>(g.height), W = static_cast<long>(g.width);
  const long row = std::min(H - 1, static_cast<long>(a.y * H)), col = std::min(W - 1, static_cast<long>(a.x * W));
  std::vector<long double> acc(g.dim, 0);
  long double total = 0;
  for (long r = 0; r < H; ++r)
    for (long c = 0; c < W; ++c) {
      if (std::abs(r - row) > window / 2 || std::abs(c - col) > window / 2) continue;
      const long double w = heat.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
      total += w;
      for (std::size_t d = 0; d < g.dim; ++d) acc[d] += w * g.cell(static_cast<std::size_t>(r), static_cast<std::size_t>(c))[d];
    }
  if (normalize && total > 0)
    for (auto& x : acc) x /= total;
  return acc;
}

std::vector<long double> fuse_oracle(const RefinementParams& p, std::span<const float> fs, std::span<const float> fd) {
  const std::size_t d = p.dim();
  std::vector<long double> out(d);
  for (std::size_t i = 0; i < d; ++i) {
    out[i] = p.prior[i] + oracle::dot(p.sparse_proj.row(i), fs) + oracle::dot(p.dense_proj.row(i), fd);
  }
  return out;
}

LogitsMatrix random_logits(Rng& rng, std::size_t rows, std::size_t cols) {
  LogitsMatrix m;
  for (std::size_t c = 0; c < cols; ++c) m.col_labels.push_back("c" + std::to_string(c));
  for (std::size_t r = 0; r < rows; ++r) m.row_labels.push_back("r" + std::to_string(r));
  std::normal_distribution<double> n(0.0, 3.0);
  for (std::size_t i = 0; i < rows * cols; ++i) m.values.push_back(static_cast<float>(n(rng)));
  return m;
}

}  // namespace

TEST_CASE("dense_feature equals the brute-force window sum, borders included") {
  Rng rng(70);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const std::size_t H = 3 + t % 9, W = 3 + (t * 5) % 11;
    const FeatureGrid g = fixtures::random_grid(rng, H, W, 4);
    const ScalarMap heat = fixtures::random_map(rng, H, W);
    const Point2D a{t % 10 == 0 ? 1.0 : u(rng), t % 10 == 1 ? 0.0 : u(rng)};
    const std::size_t window = 1 + 2 * static_cast<std::size_t>(t % 4);
    for (bool norm : {false, true}) {
      const Vector got = dense_feature(g, heat, a, window, norm);
      const auto want = dense_oracle(g, heat, a, static_cast<long>(window), norm);
      for (std::size_t d = 0; d < 4; ++d) CHECK(got[d] == doctest::Approx(static_cast<double>(want[d])).epsilon(1e-5));
    }
  }
  Rng r2(71);
  const FeatureGrid g = fixtures::random_grid(r2, 4, 4, 2);
  CHECK_THROWS_AS(dense_feature(g, ScalarMap(4, 4), {0.5, 0.5}, 4), InvalidInput);
  CHECK_THROWS_AS(dense_feature(g, ScalarMap(3, 4), {0.5, 0.5}, 3), InvalidInput);
  CHECK_THROWS_AS(dense_feature(g, ScalarMap(4, 4), {1.5, 0.5}, 3), InvalidInput);
  CHECK(dense_feature(g, ScalarMap(4, 4), {0.5, 0.5}, 3) == Vector(2));
}

TEST_CASE("sparse_feature is bilinear sampling") {
  Rng rng(72);
  const FeatureGrid g = fixtures::random_grid(rng, 5, 6, 3);
  CHECK(sparse_feature(g, {0.3, 0.7}) == bilinear_sample(g, {0.3, 0.7}));
  const Vector center = sparse_feature(g, {(2 + 0.5) / 6, (1 + 0.5) / 5});
  for (std::size_t d = 0; d < 3; ++d) CHECK(center[d] == doctest::Approx(g.cell(1, 2)[d]));
}

TEST_CASE("bilinear_sample is continuous") {
  Rng rng(73);
  std::uniform_real_distribution<double> u(0.0, 1.0 - 1e-6);
  const FeatureGrid g = fixtures::random_grid(rng, 9, 7, 3);
  for (int t = 0; t < 200; ++t) {
    const Point2D p{u(rng), u(rng)};
    const Vector a = bilinear_sample(g, p), b = bilinear_sample(g, {p.x + 1e-6, p.y + 1e-6});
    for (std::size_t d = 0; d < 3; ++d) CHECK(std::abs(a[d] - b[d]) < 1e-3);
  }
}

TEST_CASE("resample_heatmap: identity at equal size, exact at shared centers") {
  Rng rng(74);
  const ScalarMap h = fixtures::random_map(rng, 8, 8);
  CHECK(resample_heatmap(h, 8, 8) == h);
  const ScalarMap up = resample_heatmap(h, 16, 16);
  CHECK(up.height == 16);
  for (float v : up.data) CHECK((v >= 0.0f && v <= 1.0f));
  // a 3x3 map sampled to 1x1 lands on the middle cell center
  ScalarMap three(3, 3);
  three.at(1, 1) = 0.75f;
  CHECK(resample_heatmap(three, 1, 1).at(0, 0) == doctest::Approx(0.75));
  CHECK_THROWS_AS(resample_heatmap(h, 0, 4), InvalidInput);
}

TEST_CASE("refine_prompt fuses linearly before layer norm") {
  Rng rng(75);
  for (int t = 0; t < 100; ++t) {
    const RefinementParams p = RefinementParams::seeded(16, 1000 + static_cast<std::uint64_t>(t));
    const Vector fs = gaussian_vector(rng, 16), fd = gaussian_vector(rng, 16);
    const Vector fused = fuse_prompt(p, fs, fd);
    const auto want = fuse_oracle(p, fs, fd);
    for (std::size_t i = 0; i < 16; ++i) CHECK(fused[i] == doctest::Approx(static_cast<double>(want[i])).epsilon(1e-5));

    // superposition: u(a + b) - e == (u(a) - e) + (u(b) - e)
    const Vector gs = gaussian_vector(rng, 16), gd = gaussian_vector(rng, 16);
    Vector ss(16), sd(16);
    for (std::size_t i = 0; i < 16; ++i) ss[i] = fs[i] + gs[i], sd[i] = fd[i] + gd[i];
    const Vector a = fuse_prompt(p, fs, fd), b = fuse_prompt(p, gs, gd), ab = fuse_prompt(p, ss, sd);
    for (std::size_t i = 0; i < 16; ++i) {
      CHECK(ab[i] - p.prior[i] == doctest::Approx((a[i] - p.prior[i]) + (b[i] - p.prior[i])).epsilon(1e-5).scale(1));
    }

    const Vector out = refine_prompt(p, fs, fd);
    const auto ln = oracle::layer_norm(fused, 1e-5L);
    for (std::size_t i = 0; i < 16; ++i) CHECK(out[i] == doctest::Approx(static_cast<double>(ln[i])).epsilon(1e-4));
  }
  const RefinementParams p = RefinementParams::seeded(4, 1);
  CHECK_THROWS_AS(fuse_prompt(p, Vector(3), Vector(4)), InvalidInput);
}

TEST_CASE("zero projections reduce every prompt to layer_norm(e)") {
  Rng rng(76);
  const Vector e = gaussian_vector(rng, 8);
  RefinementParamSet set{false, {RefinementParams::zeros(e)}};
  const Vector base = layer_norm(e, Vector(8, 1.0f), Vector(8, 0.0f));
  const std::vector<FeatureGrid> scales{fixtures::random_grid(rng, 6, 6, 8), fixtures::random_grid(rng, 12, 12, 8)};
  DensePrior prior{"cup", fixtures::random_map(rng, 6, 6), 1.0};
  const AnchorSet anchors = extract_anchors(prior, 0.3, 0.2, 5);
  REQUIRE(!anchors.anchors.empty());
  const auto prompts = refine_all(scales, prior, anchors, set, "cup");
  CHECK(prompts.size() == 2 * anchors.anchors.size());
  for (const auto& p : prompts) CHECK(p.embedding == base);
}

TEST_CASE("refine_all: order is scale-major then anchor order, independent of anchor permutation") {
  Rng rng(77);
  const RefinementParamSet set{false, {RefinementParams::seeded(6, 5)}};
  const std::vector<FeatureGrid> scales{fixtures::random_grid(rng, 8, 8, 6), fixtures::random_grid(rng, 4, 4, 6)};
  DensePrior prior{"cup", minmax_rescale(gaussian_smooth(fixtures::random_map(rng, 8, 8), 1.0)), 1.0};
  AnchorSet anchors = extract_anchors(prior, 0.0, 0.15, 6);
  REQUIRE(anchors.anchors.size() >= 3);
  const auto out = refine_all(scales, prior, anchors, set, "cup");
  REQUIRE(out.size() == 2 * anchors.anchors.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].scale_index == i / anchors.anchors.size());
    CHECK(out[i].anchor == anchors.anchors[i % anchors.anchors.size()].point);
    CHECK(out[i].source_category == "cup");
  }
  AnchorSet rev = anchors;
  std::reverse(rev.anchors.begin(), rev.anchors.end());
  const auto back = refine_all(scales, prior, rev, set, "cup");
  for (const auto& p : out) {
    CHECK(std::any_of(back.begin(), back.end(), [&](const MemoryGuidedPrompt& q) {
      return q.embedding == p.embedding && q.anchor == p.anchor && q.scale_index == p.scale_index;
    }));
  }
  CHECK(refine_all(scales, prior, AnchorSet{"cup", {}}, set, "cup").empty());
}

TEST_CASE("refine_all at the heatmap's own resolution matches the single-scale oracle") {
  Rng rng(78);
  const RefinementParams p = RefinementParams::seeded(5, 9);
  const RefinementParamSet set{false, {p}};
  const std::vector<FeatureGrid> scales{fixtures::random_grid(rng, 7, 7, 5)};
  DensePrior prior{"cup", fixtures::random_map(rng, 7, 7), 1.0};
  const AnchorSet anchors = extract_anchors(prior, 0.2, 0.2, 4);
  const auto out = refine_all(scales, prior, anchors, set, "cup");
  for (std::size_t j = 0; j < out.size(); ++j) {
    const auto& a = anchors.anchors[j].point;
    const auto fd = dense_oracle(scales[0], prior.heatmap, a, 5, false);
    Vector fdv(5);
    for (std::size_t d = 0; d < 5; ++d) fdv[d] = static_cast<float>(fd[d]);
    const Vector want = refine_prompt(p, bilinear_sample(scales[0], a), fdv);
    for (std::size_t d = 0; d < 5; ++d) CHECK(out[j].embedding[d] == doctest::Approx(want[d]).epsilon(1e-5));
  }
}

TEST_CASE("per-scale parameter sets") {
  Rng rng(79);
  RefinementParamSet set{true, {RefinementParams::seeded(4, 1), RefinementParams::seeded(4, 2)}};
  CHECK(&set.for_scale(1) == &set.sets[1]);
  CHECK_THROWS_AS(set.for_scale(2), InvalidInput);
  set.per_scale = false;
  CHECK(&set.for_scale(7) == &set.sets[0]);
  CHECK_THROWS_AS(RefinementParamSet{}.for_scale(0), InvalidInput);
  RefinementParams bad = RefinementParams::seeded(4, 3);
  bad.window = 4;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  bad = RefinementParams::seeded(4, 3);
  bad.ln_gain = Vector(3);
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  CHECK(RefinementParams::seeded(4, 3) == RefinementParams::seeded(4, 3));
}

TEST_CASE("score_prompts and constrain_logits") {
  std::vector<MemoryGuidedPrompt> prompts(2);
  prompts[0].embedding = Vector{1.0f, 0.0f};
  prompts[0].source_category = "cup";
  prompts[1].embedding = Vector{0.0f, 2.0f};
  prompts[1].source_category = "fork";
  const CategoryTable head{{"cup", Vector{1.0f, 1.0f}}, {"fork", Vector{3.0f, 0.0f}}};
  const LogitsMatrix m = score_prompts(prompts, head);
  CHECK(m.values == std::vector<float>{1.0f, 3.0f, 2.0f, 0.0f});
  CHECK(m.row_labels == std::vector<std::string>{"cup#0", "fork#1"});
  CHECK(m.argmax(0) == 1);

  const std::vector<std::optional<std::string>> src{std::string("cup"), std::nullopt};
  const LogitsMatrix c = constrain_logits(m, src);
  CHECK(c.at(0, 0) == 1.0f);
  CHECK(std::isinf(c.at(0, 1)));
  CHECK(c.argmax(0) == 0);
  CHECK(c.at(1, 0) == 2.0f);
  CHECK(c.at(1, 1) == 0.0f);

  const std::vector<std::optional<std::string>> bad{std::string("spoon"), std::nullopt};
  CHECK_THROWS_AS(constrain_logits(m, bad), InvalidInput);
  CHECK_THROWS_AS(constrain_logits(m, std::vector<std::optional<std::string>>{}), InvalidInput);
  CHECK_THROWS_AS(score_prompts(prompts, CategoryTable{{"a", Vector(2)}, {"a", Vector(2)}}), InvalidInput);
  CHECK_THROWS_AS(score_prompts(prompts, CategoryTable{{"a", Vector(3)}}), MissingEmbedding);
}

TEST_CASE("constrain_logits property: constrained rows keep exactly their source column") {
  Rng rng(80);
  for (int t = 0; t < 100; ++t) {
    const std::size_t rows = 1 + t % 9, cols = 1 + (t * 3) % 7;
    const LogitsMatrix m = random_logits(rng, rows, cols);
    std::vector<std::optional<std::string>> src(rows);
    std::uniform_int_distribution<std::size_t> pick(0, cols);
    for (auto& s : src) {
      const std::size_t c = pick(rng);
      if (c < cols) s = "c" + std::to_string(c);
    }
    const LogitsMatrix out = constrain_logits(m, src);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        if (!src[r]) {
          CHECK(out.at(r, c) == m.at(r, c));
        } else if (out.col_labels[c] == *src[r]) {
          CHECK(out.at(r, c) == m.at(r, c));
          CHECK(out.argmax(r) == c);
        } else {
          CHECK(out.at(r, c) == -std::numeric_limits<float>::infinity());
        }
      }
    }
  }
}

TEST_CASE("parameter file round trip and corruption") {
  fixtures::TempDir dir("params");
  const RefinementParamSet set{true, {RefinementParams::seeded(6, 1), RefinementParams::seeded(6, 2)}};
  save_params(set, dir / "p.pprm");
  CHECK(load_params(dir / "p.pprm") == set);
  const auto bytes = encode_params(set);
  for (std::size_t i = 0; i < bytes.size(); i += 13) {
    auto bad = bytes;
    bad[i] ^= 0x80;
    CHECK_THROWS_AS(decode_params(bad), FormatError);
  }
  CHECK_THROWS_AS(decode_params(std::span(bytes.data(), 10)), FormatError);
}

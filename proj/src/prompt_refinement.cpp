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

#include "memprior/prompt_refinement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "memprior/binary_io.hpp"
#include "memprior/errors.hpp"
#include "memprior/random.hpp"

namespace memprior {

void RefinementParams::validate() const {
  const std::size_t d = prior.dim();
  if (d == 0) throw InvalidInput("refinement params: empty prompt prior");
  if (sparse_proj.rows != d || sparse_proj.cols != d || dense_proj.rows != d || dense_proj.cols != d) {
    throw InvalidInput("refinement params: projections must be " + std::to_string(d) + "x" + std::to_string(d));
  }
  if (ln_gain.dim() != d || ln_bias.dim() != d) throw InvalidInput("refinement params: layer-norm shape mismatch");
  if (!(ln_eps > 0.0)) throw InvalidInput("refinement params: ln_eps must be > 0");
  if (window == 0 || window % 2 == 0) throw InvalidInput("refinement params: window must be odd");
}

RefinementParams RefinementParams::zeros(const Vector& prior) {
  const std::size_t d = prior.dim();
  return {prior, Matrix(d, d), Matrix(d, d), Vector(d, 1.0f), Vector(d, 0.0f)};
}

RefinementParams RefinementParams::seeded(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  RefinementParams p = zeros(gaussian_vector(rng, dim));
  std::normal_distribution<double> normal(0.0, scale);
  for (float& x : p.sparse_proj.data) x = static_cast<float>(normal(rng));
  for (float& x : p.dense_proj.data) x = static_cast<float>(normal(rng));
  return p;
}

const RefinementParams& RefinementParamSet::for_scale(std::size_t scale) const {
  if (sets.empty()) throw InvalidInput("refinement parameter set is empty");
  if (!per_scale) return sets.front();
  if (scale >= sets.size()) throw InvalidInput("no refinement parameters for scale " + std::to_string(scale));
  return sets[scale];
}

std::size_t LogitsMatrix::argmax(std::size_t row) const {
  std::size_t best = 0;
  for (std::size_t c = 1; c < cols(); ++c) {
    if (at(row, c) > at(row, best)) best = c;
  }
  return best;
}

Vector sparse_feature(const FeatureGrid& features, const Point2D& anchor) { return bilinear_sample(features, anchor); }

Vector dense_feature(const FeatureGrid& features, const ScalarMap& heat, const Point2D& anchor, std::size_t window,
                     bool normalize) {
  if (heat.height != features.height || heat.width != features.width) {
    throw InvalidInput("dense_feature: heatmap and feature grid shapes differ");
  }
  if (window == 0 || window % 2 == 0) throw InvalidInput("dense_feature: window must be odd");
  if (!(anchor.x >= 0.0 && anchor.x <= 1.0 && anchor.y >= 0.0 && anchor.y <= 1.0)) {
    throw InvalidInput("dense_feature: anchor outside [0,1]^2");
  }
  const auto H = static_cast<std::ptrdiff_t>(features.height), W = static_cast<std::ptrdiff_t>(features.width);
  const auto row = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(std::floor(anchor.y * static_cast<double>(H))), H - 1);
  const auto col = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(std::floor(anchor.x * static_cast<double>(W))), W - 1);
  const auto half = static_cast<std::ptrdiff_t>(window / 2);

  std::vector<double> acc(features.dim, 0.0);
  double heat_total = 0.0;
  for (std::ptrdiff_t r = std::max<std::ptrdiff_t>(0, row - half); r <= std::min(H - 1, row + half); ++r) {
    for (std::ptrdiff_t c = std::max<std::ptrdiff_t>(0, col - half); c <= std::min(W - 1, col + half); ++c) {
      const double w = heat.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
      heat_total += w;
      if (w == 0.0) continue;
      const auto f = features.cell(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
      for (std::size_t d = 0; d < features.dim; ++d) acc[d] += w * f[d];
    }
  }
  const double scale = (normalize && heat_total > 0.0) ? 1.0 / heat_total : 1.0;
  Vector out(features.dim);
  for (std::size_t d = 0; d < features.dim; ++d) out[d] = static_cast<float>(acc[d] * scale);
  return out;
}

ScalarMap resample_heatmap(const ScalarMap& heat, std::size_t target_height, std::size_t target_width) {
  if (target_height == 0 || target_width == 0) throw InvalidInput("resample_heatmap: target size must be >= 1");
  if (heat.height == target_height && heat.width == target_width) return heat;
  FeatureGrid src(heat.height, heat.width, 1);
  src.data = heat.data;
  ScalarMap out(target_height, target_width);
  for (std::size_t r = 0; r < target_height; ++r) {
    for (std::size_t c = 0; c < target_width; ++c) {
      const Point2D p{(static_cast<double>(c) + 0.5) / static_cast<double>(target_width),
                      (static_cast<double>(r) + 0.5) / static_cast<double>(target_height)};
      out.at(r, c) = bilinear_sample(src, p)[0];
    }
  }
  return out;
}

Vector fuse_prompt(const RefinementParams& params, std::span<const float> sparse, std::span<const float> dense) {
  const std::size_t d = params.dim();
  if (sparse.size() != d || dense.size() != d) {
    throw InvalidInput("refine_prompt: feature dim must equal prompt dim " + std::to_string(d));
  }
  if (params.sparse_proj.rows != d || params.sparse_proj.cols != d || params.dense_proj.rows != d ||
      params.dense_proj.cols != d) {
    throw InvalidInput("refine_prompt: projection shape mismatch");
  }
  Vector out(d);
  for (std::size_t i = 0; i < d; ++i) {
    out[i] = static_cast<float>(params.prior[i] + inner_unchecked(params.sparse_proj.row(i).data(), sparse.data(), d) +
                                inner_unchecked(params.dense_proj.row(i).data(), dense.data(), d));
  }
  return out;
}

Vector refine_prompt(const RefinementParams& params, std::span<const float> sparse, std::span<const float> dense) {
  return layer_norm(fuse_prompt(params, sparse, dense), params.ln_gain, params.ln_bias, params.ln_eps);
}

std::vector<MemoryGuidedPrompt> refine_all(std::span<const FeatureGrid> scales, const DensePrior& prior,
                                           const AnchorSet& anchors, const RefinementParamSet& params,
                                           const std::string& category, bool normalize_dense) {
  std::vector<MemoryGuidedPrompt> out;
  if (anchors.anchors.empty()) return out;
  out.reserve(scales.size() * anchors.anchors.size());
  for (std::size_t s = 0; s < scales.size(); ++s) {
    const auto& grid = scales[s];
    const auto& p = params.for_scale(s);
    const ScalarMap heat = resample_heatmap(prior.heatmap, grid.height, grid.width);
    for (const auto& a : anchors.anchors) {
      const Vector fs = sparse_feature(grid, a.point);
      const Vector fd = dense_feature(grid, heat, a.point, p.window, normalize_dense);
      out.push_back({refine_prompt(p, fs, fd), category, a.point, s});
    }
  }
  return out;
}

LogitsMatrix score_prompts(std::span<const MemoryGuidedPrompt> prompts, const CategoryTable& categories) {
  LogitsMatrix m;
  for (const auto& [name, emb] : categories) {
    if (std::find(m.col_labels.begin(), m.col_labels.end(), name) != m.col_labels.end()) {
      throw InvalidInput("score_prompts: duplicate category \"" + name + "\"");
    }
    m.col_labels.push_back(name);
  }
  m.values.reserve(prompts.size() * categories.size());
  for (std::size_t j = 0; j < prompts.size(); ++j) {
    m.row_labels.push_back(prompts[j].source_category + "#" + std::to_string(j));
    for (const auto& [name, emb] : categories) {
      if (emb.dim() != prompts[j].embedding.dim()) {
        throw MissingEmbedding("score_prompts: no embedding of dim " + std::to_string(prompts[j].embedding.dim()) +
                               " for category \"" + name + "\"");
      }
      m.values.push_back(static_cast<float>(inner(prompts[j].embedding, emb)));
    }
  }
  return m;
}

LogitsMatrix constrain_logits(const LogitsMatrix& logits, std::span<const std::optional<std::string>> sources) {
  if (sources.size() != logits.rows()) throw InvalidInput("constrain_logits: one source per row required");
  LogitsMatrix out = logits;
  constexpr float kMasked = -std::numeric_limits<float>::infinity();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    if (!sources[r]) continue;
    const auto it = std::find(out.col_labels.begin(), out.col_labels.end(), *sources[r]);
    if (it == out.col_labels.end()) {
      throw InvalidInput("constrain_logits: source category \"" + *sources[r] + "\" is not a candidate");
    }
    const auto keep = static_cast<std::size_t>(it - out.col_labels.begin());
    for (std::size_t c = 0; c < out.cols(); ++c) {
      if (c != keep) out.at(r, c) = kMasked;
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_params(const RefinementParamSet& params) {
  if (params.sets.empty()) throw InvalidInput("encode_params: empty parameter set");
  const std::size_t d = params.dim();
  io::ByteWriter w;
  w.magic("PPRM");
  w.u32(kParamsVersion);
  w.u32(static_cast<std::uint32_t>(d));
  w.u32(params.per_scale ? 1u : 0u);
  w.u32(static_cast<std::uint32_t>(params.sets.size()));
  for (const auto& p : params.sets) {
    p.validate();
    if (p.dim() != d) throw InvalidInput("encode_params: parameter sets differ in dimension");
    w.f32s(p.prior.span());
    w.f32s(p.sparse_proj.data);
    w.f32s(p.dense_proj.data);
    w.f32s(p.ln_gain.span());
    w.f32s(p.ln_bias.span());
  }
  w.append_crc32();
  return w.bytes();
}

RefinementParamSet decode_params(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("PPRM");
  r.expect_version(kParamsVersion);
  r.verify_crc32_trailer();
  const std::uint32_t d = r.u32();
  const std::size_t flags_at = r.offset();
  const std::uint32_t flags = r.u32();
  if (flags > 1) throw FormatError("unknown parameter flags", flags_at);
  const std::uint32_t n = r.u32();
  if (d == 0 || n == 0) throw FormatError("empty parameter file", r.offset());
  const std::uint64_t set_bytes = 4ull * (3ull * d + 2ull * d * d);
  r.require_remaining(n, set_bytes, "parameter sets");
  RefinementParamSet out;
  out.per_scale = (flags & 1u) != 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    RefinementParams p = RefinementParams::zeros(Vector(d));
    r.f32s(p.prior.span());
    r.f32s(p.sparse_proj.data);
    r.f32s(p.dense_proj.data);
    r.f32s(p.ln_gain.span());
    r.f32s(p.ln_bias.span());
    out.sets.push_back(std::move(p));
  }
  r.expect_end();
  return out;
}

void save_params(const RefinementParamSet& params, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_params(params));
}

RefinementParamSet load_params(const std::filesystem::path& path) { return decode_params(io::read_file(path)); }

}  // namespace memprior

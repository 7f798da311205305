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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "memprior/embedding_core.hpp"
#include "memprior/priors.hpp"
#include "memprior/types.hpp"

namespace memprior {

/// Prompt prior e, sparse/dense projections and layer-norm affine terms for one feature scale.
struct RefinementParams {
  Vector prior;           ///< e, dim D
  Matrix sparse_proj;     ///< W_s, D x D
  Matrix dense_proj;      ///< W_d, D x D
  Vector ln_gain;
  Vector ln_bias;
  double ln_eps = kLayerNormEpsilon;
  std::size_t window = 5;  ///< odd side length of the dense window, in cells

  std::size_t dim() const noexcept { return prior.dim(); }
  bool operator==(const RefinementParams&) const = default;
  /// Throws InvalidInput on inconsistent shapes, non-positive eps or an even window.
  void validate() const;

  /// W_s = W_d = 0, gain 1, bias 0.
  static RefinementParams zeros(const Vector& prior);
  /// Seeded Gaussian prior and projections (scaled by 1/sqrt(D)), gain 1, bias 0.
  static RefinementParams seeded(std::size_t dim, std::uint64_t seed);
};

/// One shared parameter set for all scales, or one per scale.
struct RefinementParamSet {
  bool per_scale = false;
  std::vector<RefinementParams> sets;

  const RefinementParams& for_scale(std::size_t scale) const;
  bool operator==(const RefinementParamSet&) const = default;
  std::size_t dim() const { return sets.empty() ? 0 : sets.front().dim(); }
};

/// Refined prompt bound to the category whose prior produced it.
struct MemoryGuidedPrompt {
  Vector embedding;
  std::string source_category;
  Point2D anchor;
  std::size_t scale_index = 0;
};

/// Rows are prompts, columns candidate categories. Entries may be -infinity.
struct LogitsMatrix {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<float> values;

  std::size_t rows() const noexcept { return row_labels.size(); }
  std::size_t cols() const noexcept { return col_labels.size(); }
  float& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  float at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
  /// Column of the row maximum, first on ties.
  std::size_t argmax(std::size_t row) const;
};

/// Ordered candidate categories with their embeddings in the prompt space.
using CategoryTable = std::vector<std::pair<std::string, Vector>>;

/// Bilinear sample of the detector features at the anchor.
Vector sparse_feature(const FeatureGrid& features, const Point2D& anchor);

/// Sum of heat * feature over the window x window block around the anchor's cell, clipped at
/// borders. With normalize set the sum is divided by the window's total heat (when positive).
Vector dense_feature(const FeatureGrid& features, const ScalarMap& heat, const Point2D& anchor, std::size_t window,
                     bool normalize = false);

/// Bilinear resampling under the cell-center convention; identity when the shape already matches.
ScalarMap resample_heatmap(const ScalarMap& heat, std::size_t target_height, std::size_t target_width);

/// e + W_s f_s + W_d f_d, before layer normalization.
Vector fuse_prompt(const RefinementParams& params, std::span<const float> sparse, std::span<const float> dense);

/// LN(e + W_s f_s + W_d f_d).
Vector refine_prompt(const RefinementParams& params, std::span<const float> sparse, std::span<const float> dense);

/// Refines every anchor at every scale; output ordered by (scale, anchor rank).
std::vector<MemoryGuidedPrompt> refine_all(std::span<const FeatureGrid> scales, const DensePrior& prior,
                                           const AnchorSet& anchors, const RefinementParamSet& params,
                                           const std::string& category, bool normalize_dense = false);

/// Stand-in classification head: s_j(c) = <z_j, embedding(c)>.
LogitsMatrix score_prompts(std::span<const MemoryGuidedPrompt> prompts, const CategoryTable& categories);

/// Sets every non-source logit of a constrained row to -infinity. A nullopt source marks one of
/// the detector's original prompts, which stays unconstrained.
LogitsMatrix constrain_logits(const LogitsMatrix& logits, std::span<const std::optional<std::string>> sources);

// Parameter file ("PPRM"), little-endian: magic, u32 version, u32 dim, u32 flags (bit 0: per-scale),
// u32 set count, then per set: e (dim f32), W_s (dim x dim f32 row-major), W_d (dim x dim f32),
// LN gain (dim f32), LN bias (dim f32); u32 crc32 of all preceding bytes.
// ln_eps and window are run configuration and are not stored.
inline constexpr std::uint32_t kParamsVersion = 1;

std::vector<std::uint8_t> encode_params(const RefinementParamSet& params);
RefinementParamSet decode_params(std::span<const std::uint8_t> bytes);
void save_params(const RefinementParamSet& params, const std::filesystem::path& path);
RefinementParamSet load_params(const std::filesystem::path& path);

}  // namespace memprior

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

#include <span>

#include "memprior/types.hpp"

namespace memprior {

/// Norms at or below this are treated as zero; normalizing such a vector yields the zero vector.
inline constexpr double kNormEpsilon = 1e-12;

/// Default layer-norm epsilon.
inline constexpr double kLayerNormEpsilon = 1e-5;

double l2_norm(std::span<const float> v);

/// v / ||v||, or the zero vector when ||v|| <= kNormEpsilon. Non-finite input throws InvalidInput.
Vector l2_normalize(std::span<const float> v);

/// Inner product with double accumulation. Dimension mismatch throws InvalidInput.
double inner(std::span<const float> a, std::span<const float> b);

/// Same as inner() without the dimension check, for hot loops that validated once.
double inner_unchecked(const float* a, const float* b, std::size_t dim) noexcept;

/// sum_m weights[m] * vectors[m]. No normalization.
Vector weighted_combine(std::span<const Vector> vectors, std::span<const double> weights);

/// Unweighted mean of all cells whose center lies inside the box. When no center is covered
/// the single cell containing the box center is used.
Vector mean_pool_region(const FeatureGrid& grid, const Box2D& box);

/// Bilinear interpolation between cell centers. Cell (r, c) is centered at
/// ((c + 0.5) / W, (r + 0.5) / H); coordinates outside the center range are clamped.
Vector bilinear_sample(const FeatureGrid& grid, const Point2D& p);

/// Separable Gaussian blur, radius ceil(3 sigma), reflect padding. sigma == 0 is the identity.
ScalarMap gaussian_smooth(const ScalarMap& map, double sigma);

/// Affine rescale to [0, 1]; maps with range <= kNormEpsilon become all zeros.
ScalarMap minmax_rescale(const ScalarMap& map);

/// (v - mean) / sqrt(var + eps) * gain + bias, population variance.
Vector layer_norm(std::span<const float> v, std::span<const float> gain, std::span<const float> bias,
                  double eps = kLayerNormEpsilon);

/// Throws InvalidInput if any element is NaN or infinite.
void require_finite(std::span<const float> v, const char* what);

}  // namespace memprior

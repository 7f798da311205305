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

// Eigen-backed blocked kernels shared by k-means and the IVF-PQ encoder.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "memprior/types.hpp"

namespace memprior::detail {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrixF>;

inline ConstRowMap as_eigen(const Matrix& m) {
  return ConstRowMap(m.data.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
}

/// Index of the nearest centroid (squared L2) per point, ties to the lower index.
/// When min_dist is non-null it receives the (GEMM-expanded) squared distance.
std::vector<std::uint32_t> nearest_l2(const Matrix& points, const Matrix& centroids,
                                      std::vector<float>* min_dist = nullptr);

/// Exact squared distance with double accumulation.
double squared_distance(std::span<const float> a, std::span<const float> b) noexcept;

}  // namespace memprior::detail

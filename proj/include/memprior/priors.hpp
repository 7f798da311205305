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
#include <string>
#include <vector>

#include "memprior/retrieval.hpp"
#include "memprior/types.hpp"

namespace memprior {

/// Category heatmap with values in [0, 1]; max is 1 unless the whole map is zero.
struct DensePrior {
  std::string category;
  ScalarMap heatmap;
  double sigma = 1.0;
};

struct Anchor {
  Point2D point;
  double response = 0.0;

  bool operator==(const Anchor&) const = default;
};

/// Spatially diverse peaks of a dense prior, sorted by response descending.
struct AnchorSet {
  std::string category;
  std::vector<Anchor> anchors;
};

struct AnchorParams {
  double threshold = 0.5;       ///< minimum response on the min-max scale
  double radius_cells = 3.0;    ///< suppression radius in grid cells
  std::size_t max_anchors = 10;

  bool operator==(const AnchorParams&) const = default;
};

/// MinMax(Smooth(<Norm(cell feature), prototype>)). A zero prototype gives an all-zero map.
DensePrior dense_prior(const FeatureGrid& grid, const Prototype& proto, double sigma = 1.0);

/// Suppression radius in normalized units for a grid; one cell spans 1 / max(H, W).
double radius_to_normalized(double radius_cells, std::size_t height, std::size_t width);

/// Peaks are cells >= all in-bounds 8-neighbours with response >= threshold, visited by
/// (response desc, row asc, col asc); a peak is kept when it lies at normalized distance
/// >= radius from every kept anchor. Anchors sit at cell centers. An all-zero map yields none.
AnchorSet extract_anchors(const DensePrior& prior, double threshold, double radius, std::size_t max_anchors);
AnchorSet extract_anchors(const DensePrior& prior, const AnchorParams& params);

// Heatmap raster ("PHMP"), little-endian: magic, u32 version, u32 name length, category name,
// u32 height, u32 width, f64 sigma, height x width f32 row-major, u32 crc32 of all preceding bytes.
inline constexpr std::uint32_t kHeatmapVersion = 1;

std::vector<std::uint8_t> encode_heatmap(const DensePrior& prior);
DensePrior decode_heatmap(std::span<const std::uint8_t> bytes);
void save_heatmap(const DensePrior& prior, const std::filesystem::path& path);
DensePrior load_heatmap(const std::filesystem::path& path);

/// Training-time approximation: one anchor per box center with response 1, in input order.
AnchorSet anchors_from_gt(std::span<const Box2D> boxes, const std::string& category);

}  // namespace memprior

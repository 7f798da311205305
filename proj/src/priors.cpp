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

#include "memprior/priors.hpp"

#include <algorithm>
#include <cmath>

#include "memprior/binary_io.hpp"
#include "memprior/embedding_core.hpp"
#include "memprior/errors.hpp"

namespace memprior {

DensePrior dense_prior(const FeatureGrid& grid, const Prototype& proto, double sigma) {
  if (grid.dim != proto.vector.dim()) {
    throw InvalidInput("dense_prior: grid dim " + std::to_string(grid.dim) + " != prototype dim " +
                       std::to_string(proto.vector.dim()));
  }
  DensePrior prior{proto.category, ScalarMap(grid.height, grid.width), sigma};
  if (l2_norm(proto.vector) <= kNormEpsilon) {
    if (!(sigma >= 0.0)) throw InvalidInput("dense_prior: sigma must be >= 0");
    return prior;
  }
  ScalarMap response(grid.height, grid.width);
  for (std::size_t r = 0; r < grid.height; ++r) {
    for (std::size_t c = 0; c < grid.width; ++c) {
      response.at(r, c) = static_cast<float>(inner(l2_normalize(grid.cell(r, c)), proto.vector));
    }
  }
  prior.heatmap = minmax_rescale(gaussian_smooth(response, sigma));
  return prior;
}

double radius_to_normalized(double radius_cells, std::size_t height, std::size_t width) {
  return radius_cells / static_cast<double>(std::max(height, width));
}

AnchorSet extract_anchors(const DensePrior& prior, double threshold, double radius, std::size_t max_anchors) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw InvalidInput("extract_anchors: threshold must be in [0, 1]");
  if (!(radius > 0.0)) throw InvalidInput("extract_anchors: radius must be > 0");
  const ScalarMap& h = prior.heatmap;
  AnchorSet out{prior.category, {}};
  if (h.data.empty() || max_anchors == 0) return out;
  if (*std::max_element(h.data.begin(), h.data.end()) <= 0.0f) return out;

  struct Peak {
    float response;
    std::size_t row, col;
  };
  std::vector<Peak> peaks;
  const auto H = static_cast<std::ptrdiff_t>(h.height), W = static_cast<std::ptrdiff_t>(h.width);
  for (std::ptrdiff_t r = 0; r < H; ++r) {
    for (std::ptrdiff_t c = 0; c < W; ++c) {
      const float v = h.data[static_cast<std::size_t>(r * W + c)];
      if (v < threshold) continue;
      bool is_peak = true;
      for (std::ptrdiff_t dr = -1; dr <= 1 && is_peak; ++dr) {
        for (std::ptrdiff_t dc = -1; dc <= 1; ++dc) {
          const std::ptrdiff_t rr = r + dr, cc = c + dc;
          if ((dr == 0 && dc == 0) || rr < 0 || cc < 0 || rr >= H || cc >= W) continue;
          if (h.data[static_cast<std::size_t>(rr * W + cc)] > v) {
            is_peak = false;
            break;
          }
        }
      }
      if (is_peak) peaks.push_back({v, static_cast<std::size_t>(r), static_cast<std::size_t>(c)});
    }
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.response != b.response) return a.response > b.response;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });

  for (const auto& p : peaks) {
    const Point2D pt{(static_cast<double>(p.col) + 0.5) / static_cast<double>(h.width),
                     (static_cast<double>(p.row) + 0.5) / static_cast<double>(h.height)};
    const bool far_enough = std::all_of(out.anchors.begin(), out.anchors.end(), [&](const Anchor& a) {
      return std::hypot(a.point.x - pt.x, a.point.y - pt.y) >= radius;
    });
    if (!far_enough) continue;
    out.anchors.push_back({pt, p.response});
    if (out.anchors.size() == max_anchors) break;
  }
  return out;
}

AnchorSet extract_anchors(const DensePrior& prior, const AnchorParams& params) {
  return extract_anchors(prior, params.threshold,
                         radius_to_normalized(params.radius_cells, prior.heatmap.height, prior.heatmap.width),
                         params.max_anchors);
}

AnchorSet anchors_from_gt(std::span<const Box2D> boxes, const std::string& category) {
  AnchorSet out{category, {}};
  out.anchors.reserve(boxes.size());
  for (const auto& b : boxes) {
    require_valid(b);
    out.anchors.push_back({b.center(), 1.0});
  }
  return out;
}

std::vector<std::uint8_t> encode_heatmap(const DensePrior& prior) {
  const ScalarMap& h = prior.heatmap;
  if (h.data.size() != h.height * h.width) throw InvalidInput("encode_heatmap: map data size mismatch");
  io::ByteWriter w;
  w.magic("PHMP");
  w.u32(kHeatmapVersion);
  w.str(prior.category);
  w.u32(static_cast<std::uint32_t>(h.height));
  w.u32(static_cast<std::uint32_t>(h.width));
  w.f64(prior.sigma);
  w.f32s(h.data);
  w.append_crc32();
  return w.bytes();
}

DensePrior decode_heatmap(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("PHMP");
  r.expect_version(kHeatmapVersion);
  r.verify_crc32_trailer();
  DensePrior p;
  p.category = r.str(1u << 20);
  const std::uint32_t h = r.u32();
  const std::uint32_t w = r.u32();
  p.sigma = r.f64();
  r.require_remaining(static_cast<std::uint64_t>(h) * w, 4, "heatmap cells");
  p.heatmap = ScalarMap(h, w);
  r.f32s(p.heatmap.data);
  r.expect_end();
  return p;
}

void save_heatmap(const DensePrior& prior, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_heatmap(prior));
}

DensePrior load_heatmap(const std::filesystem::path& path) { return decode_heatmap(io::read_file(path)); }

}  // namespace memprior

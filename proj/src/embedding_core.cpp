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

#include "memprior/embedding_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "memprior/errors.hpp"

namespace memprior {

bool Box2D::valid() const noexcept {
  return x0 >= 0.0 && y0 >= 0.0 && x1 <= 1.0 && y1 <= 1.0 && x0 < x1 && y0 < y1;
}

double iou(const Box2D& a, const Box2D& b) noexcept {
  const double ix = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double iy = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

void require_valid(const Box2D& box) {
  if (!box.valid()) {
    throw InvalidInput("invalid box [" + std::to_string(box.x0) + ", " + std::to_string(box.y0) + ", " +
                       std::to_string(box.x1) + ", " + std::to_string(box.y1) + "]");
  }
}

void require_finite(std::span<const float> v, const char* what) {
  for (float x : v) {
    if (!std::isfinite(x)) throw InvalidInput(std::string(what) + ": non-finite element");
  }
}

double inner_unchecked(const float* a, const float* b, std::size_t dim) noexcept {
  double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= dim; i += 4) {
    acc0 += static_cast<double>(a[i]) * b[i];
    acc1 += static_cast<double>(a[i + 1]) * b[i + 1];
    acc2 += static_cast<double>(a[i + 2]) * b[i + 2];
    acc3 += static_cast<double>(a[i + 3]) * b[i + 3];
  }
  for (; i < dim; ++i) acc0 += static_cast<double>(a[i]) * b[i];
  return (acc0 + acc1) + (acc2 + acc3);
}

double inner(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw InvalidInput("inner: dimension mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  return inner_unchecked(a.data(), b.data(), a.size());
}

double l2_norm(std::span<const float> v) { return std::sqrt(inner_unchecked(v.data(), v.data(), v.size())); }

Vector l2_normalize(std::span<const float> v) {
  require_finite(v, "l2_normalize");
  const double norm = l2_norm(v);
  Vector out(v.size());
  if (norm <= kNormEpsilon) return out;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

Vector weighted_combine(std::span<const Vector> vectors, std::span<const double> weights) {
  if (vectors.empty()) throw InvalidInput("weighted_combine: empty vector list");
  if (vectors.size() != weights.size()) throw InvalidInput("weighted_combine: vectors/weights length mismatch");
  const std::size_t dim = vectors.front().dim();
  std::vector<double> acc(dim, 0.0);
  for (std::size_t m = 0; m < vectors.size(); ++m) {
    if (vectors[m].dim() != dim) throw InvalidInput("weighted_combine: dimension mismatch");
    for (std::size_t d = 0; d < dim; ++d) acc[d] += weights[m] * vectors[m][d];
  }
  Vector out(dim);
  for (std::size_t d = 0; d < dim; ++d) out[d] = static_cast<float>(acc[d]);
  return out;
}

namespace {

void require_grid(const FeatureGrid& grid) {
  if (grid.height == 0 || grid.width == 0 || grid.dim == 0) throw InvalidInput("feature grid is empty");
  if (grid.data.size() != grid.height * grid.width * grid.dim) throw InvalidInput("feature grid data size mismatch");
}

std::size_t cell_index(double coord, std::size_t n) {
  const auto i = static_cast<std::ptrdiff_t>(std::floor(coord * static_cast<double>(n)));
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1));
}

// Half-sample symmetric reflection (edge sample repeated), valid for any offset.
std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  return m < static_cast<std::ptrdiff_t>(n) ? static_cast<std::size_t>(m) : static_cast<std::size_t>(period - 1 - m);
}

}  // namespace

Vector mean_pool_region(const FeatureGrid& grid, const Box2D& box) {
  require_grid(grid);
  require_valid(box);
  std::vector<double> acc(grid.dim, 0.0);
  std::size_t count = 0;
  for (std::size_t r = 0; r < grid.height; ++r) {
    const double cy = (static_cast<double>(r) + 0.5) / static_cast<double>(grid.height);
    if (cy < box.y0 || cy > box.y1) continue;
    for (std::size_t c = 0; c < grid.width; ++c) {
      const double cx = (static_cast<double>(c) + 0.5) / static_cast<double>(grid.width);
      if (cx < box.x0 || cx > box.x1) continue;
      const auto f = grid.cell(r, c);
      for (std::size_t d = 0; d < grid.dim; ++d) acc[d] += f[d];
      ++count;
    }
  }
  Vector out(grid.dim);
  if (count == 0) {
    const Point2D center = box.center();
    const auto f = grid.cell(cell_index(center.y, grid.height), cell_index(center.x, grid.width));
    std::copy(f.begin(), f.end(), out.begin());
    return out;
  }
  for (std::size_t d = 0; d < grid.dim; ++d) out[d] = static_cast<float>(acc[d] / static_cast<double>(count));
  return out;
}

Vector bilinear_sample(const FeatureGrid& grid, const Point2D& p) {
  require_grid(grid);
  if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0)) throw InvalidInput("bilinear_sample: point outside [0,1]^2");
  const double sx = std::clamp(p.x * static_cast<double>(grid.width) - 0.5, 0.0, static_cast<double>(grid.width - 1));
  const double sy = std::clamp(p.y * static_cast<double>(grid.height) - 0.5, 0.0, static_cast<double>(grid.height - 1));
  const auto c0 = static_cast<std::size_t>(std::floor(sx));
  const auto r0 = static_cast<std::size_t>(std::floor(sy));
  const std::size_t c1 = std::min(c0 + 1, grid.width - 1);
  const std::size_t r1 = std::min(r0 + 1, grid.height - 1);
  const double fx = sx - static_cast<double>(c0);
  const double fy = sy - static_cast<double>(r0);

  const auto f00 = grid.cell(r0, c0);
  const auto f01 = grid.cell(r0, c1);
  const auto f10 = grid.cell(r1, c0);
  const auto f11 = grid.cell(r1, c1);
  const double w00 = (1.0 - fy) * (1.0 - fx), w01 = (1.0 - fy) * fx, w10 = fy * (1.0 - fx), w11 = fy * fx;
  Vector out(grid.dim);
  for (std::size_t d = 0; d < grid.dim; ++d) {
    out[d] = static_cast<float>(w00 * f00[d] + w01 * f01[d] + w10 * f10[d] + w11 * f11[d]);
  }
  return out;
}

ScalarMap gaussian_smooth(const ScalarMap& map, double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidInput("gaussian_smooth: sigma must be finite and >= 0");
  if (map.data.size() != map.height * map.width) throw InvalidInput("gaussian_smooth: map data size mismatch");
  if (sigma == 0.0 || map.data.empty()) return map;

  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double w = std::exp(-static_cast<double>(k * k) / (2.0 * sigma * sigma));
    kernel[static_cast<std::size_t>(k + radius)] = w;
    total += w;
  }
  for (double& w : kernel) w /= total;

  const std::size_t h = map.height, w = map.width;
  std::vector<double> tmp(h * w, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] *
               map.data[r * w + reflect(static_cast<std::ptrdiff_t>(c) + k, w)];
      }
      tmp[r * w + c] = acc;
    }
  }
  ScalarMap out(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] * tmp[reflect(static_cast<std::ptrdiff_t>(r) + k, h) * w + c];
      }
      out.data[r * w + c] = static_cast<float>(acc);
    }
  }
  return out;
}

ScalarMap minmax_rescale(const ScalarMap& map) {
  ScalarMap out(map.height, map.width);
  if (map.data.empty()) return out;
  require_finite(map.data, "minmax_rescale");
  const auto [lo_it, hi_it] = std::minmax_element(map.data.begin(), map.data.end());
  const double lo = *lo_it, hi = *hi_it;
  const double range = hi - lo;
  if (range <= kNormEpsilon) return out;
  for (std::size_t i = 0; i < map.data.size(); ++i) {
    out.data[i] = static_cast<float>(std::clamp((map.data[i] - lo) / range, 0.0, 1.0));
  }
  return out;
}

Vector layer_norm(std::span<const float> v, std::span<const float> gain, std::span<const float> bias, double eps) {
  if (v.empty()) throw InvalidInput("layer_norm: empty input");
  if (gain.size() != v.size() || bias.size() != v.size()) throw InvalidInput("layer_norm: dimension mismatch");
  if (!(eps > 0.0)) throw InvalidInput("layer_norm: eps must be > 0");
  const auto n = static_cast<double>(v.size());
  double mean = 0.0;
  for (float x : v) mean += x;
  mean /= n;
  double var = 0.0;
  for (float x : v) var += (x - mean) * (x - mean);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + eps);
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<float>((v[i] - mean) * inv * gain[i] + bias[i]);
  }
  return out;
}

}  // namespace memprior

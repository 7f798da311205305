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

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace memprior {

/// Dense float32 vector. Houses embeddings, keys, values, prototypes and prompts.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t dim, float fill = 0.0f) : data_(dim, fill) {}
  explicit Vector(std::vector<float> data) : data_(std::move(data)) {}
  Vector(std::initializer_list<float> init) : data_(init) {}

  std::size_t dim() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  std::span<float> span() noexcept { return data_; }
  std::span<const float> span() const noexcept { return data_; }
  operator std::span<const float>() const noexcept { return data_; }

  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }
  const std::vector<float>& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool operator==(const Vector&) const = default;

 private:
  std::vector<float> data_;
};

/// Row-major float32 matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, float fill = 0.0f) : rows(r), cols(c), data(r * c, fill) {}

  std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool operator==(const Matrix&) const = default;
};

/// H x W grid of D-dimensional cell features, row-major (row, col, channel).
struct FeatureGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t dim = 0;
  std::vector<float> data;

  FeatureGrid() = default;
  FeatureGrid(std::size_t h, std::size_t w, std::size_t d, float fill = 0.0f)
      : height(h), width(w), dim(d), data(h * w * d, fill) {}

  std::size_t cells() const noexcept { return height * width; }
  std::span<float> cell(std::size_t r, std::size_t c) { return {data.data() + (r * width + c) * dim, dim}; }
  std::span<const float> cell(std::size_t r, std::size_t c) const {
    return {data.data() + (r * width + c) * dim, dim};
  }

  bool operator==(const FeatureGrid&) const = default;
};

/// H x W scalar field (heatmaps, grayscale crops).
struct ScalarMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  ScalarMap() = default;
  ScalarMap(std::size_t h, std::size_t w, float fill = 0.0f) : height(h), width(w), data(h * w, fill) {}

  float& at(std::size_t r, std::size_t c) { return data[r * width + c]; }
  float at(std::size_t r, std::size_t c) const { return data[r * width + c]; }

  bool operator==(const ScalarMap&) const = default;
};

/// Point in normalized image coordinates, x to the right and y down.
struct Point2D {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point2D&) const = default;
};

/// Axis-aligned box in normalized coordinates with 0 <= x0 < x1 <= 1, 0 <= y0 < y1 <= 1.
struct Box2D {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 1.0;
  double y1 = 1.0;

  bool valid() const noexcept;
  double area() const noexcept { return (x1 - x0) * (y1 - y0); }
  Point2D center() const noexcept { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }

  bool operator==(const Box2D&) const = default;
};

/// Intersection over union of two boxes; 0 when they do not overlap.
double iou(const Box2D& a, const Box2D& b) noexcept;

/// Throws InvalidInput when the box violates its ordering/range invariant.
void require_valid(const Box2D& box);

}  // namespace memprior

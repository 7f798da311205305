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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "linalg.hpp"
#include "memprior/ann_index.hpp"
#include "memprior/errors.hpp"
#include "memprior/random.hpp"

namespace memprior {

namespace detail {

namespace {
constexpr Eigen::Index kBlockRows = 1024;
}

double squared_distance(std::span<const float> a, std::span<const float> b) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a[i]) - b[i];
    acc += diff * diff;
  }
  return acc;
}

std::vector<std::uint32_t> nearest_l2(const Matrix& points, const Matrix& centroids, std::vector<float>* min_dist) {
  const auto x = as_eigen(points);
  const auto c = as_eigen(centroids);
  const Eigen::VectorXf c_norm = c.rowwise().squaredNorm();
  std::vector<std::uint32_t> out(points.rows);
  if (min_dist) min_dist->assign(points.rows, 0.0f);
  const auto n = static_cast<Eigen::Index>(points.rows);
  RowMatrixF dots;
  for (Eigen::Index start = 0; start < n; start += kBlockRows) {
    const Eigen::Index rows = std::min(kBlockRows, n - start);
    dots.noalias() = x.middleRows(start, rows) * c.transpose();
    for (Eigen::Index i = 0; i < rows; ++i) {
      const float x_norm = x.row(start + i).squaredNorm();
      float best = std::numeric_limits<float>::infinity();
      std::uint32_t arg = 0;
      for (Eigen::Index j = 0; j < dots.cols(); ++j) {
        const float d = x_norm - 2.0f * dots(i, j) + c_norm[j];
        if (d < best) {
          best = d;
          arg = static_cast<std::uint32_t>(j);
        }
      }
      out[static_cast<std::size_t>(start + i)] = arg;
      if (min_dist) (*min_dist)[static_cast<std::size_t>(start + i)] = std::max(best, 0.0f);
    }
  }
  return out;
}

}  // namespace detail

std::vector<std::uint32_t> assign_max_inner(const Matrix& points, const Matrix& centroids) {
  if (points.cols != centroids.cols) throw InvalidInput("assign_max_inner: dimension mismatch");
  if (centroids.rows == 0) throw InvalidInput("assign_max_inner: no centroids");
  const auto x = detail::as_eigen(points);
  const auto c = detail::as_eigen(centroids);
  std::vector<std::uint32_t> out(points.rows);
  const auto n = static_cast<Eigen::Index>(points.rows);
  detail::RowMatrixF dots;
  for (Eigen::Index start = 0; start < n; start += 1024) {
    const Eigen::Index rows = std::min<Eigen::Index>(1024, n - start);
    dots.noalias() = x.middleRows(start, rows) * c.transpose();
    for (Eigen::Index i = 0; i < rows; ++i) {
      Eigen::Index arg = 0;
      float best = dots(i, 0);
      for (Eigen::Index j = 1; j < dots.cols(); ++j) {
        if (dots(i, j) > best) {
          best = dots(i, j);
          arg = j;
        }
      }
      out[static_cast<std::size_t>(start + i)] = static_cast<std::uint32_t>(arg);
    }
  }
  return out;
}

namespace {

Matrix kmeans_plus_plus(const Matrix& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows, d = points.cols;
  const auto x = detail::as_eigen(points);
  Matrix centers(k, d);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());

  auto take = [&](std::size_t c, std::size_t idx) {
    std::copy_n(points.row(idx).begin(), d, centers.row(c).begin());
    const Eigen::Map<const Eigen::RowVectorXf> center(centers.row(c).data(), static_cast<Eigen::Index>(d));
    const Eigen::VectorXf dist = (x.rowwise() - center).rowwise().squaredNorm();
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], static_cast<double>(dist[static_cast<Eigen::Index>(i)]));
  };

  take(0, std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n - 1;
    if (total > 0.0) {
      const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        cum += d2[i];
        if (cum > u && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    }
    take(c, pick);
  }
  return centers;
}

double total_distortion(const Matrix& points, const Matrix& centroids, const std::vector<std::uint32_t>& assignment,
                        std::vector<double>* per_point = nullptr) {
  double total = 0.0;
  if (per_point) per_point->resize(points.rows);
  for (std::size_t i = 0; i < points.rows; ++i) {
    const double dist = detail::squared_distance(points.row(i), centroids.row(assignment[i]));
    if (per_point) (*per_point)[i] = dist;
    total += dist;
  }
  return total;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, std::size_t k, std::size_t iters, std::uint64_t seed) {
  const std::size_t n = points.rows, d = points.cols;
  if (k == 0) throw InvalidInput("kmeans: k must be >= 1");
  if (k > n) throw InvalidInput("kmeans: k = " + std::to_string(k) + " exceeds point count " + std::to_string(n));
  if (iters == 0) throw InvalidInput("kmeans: iters must be >= 1");
  if (d == 0) throw InvalidInput("kmeans: zero-dimensional points");

  Rng rng(seed);
  KMeansResult result;
  result.centroids = kmeans_plus_plus(points, k, rng);
  std::vector<double> point_dist;
  std::vector<double> sums(k * d);
  std::vector<std::size_t> counts(k);

  for (std::size_t it = 0; it < iters; ++it) {
    result.assignment = detail::nearest_l2(points, result.centroids);
    result.distortion.push_back(total_distortion(points, result.centroids, result.assignment, &point_dist));

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = result.assignment[i];
      ++counts[c];
      const auto row = points.row(i);
      for (std::size_t j = 0; j < d; ++j) sums[c * d + j] += row[j];
    }
    std::vector<std::size_t> far_order;
    std::size_t next_far = 0;
    for (std::size_t c = 0; c < k; ++c) {
      auto centroid = result.centroids.row(c);
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < d; ++j) centroid[j] = static_cast<float>(sums[c * d + j] / static_cast<double>(counts[c]));
        continue;
      }
      if (far_order.empty()) {
        far_order.resize(n);
        std::iota(far_order.begin(), far_order.end(), 0);
        std::stable_sort(far_order.begin(), far_order.end(),
                         [&](std::size_t a, std::size_t b) { return point_dist[a] > point_dist[b]; });
      }
      const auto far = points.row(far_order[next_far++ % n]);
      std::copy(far.begin(), far.end(), centroid.begin());
    }
  }
  result.assignment = detail::nearest_l2(points, result.centroids);
  result.distortion.push_back(total_distortion(points, result.centroids, result.assignment));
  return result;
}

}  // namespace memprior

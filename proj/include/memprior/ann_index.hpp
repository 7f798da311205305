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
#include <span>
#include <unordered_map>
#include <vector>

#include "memprior/types.hpp"

namespace memprior {

struct MemoryBank;
class BankView;

/// One search result. Result lists are ordered by score descending, then entry id ascending.
struct SearchHit {
  std::size_t entry_id = 0;
  double score = 0.0;

  bool operator==(const SearchHit&) const = default;
};

/// Total order used for every ranked list: higher score first, ties by lower id.
inline bool ranks_before(const SearchHit& a, const SearchHit& b) noexcept {
  return a.score > b.score || (a.score == b.score && a.entry_id < b.entry_id);
}

/// Sorts hits and keeps the first k.
void sort_and_truncate(std::vector<SearchHit>& hits, std::size_t k);

/// Full-precision keys with their entry ids; the exact search oracle.
class FlatIndex {
 public:
  FlatIndex() = default;
  /// ids defaults to 0..rows-1.
  explicit FlatIndex(Matrix keys, std::vector<std::size_t> ids = {});
  static FlatIndex from_bank(const MemoryBank& bank);
  static FlatIndex from_view(const BankView& view);

  std::size_t size() const noexcept { return keys_.rows; }
  std::size_t dim() const noexcept { return keys_.cols; }
  const Matrix& keys() const noexcept { return keys_; }
  const std::vector<std::size_t>& ids() const noexcept { return ids_; }
  /// Key row for an entry id; throws InvalidInput when absent.
  std::span<const float> key_of(std::size_t entry_id) const;

 private:
  Matrix keys_;
  std::vector<std::size_t> ids_;
  std::unordered_map<std::size_t, std::size_t> row_of_;
};

/// Exact top-min(k, N) by inner product.
std::vector<SearchHit> flat_search(const FlatIndex& index, std::span<const float> query, std::size_t k);

/// Exact re-ranking of a candidate set against full-precision keys.
std::vector<SearchHit> rescore(const FlatIndex& exact, std::span<const SearchHit> candidates,
                               std::span<const float> query, std::size_t k);
std::vector<SearchHit> rescore(const MemoryBank& bank, std::span<const SearchHit> candidates,
                               std::span<const float> query, std::size_t k);

struct KMeansResult {
  Matrix centroids;
  std::vector<std::uint32_t> assignment;
  /// Sum of squared distances after each assignment step.
  std::vector<double> distortion;
};

/// Lloyd's algorithm (squared L2) with k-means++ seeding and a fixed iteration count.
/// Empty clusters are reseeded to the points farthest from their current centroid.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::size_t iters, std::uint64_t seed);

struct IvfPqParams {
  std::uint32_t nlist = 256;
  std::uint32_t m = 16;
  std::uint32_t nbits = 8;
  std::uint64_t seed = 1234;
  std::uint32_t kmeans_iters = 25;

  bool operator==(const IvfPqParams&) const = default;
};

/// Inverted-file index with product-quantized residuals, scored by inner product.
class IvfPqIndex {
 public:
  struct InvertedList {
    std::vector<std::uint64_t> ids;
    std::vector<std::uint8_t> codes;  ///< m bytes per id

    bool operator==(const InvertedList&) const = default;
  };

  IvfPqIndex() = default;

  /// Coarse k-means on keys, then one k-means per sub-space on residuals to the
  /// max-inner-product centroid. Needs at least max(nlist, 2^nbits) keys.
  static IvfPqIndex train(const Matrix& keys, const IvfPqParams& params);

  /// Encodes and stores keys under the given entry ids. Duplicate ids throw InvalidInput.
  void add(std::span<const std::size_t> ids, const Matrix& keys);
  /// Convenience: adds rows with ids 0..rows-1 offset by first_id.
  void add(const Matrix& keys, std::size_t first_id = 0);

  /// Marks the index read-only; later add() calls throw StateError.
  void freeze() noexcept { frozen_ = true; }

  /// Probes the nprobe lists whose centroids score highest against the query and returns the
  /// top recall_size candidates by asymmetric (lookup-table) inner product.
  std::vector<SearchHit> search(std::span<const float> query, std::size_t nprobe, std::size_t recall_size) const;

  /// Centroid plus decoded residual for the stored code.
  Vector reconstruct(std::size_t list, std::size_t position) const;

  bool trained() const noexcept { return trained_; }
  bool frozen() const noexcept { return frozen_; }
  const IvfPqParams& params() const noexcept { return params_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t ksub() const noexcept { return std::size_t{1} << params_.nbits; }
  std::size_t dsub() const noexcept { return params_.m == 0 ? 0 : dim_ / params_.m; }
  std::size_t size() const noexcept { return count_; }
  const Matrix& coarse_centroids() const noexcept { return centroids_; }
  /// ksub x dsub codebook of one sub-space.
  const Matrix& codebook(std::size_t subspace) const { return codebooks_.at(subspace); }
  const std::vector<InvertedList>& lists() const noexcept { return lists_; }

  bool operator==(const IvfPqIndex&) const = default;

  friend std::vector<std::uint8_t> encode_index(const IvfPqIndex& index);
  friend IvfPqIndex decode_index(std::span<const std::uint8_t> bytes);

 private:
  IvfPqParams params_;
  std::size_t dim_ = 0;
  bool trained_ = false;
  bool frozen_ = false;
  std::size_t count_ = 0;
  Matrix centroids_;
  std::vector<Matrix> codebooks_;
  std::vector<InvertedList> lists_;
};

/// Row index of the highest inner-product centroid for each row of points (ties to the lower index).
std::vector<std::uint32_t> assign_max_inner(const Matrix& points, const Matrix& centroids);

// Index file ("PIVF"), little-endian: magic, u32 version, u32 nlist, u32 m, u32 nbits, u64 seed,
// u32 kmeans_iters, u32 dim, u8 trained, u8 frozen, nlist x dim f32 centroids,
// m x 2^nbits x (dim/m) f32 codebooks, per list (u64 length, length x u64 ids, length x m code bytes),
// u32 crc32 of all preceding bytes.
inline constexpr std::uint32_t kIndexVersion = 1;

std::vector<std::uint8_t> encode_index(const IvfPqIndex& index);
IvfPqIndex decode_index(std::span<const std::uint8_t> bytes);
void save_index(const IvfPqIndex& index, const std::filesystem::path& path);
IvfPqIndex load_index(const std::filesystem::path& path);

/// Matrix of all bank keys in entry-id order.
Matrix key_matrix(const MemoryBank& bank);

}  // namespace memprior

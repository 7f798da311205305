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
#include <map>
#include <string>
#include <string_view>

#include "memprior/types.hpp"

namespace memprior {

/// Source of text/image embeddings (key space, dim key_dim) and patch feature grids (value space, dim value_dim).
/// Lookups of unknown names throw MissingEmbedding.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual Vector text(std::string_view s) const = 0;
  virtual Vector image(std::string_view image_id) const = 0;
  virtual FeatureGrid features(std::string_view image_id) const = 0;
  virtual std::size_t key_dim() const = 0;
  virtual std::size_t value_dim() const = 0;

  /// Scene descriptor embedding; an empty descriptor embeds to the zero vector.
  Vector scene(std::string_view s) const { return s.empty() ? Vector(key_dim()) : text(s); }
};

using EmbeddingTable = std::map<std::string, Vector, std::less<>>;
using GridTable = std::map<std::string, FeatureGrid, std::less<>>;

/// Lookup tables of precomputed embeddings.
class TableProvider final : public EmbeddingProvider {
 public:
  TableProvider() = default;
  /// Validates that all text/image vectors share one dimension and all grids share another.
  TableProvider(EmbeddingTable text, EmbeddingTable images, GridTable features);

  Vector text(std::string_view s) const override;
  Vector image(std::string_view image_id) const override;
  FeatureGrid features(std::string_view image_id) const override;
  std::size_t key_dim() const override { return key_dim_; }
  std::size_t value_dim() const override { return value_dim_; }

  const EmbeddingTable& text_table() const noexcept { return text_; }
  const EmbeddingTable& image_table() const noexcept { return images_; }
  const GridTable& feature_table() const noexcept { return features_; }

 private:
  EmbeddingTable text_;
  EmbeddingTable images_;
  GridTable features_;
  std::size_t key_dim_ = 0;
  std::size_t value_dim_ = 0;
};

/// Hashes names to seeded unit vectors and Gaussian feature grids; every name resolves.
class SyntheticProvider final : public EmbeddingProvider {
 public:
  SyntheticProvider(std::uint64_t seed, std::size_t key_dim, std::size_t value_dim, std::size_t grid_height = 16,
                    std::size_t grid_width = 16);

  Vector text(std::string_view s) const override;
  Vector image(std::string_view image_id) const override;
  FeatureGrid features(std::string_view image_id) const override;
  std::size_t key_dim() const override { return key_dim_; }
  std::size_t value_dim() const override { return value_dim_; }

 private:
  std::uint64_t seed_;
  std::size_t key_dim_;
  std::size_t value_dim_;
  std::size_t grid_height_;
  std::size_t grid_width_;
};

// Embedding table file ("PMEM"): magic, u32 version, u32 dim, u64 count,
// then count x (u32 name length, UTF-8 name, dim x f32). Little-endian.
inline constexpr std::uint32_t kEmbeddingTableVersion = 1;

void save_embedding_table(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable load_embedding_table(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_embedding_table(const EmbeddingTable& table);
EmbeddingTable decode_embedding_table(std::span<const std::uint8_t> bytes);

// Feature grid file ("PGRD"): magic, u32 version, u32 dim, u64 count,
// then count x (u32 name length, name, u32 height, u32 width, height*width*dim x f32). Little-endian.
inline constexpr std::uint32_t kGridTableVersion = 1;

void save_grid_table(const GridTable& table, const std::filesystem::path& path);
GridTable load_grid_table(const std::filesystem::path& path);

}  // namespace memprior

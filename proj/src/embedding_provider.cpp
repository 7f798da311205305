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

#include "memprior/embedding_provider.hpp"

#include "memprior/binary_io.hpp"
#include "memprior/errors.hpp"
#include "memprior/random.hpp"

namespace memprior {

namespace {

template <typename Map>
auto lookup(const Map& map, std::string_view name, const char* kind) {
  auto it = map.find(name);
  if (it == map.end()) throw MissingEmbedding(std::string("no ") + kind + " embedding for \"" + std::string(name) + "\"");
  return it->second;
}

}  // namespace

TableProvider::TableProvider(EmbeddingTable text, EmbeddingTable images, GridTable features)
    : text_(std::move(text)), images_(std::move(images)), features_(std::move(features)) {
  auto check_dim = [this](const EmbeddingTable& t) {
    for (const auto& [name, v] : t) {
      if (key_dim_ == 0) key_dim_ = v.dim();
      if (v.dim() != key_dim_ || v.dim() == 0) throw InvalidInput("embedding \"" + name + "\" has inconsistent dimension");
    }
  };
  check_dim(text_);
  check_dim(images_);
  for (const auto& [name, g] : features_) {
    if (value_dim_ == 0) value_dim_ = g.dim;
    if (g.dim != value_dim_ || g.data.size() != g.height * g.width * g.dim || g.cells() == 0) {
      throw InvalidInput("feature grid \"" + name + "\" has inconsistent shape");
    }
  }
}

Vector TableProvider::text(std::string_view s) const { return lookup(text_, s, "text"); }
Vector TableProvider::image(std::string_view image_id) const { return lookup(images_, image_id, "image"); }
FeatureGrid TableProvider::features(std::string_view image_id) const {
  return lookup(features_, image_id, "feature-grid");
}

SyntheticProvider::SyntheticProvider(std::uint64_t seed, std::size_t key_dim, std::size_t value_dim,
                                     std::size_t grid_height, std::size_t grid_width)
    : seed_(seed), key_dim_(key_dim), value_dim_(value_dim), grid_height_(grid_height), grid_width_(grid_width) {
  if (key_dim == 0 || value_dim == 0 || grid_height == 0 || grid_width == 0) {
    throw InvalidInput("SyntheticProvider: dimensions must be positive");
  }
}

Vector SyntheticProvider::text(std::string_view s) const {
  Rng rng(derive_seed(seed_, std::string("text:") + std::string(s)));
  return random_unit_vector(rng, key_dim_);
}

Vector SyntheticProvider::image(std::string_view image_id) const {
  Rng rng(derive_seed(seed_, std::string("image:") + std::string(image_id)));
  return random_unit_vector(rng, key_dim_);
}

FeatureGrid SyntheticProvider::features(std::string_view image_id) const {
  Rng rng(derive_seed(seed_, std::string("grid:") + std::string(image_id)));
  std::normal_distribution<double> normal(0.0, 1.0);
  FeatureGrid g(grid_height_, grid_width_, value_dim_);
  for (float& x : g.data) x = static_cast<float>(normal(rng));
  return g;
}

std::vector<std::uint8_t> encode_embedding_table(const EmbeddingTable& table) {
  const std::uint32_t dim = table.empty() ? 0 : static_cast<std::uint32_t>(table.begin()->second.dim());
  io::ByteWriter w;
  w.magic("PMEM");
  w.u32(kEmbeddingTableVersion);
  w.u32(dim);
  w.u64(table.size());
  for (const auto& [name, v] : table) {
    if (v.dim() != dim) throw InvalidInput("embedding \"" + name + "\" has inconsistent dimension");
    w.str(name);
    w.f32s(v.span());
  }
  return w.bytes();
}

EmbeddingTable decode_embedding_table(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("PMEM");
  r.expect_version(kEmbeddingTableVersion);
  const std::uint32_t dim = r.u32();
  const std::uint64_t count = r.u64();
  r.require_remaining(count, 4ull + 4ull * dim, "embedding entries");
  EmbeddingTable table;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t at = r.offset();
    std::string name = r.str();
    r.require_remaining(dim, 4, "embedding vector");
    Vector v(dim);
    r.f32s(v.span());
    if (!table.emplace(std::move(name), std::move(v)).second) throw FormatError("duplicate embedding name", at);
  }
  r.expect_end();
  return table;
}

void save_embedding_table(const EmbeddingTable& table, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_embedding_table(table));
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path) {
  return decode_embedding_table(io::read_file(path));
}

void save_grid_table(const GridTable& table, const std::filesystem::path& path) {
  const std::uint32_t dim = table.empty() ? 0 : static_cast<std::uint32_t>(table.begin()->second.dim);
  io::ByteWriter w;
  w.magic("PGRD");
  w.u32(kGridTableVersion);
  w.u32(dim);
  w.u64(table.size());
  for (const auto& [name, g] : table) {
    if (g.dim != dim) throw InvalidInput("grid \"" + name + "\" has inconsistent dimension");
    w.str(name);
    w.u32(static_cast<std::uint32_t>(g.height));
    w.u32(static_cast<std::uint32_t>(g.width));
    w.f32s(g.data);
  }
  io::write_file_atomic(path, w.bytes());
}

GridTable load_grid_table(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  io::ByteReader r(bytes);
  r.expect_magic("PGRD");
  r.expect_version(kGridTableVersion);
  const std::uint32_t dim = r.u32();
  const std::uint64_t count = r.u64();
  r.require_remaining(count, 12, "grid entries");
  GridTable table;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t at = r.offset();
    std::string name = r.str();
    const std::uint32_t h = r.u32();
    const std::uint32_t w = r.u32();
    r.require_remaining(static_cast<std::uint64_t>(h) * w, 4ull * dim, "grid data");
    FeatureGrid g(h, w, dim);
    r.f32s(g.data);
    if (!table.emplace(std::move(name), std::move(g)).second) throw FormatError("duplicate grid name", at);
  }
  r.expect_end();
  return table;
}

}  // namespace memprior

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
#include <string>
#include <vector>

#include "memprior/embedding_provider.hpp"
#include "memprior/memory_bank.hpp"
#include "memprior/records.hpp"
#include "memprior/types.hpp"

namespace memprior {

/// Square block of cells in the query image carrying a category's memory value.
struct PlantedRegion {
  std::string category;
  std::size_t row = 0;  ///< center cell
  std::size_t col = 0;
  std::size_t extent = 3;  ///< odd side length in cells
};

struct ScenarioSpec {
  std::size_t grid_height = 32;
  std::size_t grid_width = 32;
  std::size_t key_dim = 64;
  std::size_t value_dim = 64;
  std::vector<PlantedRegion> planted;
  double noise = 0.0;                  ///< per-element Gaussian sigma on every feature cell
  std::size_t entries_per_category = 8;
  std::size_t distractors = 32;         ///< memory entries with unrelated phrases and values
  std::size_t memory_grid = 8;          ///< side of the memory images' feature grids
  std::string scene = "kitchen";
  std::string query_image = "query";
  std::uint64_t seed = 7;
};

/// A self-consistent toy world: grounding records for a memory bank, the embedding tables that
/// resolve them, and a query image whose planted regions match the memory values of their
/// categories while background cells are orthogonal to every category value.
struct SyntheticScenario {
  ScenarioSpec spec;
  std::vector<std::string> categories;  ///< distinct planted categories, first-seen order
  std::vector<GroundingRecord> records;
  EmbeddingTable text;
  EmbeddingTable images;
  GridTable features;           ///< memory images plus the query image
  std::vector<Point2D> centers;  ///< normalized center of each planted region, in planted order

  TableProvider provider() const { return TableProvider(text, images, features); }
  const FeatureGrid& query_features() const { return features.at(spec.query_image); }
};

/// Throws InvalidInput when regions leave the grid, overlap, or a dimension is zero.
SyntheticScenario generate_scenario(const ScenarioSpec& spec);

/// P regions of one category with centers at least min_spacing cells apart and margin cells
/// from the border, placed by seeded rejection sampling.
std::vector<PlantedRegion> random_placements(std::size_t count, const std::string& category, std::size_t height,
                                             std::size_t width, double min_spacing, std::size_t margin,
                                             std::uint64_t seed);

/// Keys built like memory keys from a synthetic vocabulary: phrases grouped under coarse
/// concepts, scenes, and images holding a few entries each.
struct KeyCorpusSpec {
  std::size_t count = 50000;
  std::size_t dim = 256;
  std::size_t concepts = 500;
  std::size_t phrases_per_concept = 10;
  double phrase_spread = 1.0;  ///< phrase = Norm(concept + spread * noise direction)
  double zipf_exponent = 1.0;  ///< phrase frequency ~ 1 / rank^s for entries and queries; 0 = uniform
  std::size_t scenes = 64;
  std::size_t entries_per_image = 4;
  KeyWeights weights;
  std::uint64_t seed = 11;
};

struct KeyCorpus {
  Matrix keys;
  Matrix queries;  ///< fresh (phrase, scene, unseen image) combinations
};

KeyCorpus generate_key_corpus(const KeyCorpusSpec& spec, std::size_t query_count);

/// Bank whose keys are given rows and whose values are seeded unit vectors; no filtering.
MemoryBank bank_from_keys(const Matrix& keys, std::size_t value_dim, std::uint64_t seed);

}  // namespace memprior

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

#include "memprior/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "memprior/embedding_core.hpp"
#include "memprior/errors.hpp"
#include "memprior/random.hpp"

namespace memprior {
namespace {

// Removes the components along an orthonormal basis, then normalizes.
Vector orthogonal_unit(Rng& rng, std::size_t dim, const std::vector<Vector>& basis) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    Vector v = gaussian_vector(rng, dim);
    for (const auto& b : basis) {
      const double d = inner(v, b);
      for (std::size_t i = 0; i < dim; ++i) v[i] -= static_cast<float>(d * b[i]);
    }
    if (l2_norm(v) > 1e-3) return l2_normalize(v);
  }
  throw InvalidInput("synthetic: cannot draw a vector orthogonal to the category values");
}

void add_noise(Rng& rng, FeatureGrid& grid, double sigma) {
  if (sigma <= 0.0) return;
  std::normal_distribution<double> normal(0.0, sigma);
  for (float& x : grid.data) x += static_cast<float>(normal(rng));
}

void fill_cell(FeatureGrid& grid, std::size_t r, std::size_t c, const Vector& v) {
  auto cell = grid.cell(r, c);
  std::copy(v.begin(), v.end(), cell.begin());
}

Box2D random_box(Rng& rng) {
  std::uniform_real_distribution<double> side(0.25, 0.5);
  const double w = side(rng), h = side(rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x0 = u(rng) * (1.0 - w), y0 = u(rng) * (1.0 - h);
  return {x0, y0, x0 + w, y0 + h};
}

// Memory image: cells whose centers fall in the box carry the region value, the rest background.
FeatureGrid memory_grid(Rng& rng, std::size_t side, std::size_t dim, const Box2D& box, const Vector& region,
                        const std::vector<Vector>& basis, double noise) {
  FeatureGrid g(side, side, dim);
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      const double x = (static_cast<double>(c) + 0.5) / static_cast<double>(side);
      const double y = (static_cast<double>(r) + 0.5) / static_cast<double>(side);
      const bool inside = x >= box.x0 && x <= box.x1 && y >= box.y0 && y <= box.y1;
      fill_cell(g, r, c, inside ? region : orthogonal_unit(rng, dim, basis));
    }
  }
  add_noise(rng, g, noise);
  return g;
}

}  // namespace

SyntheticScenario generate_scenario(const ScenarioSpec& spec) {
  if (spec.grid_height == 0 || spec.grid_width == 0 || spec.key_dim == 0 || spec.value_dim == 0 ||
      spec.memory_grid == 0) {
    throw InvalidInput("synthetic: dimensions must be >= 1");
  }
  if (!(spec.noise >= 0.0)) throw InvalidInput("synthetic: noise must be >= 0");
  SyntheticScenario out;
  out.spec = spec;

  std::vector<std::vector<bool>> taken(spec.grid_height, std::vector<bool>(spec.grid_width, false));
  for (const auto& p : spec.planted) {
    if (p.extent == 0 || p.extent % 2 == 0) throw InvalidInput("synthetic: region extent must be odd");
    const std::size_t half = p.extent / 2;
    if (p.row < half || p.col < half || p.row + half >= spec.grid_height || p.col + half >= spec.grid_width) {
      throw InvalidInput("synthetic: planted region for \"" + p.category + "\" leaves the grid");
    }
    for (std::size_t r = p.row - half; r <= p.row + half; ++r) {
      for (std::size_t c = p.col - half; c <= p.col + half; ++c) {
        if (taken[r][c]) throw InvalidInput("synthetic: planted regions overlap");
        taken[r][c] = true;
      }
    }
    if (std::find(out.categories.begin(), out.categories.end(), p.category) == out.categories.end()) {
      out.categories.push_back(p.category);
    }
  }
  if (out.categories.size() >= spec.value_dim) throw InvalidInput("synthetic: too many categories for value_dim");

  // Orthonormal category values so no category's prior fires on another's region.
  std::vector<Vector> values;
  for (const auto& cat : out.categories) {
    Rng rng(derive_seed(spec.seed, "value:" + cat));
    values.push_back(orthogonal_unit(rng, spec.value_dim, values));
  }

  Rng rng(derive_seed(spec.seed, "world"));
  auto key_vec = [&] { return random_unit_vector(rng, spec.key_dim); };
  std::uniform_real_distribution<double> blur(10.0, 100.0);

  out.text.emplace(spec.scene, key_vec());
  for (std::size_t ci = 0; ci < out.categories.size(); ++ci) {
    const auto& cat = out.categories[ci];
    out.text.emplace(cat, key_vec());
    for (std::size_t i = 0; i < spec.entries_per_category; ++i) {
      const std::string image = "mem/" + cat + "/" + std::to_string(i);
      const Box2D box = random_box(rng);
      out.features.emplace(image, memory_grid(rng, spec.memory_grid, spec.value_dim, box, values[ci], values,
                                              spec.noise));
      out.images.emplace(image, key_vec());
      out.records.push_back({image, box, cat, spec.scene, std::nullopt, blur(rng), {}});
    }
  }
  for (std::size_t j = 0; j < spec.distractors; ++j) {
    const std::string image = "mem/distractor/" + std::to_string(j);
    const std::string phrase = "thing " + std::to_string(j);
    const std::string scene = "place " + std::to_string(j % 4);
    const Box2D box = random_box(rng);
    const Vector region = orthogonal_unit(rng, spec.value_dim, values);
    out.features.emplace(image, memory_grid(rng, spec.memory_grid, spec.value_dim, box, region, values, spec.noise));
    out.images.emplace(image, key_vec());
    out.text.emplace(phrase, key_vec());
    if (!out.text.contains(scene)) out.text.emplace(scene, key_vec());
    out.records.push_back({image, box, phrase, scene, std::nullopt, blur(rng), {}});
  }

  FeatureGrid query(spec.grid_height, spec.grid_width, spec.value_dim);
  for (std::size_t r = 0; r < spec.grid_height; ++r) {
    for (std::size_t c = 0; c < spec.grid_width; ++c) fill_cell(query, r, c, orthogonal_unit(rng, spec.value_dim, values));
  }
  for (const auto& p : spec.planted) {
    const auto ci = static_cast<std::size_t>(std::find(out.categories.begin(), out.categories.end(), p.category) -
                                             out.categories.begin());
    const std::size_t half = p.extent / 2;
    for (std::size_t r = p.row - half; r <= p.row + half; ++r) {
      for (std::size_t c = p.col - half; c <= p.col + half; ++c) fill_cell(query, r, c, values[ci]);
    }
    out.centers.push_back({(static_cast<double>(p.col) + 0.5) / static_cast<double>(spec.grid_width),
                           (static_cast<double>(p.row) + 0.5) / static_cast<double>(spec.grid_height)});
  }
  add_noise(rng, query, spec.noise);
  out.features.insert_or_assign(spec.query_image, std::move(query));
  out.images.insert_or_assign(spec.query_image, key_vec());
  return out;
}

std::vector<PlantedRegion> random_placements(std::size_t count, const std::string& category, std::size_t height,
                                             std::size_t width, double min_spacing, std::size_t margin,
                                             std::uint64_t seed) {
  if (height <= 2 * margin || width <= 2 * margin) throw InvalidInput("random_placements: margin leaves no room");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> row(margin, height - 1 - margin), col(margin, width - 1 - margin);
  for (int restart = 0; restart < 100; ++restart) {
    std::vector<PlantedRegion> out;
    for (int tries = 0; tries < 1000 && out.size() < count; ++tries) {
      const PlantedRegion cand{category, row(rng), col(rng), 3};
      const bool ok = std::all_of(out.begin(), out.end(), [&](const PlantedRegion& p) {
        const double dr = static_cast<double>(p.row) - static_cast<double>(cand.row);
        const double dc = static_cast<double>(p.col) - static_cast<double>(cand.col);
        return std::hypot(dr, dc) >= min_spacing;
      });
      if (ok) out.push_back(cand);
    }
    if (out.size() == count) return out;
  }
  throw InvalidInput("random_placements: cannot fit " + std::to_string(count) + " regions");
}

KeyCorpus generate_key_corpus(const KeyCorpusSpec& spec, std::size_t query_count) {
  if (spec.count == 0 || spec.dim == 0 || spec.concepts == 0 || spec.phrases_per_concept == 0 || spec.scenes == 0 ||
      spec.entries_per_image == 0) {
    throw InvalidInput("key corpus: sizes must be >= 1");
  }
  Rng rng(derive_seed(spec.seed, "key-corpus"));
  std::vector<Vector> phrases, scenes;
  for (std::size_t c = 0; c < spec.concepts; ++c) {
    const Vector concept_dir = random_unit_vector(rng, spec.dim);
    for (std::size_t p = 0; p < spec.phrases_per_concept; ++p) {
      const Vector offset = random_unit_vector(rng, spec.dim);
      Vector v(spec.dim);
      for (std::size_t i = 0; i < spec.dim; ++i) {
        v[i] = static_cast<float>(concept_dir[i] + spec.phrase_spread * offset[i]);
      }
      phrases.push_back(l2_normalize(v));
    }
  }
  for (std::size_t s = 0; s < spec.scenes; ++s) scenes.push_back(random_unit_vector(rng, spec.dim));
  // Phrase frequencies follow a Zipf law over a shuffled rank order, so frequent phrases spread across concepts.
  std::vector<std::size_t> rank(phrases.size());
  std::iota(rank.begin(), rank.end(), 0);
  std::shuffle(rank.begin(), rank.end(), rng);
  std::vector<double> freq(phrases.size());
  for (std::size_t p = 0; p < phrases.size(); ++p) {
    freq[p] = 1.0 / std::pow(static_cast<double>(rank[p] + 1), spec.zipf_exponent);
  }
  std::discrete_distribution<std::size_t> pick_phrase(freq.begin(), freq.end());
  std::uniform_int_distribution<std::size_t> pick_scene(0, scenes.size() - 1);

  KeyCorpus out{Matrix(spec.count, spec.dim), Matrix(query_count, spec.dim)};
  Vector image;
  for (std::size_t i = 0; i < spec.count; ++i) {
    if (i % spec.entries_per_image == 0) image = random_unit_vector(rng, spec.dim);
    const Vector k = build_key(phrases[pick_phrase(rng)], scenes[pick_scene(rng)], image, spec.weights);
    std::copy(k.begin(), k.end(), out.keys.row(i).begin());
  }
  for (std::size_t q = 0; q < query_count; ++q) {
    const Vector k = build_key(phrases[pick_phrase(rng)], scenes[pick_scene(rng)], random_unit_vector(rng, spec.dim),
                               spec.weights);
    std::copy(k.begin(), k.end(), out.queries.row(q).begin());
  }
  return out;
}

MemoryBank bank_from_keys(const Matrix& keys, std::size_t value_dim, std::uint64_t seed) {
  MemoryBank bank;
  bank.d_key = keys.cols;
  bank.d_val = value_dim;
  bank.manifest.input_records = keys.rows;
  bank.entries.reserve(keys.rows);
  Rng rng(derive_seed(seed, "bank-values"));
  for (std::size_t i = 0; i < keys.rows; ++i) {
    const auto row = keys.row(i);
    bank.entries.push_back({Vector(std::vector<float>(row.begin(), row.end())), random_unit_vector(rng, value_dim),
                            "c" + std::to_string(i % 1000), {"img" + std::to_string(i / 4), {0.0, 0.0, 1.0, 1.0}, {}}});
  }
  return bank;
}

}  // namespace memprior

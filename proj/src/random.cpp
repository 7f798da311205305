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

#include "memprior/random.hpp"

#include "memprior/embedding_core.hpp"

namespace memprior {

std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view stage) noexcept {
  return splitmix64(root ^ splitmix64(fnv1a64(stage)));
}

Vector gaussian_vector(Rng& rng, std::size_t dim, double sigma) {
  std::normal_distribution<double> normal(0.0, sigma);
  Vector v(dim);
  for (std::size_t i = 0; i < dim; ++i) v[i] = static_cast<float>(normal(rng));
  return v;
}

Vector random_unit_vector(Rng& rng, std::size_t dim) {
  for (;;) {
    Vector v = l2_normalize(gaussian_vector(rng, dim));
    if (l2_norm(v) > 0.5) return v;
  }
}

}  // namespace memprior

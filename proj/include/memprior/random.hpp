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
#include <random>
#include <string_view>

#include "memprior/types.hpp"

namespace memprior {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
std::uint64_t fnv1a64(std::string_view s) noexcept;

/// One splitmix64 step; a cheap bijective mixer.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Child seed for a named stage, so every random stream hangs off one root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stage) noexcept;

/// i.i.d. N(0, sigma^2) entries.
Vector gaussian_vector(Rng& rng, std::size_t dim, double sigma = 1.0);

/// Uniform direction on the unit sphere.
Vector random_unit_vector(Rng& rng, std::size_t dim);

}  // namespace memprior

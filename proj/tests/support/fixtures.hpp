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

// Seeded inputs shared by unit and acceptance tests.

#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "memprior/embedding_core.hpp"
#include "memprior/random.hpp"
#include "memprior/records.hpp"
#include "memprior/types.hpp"

namespace fixtures {

using namespace memprior;

inline Matrix random_unit_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector v = random_unit_vector(rng, d);
    std::copy(v.begin(), v.end(), m.row(i).begin());
  }
  return m;
}

inline ScalarMap random_map(Rng& rng, std::size_t h, std::size_t w, double lo = 0.0, double hi = 1.0) {
  ScalarMap m(h, w);
  std::uniform_real_distribution<double> u(lo, hi);
  for (float& x : m.data) x = static_cast<float>(u(rng));
  return m;
}

inline FeatureGrid random_grid(Rng& rng, std::size_t h, std::size_t w, std::size_t d) {
  FeatureGrid g(h, w, d);
  std::normal_distribution<double> n(0.0, 1.0);
  for (float& x : g.data) x = static_cast<float>(n(rng));
  return g;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("memprior-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

/// Runs a shell command, capturing stdout.
inline CommandResult run_command(const std::string& cmd) {
  CommandResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

/// Grounding records with every filter stage exercised: tiny boxes, near-duplicate boxes of the
/// same phrase, and a mix of explicit blur scores and gray crops (crops written under crop_dir).
inline std::vector<GroundingRecord> messy_records(std::size_t count, std::uint64_t seed,
                                                  const std::filesystem::path& crop_dir) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<GroundingRecord> out;
  std::size_t crop_id = 0;
  for (std::size_t i = 0; i < count; ++i) {
    GroundingRecord r;
    r.image_id = "img" + std::to_string(i / 5);
    r.scene = "scene " + std::to_string((i / 5) % 7);
    const double roll = u(rng);
    if (roll < 0.1 && !out.empty() && out.back().image_id == r.image_id) {
      // near duplicate of the previous record
      r.phrase = out.back().phrase;
      const Box2D b = out.back().box;
      const double j = 0.002 * u(rng);
      r.box = {b.x0 + j, b.y0, b.x1 + j, b.y1};
    } else {
      r.phrase = "phrase " + std::to_string(static_cast<int>(u(rng) * 40));
      const double w = roll < 0.15 ? 0.005 : 0.1 + 0.4 * u(rng);
      const double h = roll < 0.15 ? 0.005 : 0.1 + 0.4 * u(rng);
      const double x0 = u(rng) * (1.0 - w), y0 = u(rng) * (1.0 - h);
      r.box = {x0, y0, x0 + w, y0 + h};
    }
    if (u(rng) < 0.7) {
      r.blur_score = 5.0 + 200.0 * u(rng);
    } else {
      ScalarMap crop(12, 12);
      const double contrast = 10.0 + 200.0 * u(rng);
      for (float& x : crop.data) x = static_cast<float>(std::floor(std::min(255.0, u(rng) * contrast)));
      const std::string name = "crop" + std::to_string(crop_id++) + ".pgm";
      const auto bytes = encode_pgm(crop);
      std::FILE* f = std::fopen((crop_dir / name).c_str(), "wb");
      std::fwrite(bytes.data(), 1, bytes.size(), f);
      std::fclose(f);
      r.gray_crop = crop;
      r.crop_path = name;
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace fixtures

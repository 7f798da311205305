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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "memprior/types.hpp"

namespace memprior {

/// One grounded phrase-region pair from grounding-style annotations.
struct GroundingRecord {
  std::string image_id;
  Box2D box;
  std::string phrase;
  std::string scene;  ///< scene descriptor; empty when the image has none
  std::optional<ScalarMap> gray_crop;
  std::optional<double> blur_score;
  std::string crop_path;  ///< gray_crop as written in the record file, relative to the crop root
};

/// Parses line-delimited JSON records:
///   {"image_id": "...", "box": [x0, y0, x1, y1], "phrase": "...", "scene": "...",
///    "blur_score": 12.5, "gray_crop": "crops/a.pgm"}
/// blur_score, gray_crop and scene are optional. Crop paths resolve relative to crop_root.
/// Malformed lines throw FormatError carrying the byte offset of the line.
std::vector<GroundingRecord> load_grounding_records(const std::filesystem::path& path,
                                                    const std::filesystem::path& crop_root = {});

void save_grounding_records(const std::vector<GroundingRecord>& records, const std::filesystem::path& path);

/// 8-bit binary PGM (P5). Pixel values are kept on the 0..maxval scale.
ScalarMap load_pgm(const std::filesystem::path& path);
ScalarMap decode_pgm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pgm(const ScalarMap& map);  ///< values clamped to [0, 255]

}  // namespace memprior

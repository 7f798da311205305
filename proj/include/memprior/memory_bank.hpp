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
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "memprior/embedding_provider.hpp"
#include "memprior/records.hpp"
#include "memprior/types.hpp"

namespace memprior {

/// Mixing weights for phrase, scene and image terms of keys and queries.
struct KeyWeights {
  double phrase = 1.0;
  double scene = 0.3;
  double image = 0.01;

  bool operator==(const KeyWeights&) const = default;
};

struct EntryMeta {
  std::string image_id;
  Box2D box;
  std::optional<double> blur_score;

  bool operator==(const EntryMeta&) const = default;
};

/// One memory slot: unit key in the multimodal space, unit value in the patch-feature space.
struct MemoryEntry {
  Vector key;
  Vector value;
  std::string category;
  EntryMeta meta;

  bool operator==(const MemoryEntry&) const = default;
};

/// Filter settings used for a build and how many records each stage removed.
/// input_records == entries + removed_excluded + removed_small + removed_merged + removed_blur.
struct BuildManifest {
  double min_area = 0.0;
  double iou_threshold = 0.0;
  double drop_fraction = 0.0;
  std::uint64_t input_records = 0;
  std::uint64_t removed_excluded = 0;
  std::uint64_t removed_small = 0;
  std::uint64_t removed_merged = 0;
  std::uint64_t removed_blur = 0;

  bool operator==(const BuildManifest&) const = default;
};

/// Immutable after build. Entry ids are positions in `entries`.
struct MemoryBank {
  std::size_t d_key = 0;
  std::size_t d_val = 0;
  KeyWeights weights;
  BuildManifest manifest;
  std::vector<MemoryEntry> entries;

  std::size_t size() const noexcept { return entries.size(); }
  bool operator==(const MemoryBank&) const = default;
};

struct BankBuildConfig {
  KeyWeights weights;
  double min_area = 1e-4;
  double iou_threshold = 0.9;
  double drop_fraction = 0.10;
  std::set<std::string, std::less<>> excluded_images;
};

/// Norm(w_p * phrase + w_s * scene + w_g * image). Shared by memory keys and retrieval queries.
Vector build_key(const Vector& phrase_emb, const Vector& scene_emb, const Vector& image_emb, const KeyWeights& w);

/// Norm(mean pool of the image's feature grid inside box).
Vector build_value(const EmbeddingProvider& provider, std::string_view image_id, const Box2D& box);

/// Keeps records whose normalized box area is >= min_area.
std::vector<GroundingRecord> filter_small_boxes(const std::vector<GroundingRecord>& records, double min_area);

/// Greedy duplicate merge: a record is dropped when an earlier kept record has the same image,
/// the same phrase, and box IoU >= iou_threshold.
std::vector<GroundingRecord> merge_duplicates(const std::vector<GroundingRecord>& records, double iou_threshold);

/// Population variance of the 3x3 Laplacian response over the valid (unpadded) interior.
double laplacian_variance(const ScalarMap& gray);

/// Blur score per record: the explicit blur_score, otherwise laplacian_variance of gray_crop.
/// Records with neither throw InvalidInput.
std::vector<double> blur_scores(const std::vector<GroundingRecord>& records);

/// Number of records blur_filter removes out of n.
std::size_t blur_drop_count(std::size_t n, double drop_fraction);

/// Removes the blur_drop_count lowest-scoring records (ties: lower index dropped first), preserving order.
std::vector<GroundingRecord> blur_filter(const std::vector<GroundingRecord>& records, std::span<const double> scores,
                                         double drop_fraction);

/// exclusion -> small boxes -> duplicate merge -> blur filter, then one entry per surviving record.
MemoryBank build_bank(const std::vector<GroundingRecord>& records, const EmbeddingProvider& provider,
                      const BankBuildConfig& config);

/// Entry ids of the bank minus every entry taken from one image (self-match exclusion).
class BankView {
 public:
  static BankView all(const MemoryBank& bank);
  static BankView excluding(const MemoryBank& bank, std::string_view image_id);

  const MemoryBank& bank() const noexcept { return *bank_; }
  const std::vector<std::size_t>& ids() const noexcept { return ids_; }

 private:
  BankView(const MemoryBank& bank, std::vector<std::size_t> ids) : bank_(&bank), ids_(std::move(ids)) {}
  const MemoryBank* bank_;
  std::vector<std::size_t> ids_;
};

// Bank file ("PBNK"), little-endian:
//   magic, u32 version, u32 d_key, u32 d_val, u64 entry count,
//   3 x f64 weights, 3 x f64 filter settings, 5 x u64 manifest counts,
//   u32 n categories + strings, u32 n images + strings,
//   entries at a fixed stride: d_key x f32 key, d_val x f32 value, metadata block
//   (u32 category index, u32 image index, 4 x f64 box, f64 blur score or NaN),
//   u32 crc32 of all preceding bytes.
inline constexpr std::uint32_t kBankVersion = 1;
inline constexpr std::size_t kEntryMetadataBytes = 4 + 4 + 4 * 8 + 8;

/// On-disk bytes per entry.
constexpr std::size_t bank_entry_stride(std::size_t d_key, std::size_t d_val) {
  return 4 * (d_key + d_val) + kEntryMetadataBytes;
}

std::vector<std::uint8_t> encode_bank(const MemoryBank& bank);
MemoryBank decode_bank(std::span<const std::uint8_t> bytes);
void save_bank(const MemoryBank& bank, const std::filesystem::path& path);
MemoryBank load_bank(const std::filesystem::path& path);

}  // namespace memprior

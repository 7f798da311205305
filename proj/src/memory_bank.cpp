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

#include "memprior/memory_bank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

#include "memprior/binary_io.hpp"
#include "memprior/embedding_core.hpp"
#include "memprior/errors.hpp"

namespace memprior {

Vector build_key(const Vector& phrase_emb, const Vector& scene_emb, const Vector& image_emb, const KeyWeights& w) {
  const Vector parts[] = {phrase_emb, scene_emb, image_emb};
  const double weights[] = {w.phrase, w.scene, w.image};
  return l2_normalize(weighted_combine(parts, weights));
}

Vector build_value(const EmbeddingProvider& provider, std::string_view image_id, const Box2D& box) {
  return l2_normalize(mean_pool_region(provider.features(image_id), box));
}

std::vector<GroundingRecord> filter_small_boxes(const std::vector<GroundingRecord>& records, double min_area) {
  if (!(min_area >= 0.0)) throw InvalidInput("filter_small_boxes: min_area must be >= 0");
  std::vector<GroundingRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if ((r.box.x1 - r.box.x0) * (r.box.y1 - r.box.y0) >= min_area) out.push_back(r);
  }
  return out;
}

std::vector<GroundingRecord> merge_duplicates(const std::vector<GroundingRecord>& records, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw InvalidInput("merge_duplicates: iou_threshold must be in (0, 1]");
  // kept boxes per (image, phrase)
  std::map<std::pair<std::string, std::string>, std::vector<Box2D>> kept;
  std::vector<GroundingRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    auto& boxes = kept[{r.image_id, r.phrase}];
    const bool dup = std::any_of(boxes.begin(), boxes.end(), [&](const Box2D& b) { return iou(b, r.box) >= iou_threshold; });
    if (dup) continue;
    boxes.push_back(r.box);
    out.push_back(r);
  }
  return out;
}

double laplacian_variance(const ScalarMap& gray) {
  if (gray.height < 3 || gray.width < 3) throw InvalidInput("laplacian_variance: crop must be at least 3x3");
  if (gray.data.size() != gray.height * gray.width) throw InvalidInput("laplacian_variance: map data size mismatch");
  const std::size_t n = (gray.height - 2) * (gray.width - 2);
  std::vector<double> response;
  response.reserve(n);
  for (std::size_t r = 1; r + 1 < gray.height; ++r) {
    for (std::size_t c = 1; c + 1 < gray.width; ++c) {
      response.push_back(static_cast<double>(gray.at(r - 1, c)) + gray.at(r + 1, c) + gray.at(r, c - 1) +
                         gray.at(r, c + 1) - 4.0 * gray.at(r, c));
    }
  }
  const double mean = std::accumulate(response.begin(), response.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double x : response) var += (x - mean) * (x - mean);
  return var / static_cast<double>(n);
}

std::vector<double> blur_scores(const std::vector<GroundingRecord>& records) {
  std::vector<double> scores;
  scores.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.blur_score) {
      scores.push_back(*r.blur_score);
    } else if (r.gray_crop) {
      scores.push_back(laplacian_variance(*r.gray_crop));
    } else {
      throw InvalidInput("record " + std::to_string(i) + " (image \"" + r.image_id +
                         "\") has neither blur_score nor gray_crop while blur filtering is enabled");
    }
  }
  return scores;
}

std::size_t blur_drop_count(std::size_t n, double drop_fraction) {
  if (!(drop_fraction >= 0.0 && drop_fraction < 1.0)) throw InvalidInput("drop_fraction must be in [0, 1)");
  // The epsilon keeps products like 0.29 * 100 from flooring to 28.
  return static_cast<std::size_t>(std::floor(drop_fraction * static_cast<double>(n) + 1e-9));
}

namespace {

std::vector<bool> blur_drop_mask(std::span<const double> scores, double drop_fraction) {
  const std::size_t drop = blur_drop_count(scores.size(), drop_fraction);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<bool> dropped(scores.size(), false);
  for (std::size_t i = 0; i < drop; ++i) dropped[order[i]] = true;
  return dropped;
}

}  // namespace

std::vector<GroundingRecord> blur_filter(const std::vector<GroundingRecord>& records, std::span<const double> scores,
                                         double drop_fraction) {
  if (records.size() != scores.size()) throw InvalidInput("blur_filter: records/scores length mismatch");
  const auto dropped = blur_drop_mask(scores, drop_fraction);
  std::vector<GroundingRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!dropped[i]) out.push_back(records[i]);
  }
  return out;
}

MemoryBank build_bank(const std::vector<GroundingRecord>& records, const EmbeddingProvider& provider,
                      const BankBuildConfig& config) {
  MemoryBank bank;
  bank.d_key = provider.key_dim();
  bank.d_val = provider.value_dim();
  bank.weights = config.weights;
  auto& m = bank.manifest;
  m.min_area = config.min_area;
  m.iou_threshold = config.iou_threshold;
  m.drop_fraction = config.drop_fraction;
  m.input_records = records.size();

  std::vector<GroundingRecord> kept;
  kept.reserve(records.size());
  for (const auto& r : records) {
    require_valid(r.box);
    if (!config.excluded_images.contains(r.image_id)) kept.push_back(r);
  }
  m.removed_excluded = records.size() - kept.size();

  auto after_small = filter_small_boxes(kept, config.min_area);
  m.removed_small = kept.size() - after_small.size();

  auto after_merge = merge_duplicates(after_small, config.iou_threshold);
  m.removed_merged = after_small.size() - after_merge.size();

  std::vector<GroundingRecord> survivors;
  if (config.drop_fraction > 0.0) {
    const auto scores = blur_scores(after_merge);
    const auto dropped = blur_drop_mask(scores, config.drop_fraction);
    for (std::size_t i = 0; i < after_merge.size(); ++i) {
      if (dropped[i]) continue;
      survivors.push_back(std::move(after_merge[i]));
      survivors.back().blur_score = scores[i];
    }
  } else {
    blur_drop_count(after_merge.size(), config.drop_fraction);  // validates the range
    survivors = std::move(after_merge);
  }
  m.removed_blur = after_small.size() - m.removed_merged - survivors.size();

  bank.entries.reserve(survivors.size());
  for (std::size_t i = 0; i < survivors.size(); ++i) {
    const auto& r = survivors[i];
    try {
      MemoryEntry e;
      e.key = build_key(provider.text(r.phrase), provider.scene(r.scene), provider.image(r.image_id), config.weights);
      e.value = build_value(provider, r.image_id, r.box);
      e.category = r.phrase;
      e.meta = {r.image_id, r.box, r.blur_score};
      bank.entries.push_back(std::move(e));
    } catch (const MissingEmbedding& err) {
      throw MissingEmbedding("record \"" + r.phrase + "\" on image \"" + r.image_id + "\": " + err.what());
    }
  }
  return bank;
}

BankView BankView::all(const MemoryBank& bank) {
  std::vector<std::size_t> ids(bank.size());
  std::iota(ids.begin(), ids.end(), 0);
  return {bank, std::move(ids)};
}

BankView BankView::excluding(const MemoryBank& bank, std::string_view image_id) {
  std::vector<std::size_t> ids;
  ids.reserve(bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    if (bank.entries[i].meta.image_id != image_id) ids.push_back(i);
  }
  return {bank, std::move(ids)};
}

namespace {

// Interns strings in first-seen order.
struct StringTable {
  std::vector<std::string> names;
  std::unordered_map<std::string, std::uint32_t> index;

  std::uint32_t intern(const std::string& s) {
    auto [it, inserted] = index.emplace(s, static_cast<std::uint32_t>(names.size()));
    if (inserted) names.push_back(s);
    return it->second;
  }
};

}  // namespace

std::vector<std::uint8_t> encode_bank(const MemoryBank& bank) {
  StringTable categories, images;
  for (const auto& e : bank.entries) {
    if (e.key.dim() != bank.d_key || e.value.dim() != bank.d_val) throw InvalidInput("bank entry dimension mismatch");
    categories.intern(e.category);
    images.intern(e.meta.image_id);
  }
  io::ByteWriter w;
  w.magic("PBNK");
  w.u32(kBankVersion);
  w.u32(static_cast<std::uint32_t>(bank.d_key));
  w.u32(static_cast<std::uint32_t>(bank.d_val));
  w.u64(bank.entries.size());
  w.f64(bank.weights.phrase);
  w.f64(bank.weights.scene);
  w.f64(bank.weights.image);
  const auto& m = bank.manifest;
  w.f64(m.min_area);
  w.f64(m.iou_threshold);
  w.f64(m.drop_fraction);
  w.u64(m.input_records);
  w.u64(m.removed_excluded);
  w.u64(m.removed_small);
  w.u64(m.removed_merged);
  w.u64(m.removed_blur);
  for (const auto* table : {&categories, &images}) {
    w.u32(static_cast<std::uint32_t>(table->names.size()));
    for (const auto& s : table->names) w.str(s);
  }
  for (const auto& e : bank.entries) {
    w.f32s(e.key.span());
    w.f32s(e.value.span());
    w.u32(categories.index.at(e.category));
    w.u32(images.index.at(e.meta.image_id));
    w.f64(e.meta.box.x0);
    w.f64(e.meta.box.y0);
    w.f64(e.meta.box.x1);
    w.f64(e.meta.box.y1);
    w.f64(e.meta.blur_score.value_or(std::numeric_limits<double>::quiet_NaN()));
  }
  w.append_crc32();
  return w.bytes();
}

MemoryBank decode_bank(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("PBNK");
  r.expect_version(kBankVersion);
  r.verify_crc32_trailer();
  MemoryBank bank;
  bank.d_key = r.u32();
  bank.d_val = r.u32();
  const std::uint64_t count = r.u64();
  bank.weights = {r.f64(), r.f64(), r.f64()};
  auto& m = bank.manifest;
  m.min_area = r.f64();
  m.iou_threshold = r.f64();
  m.drop_fraction = r.f64();
  m.input_records = r.u64();
  m.removed_excluded = r.u64();
  m.removed_small = r.u64();
  m.removed_merged = r.u64();
  m.removed_blur = r.u64();

  std::vector<std::string> tables[2];
  for (auto& table : tables) {
    const std::uint32_t n = r.u32();
    r.require_remaining(n, 4, "string table");
    table.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) table.push_back(r.str());
  }
  const std::size_t stride = bank_entry_stride(bank.d_key, bank.d_val);
  r.require_remaining(count, stride, "bank entries");
  if (r.remaining() != count * stride) throw FormatError("entry block size does not match entry count", r.offset());
  bank.entries.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t at = r.offset();
    MemoryEntry e;
    e.key = Vector(bank.d_key);
    e.value = Vector(bank.d_val);
    r.f32s(e.key.span());
    r.f32s(e.value.span());
    const std::uint32_t ci = r.u32();
    const std::uint32_t ii = r.u32();
    if (ci >= tables[0].size() || ii >= tables[1].size()) throw FormatError("entry string index out of range", at);
    e.category = tables[0][ci];
    e.meta.image_id = tables[1][ii];
    e.meta.box = {r.f64(), r.f64(), r.f64(), r.f64()};
    const double blur = r.f64();
    if (!std::isnan(blur)) e.meta.blur_score = blur;
    bank.entries.push_back(std::move(e));
  }
  r.expect_end();
  return bank;
}

void save_bank(const MemoryBank& bank, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_bank(bank));
}

MemoryBank load_bank(const std::filesystem::path& path) { return decode_bank(io::read_file(path)); }

}  // namespace memprior

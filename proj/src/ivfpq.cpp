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

#include <algorithm>
#include <numeric>
#include <queue>
#include <unordered_set>

#include "linalg.hpp"
#include "memprior/ann_index.hpp"
#include "memprior/binary_io.hpp"
#include "memprior/embedding_core.hpp"
#include "memprior/errors.hpp"
#include "memprior/random.hpp"

namespace memprior {

namespace {

void check_params(const IvfPqParams& p, std::size_t dim) {
  if (p.nlist == 0) throw InvalidInput("ivfpq: nlist must be >= 1");
  if (p.m == 0 || dim % p.m != 0) {
    throw InvalidInput("ivfpq: key dimension " + std::to_string(dim) + " is not divisible by m = " + std::to_string(p.m));
  }
  if (p.nbits == 0 || p.nbits > 8) throw InvalidInput("ivfpq: nbits must be in [1, 8]");
  if (p.kmeans_iters == 0) throw InvalidInput("ivfpq: kmeans_iters must be >= 1");
}

Matrix sub_columns(const Matrix& m, std::size_t first, std::size_t count) {
  Matrix out(m.rows, count);
  for (std::size_t r = 0; r < m.rows; ++r) std::copy_n(m.row(r).begin() + first, count, out.row(r).begin());
  return out;
}

Matrix residuals(const Matrix& keys, const Matrix& centroids, const std::vector<std::uint32_t>& assignment) {
  Matrix out(keys.rows, keys.cols);
  for (std::size_t r = 0; r < keys.rows; ++r) {
    const auto k = keys.row(r);
    const auto c = centroids.row(assignment[r]);
    auto o = out.row(r);
    for (std::size_t j = 0; j < keys.cols; ++j) o[j] = k[j] - c[j];
  }
  return out;
}

}  // namespace

IvfPqIndex IvfPqIndex::train(const Matrix& keys, const IvfPqParams& params) {
  check_params(params, keys.cols);
  const std::size_t ksub = std::size_t{1} << params.nbits;
  const std::size_t needed = std::max<std::size_t>(params.nlist, ksub);
  if (keys.rows < needed) {
    throw InvalidInput("ivfpq: " + std::to_string(keys.rows) + " training keys, need at least " + std::to_string(needed));
  }
  IvfPqIndex index;
  index.params_ = params;
  index.dim_ = keys.cols;
  index.centroids_ = kmeans(keys, params.nlist, params.kmeans_iters, derive_seed(params.seed, "coarse")).centroids;

  const Matrix resid = residuals(keys, index.centroids_, assign_max_inner(keys, index.centroids_));
  const std::size_t dsub = keys.cols / params.m;
  index.codebooks_.reserve(params.m);
  for (std::size_t j = 0; j < params.m; ++j) {
    const Matrix sub = sub_columns(resid, j * dsub, dsub);
    index.codebooks_.push_back(
        kmeans(sub, ksub, params.kmeans_iters, derive_seed(params.seed, "pq" + std::to_string(j))).centroids);
  }
  index.lists_.assign(params.nlist, {});
  index.trained_ = true;
  return index;
}

void IvfPqIndex::add(std::span<const std::size_t> ids, const Matrix& keys) {
  if (!trained_) throw StateError("ivfpq add: index is not trained");
  if (frozen_) throw StateError("ivfpq add: index is frozen");
  if (ids.size() != keys.rows) throw InvalidInput("ivfpq add: id count does not match key rows");
  if (keys.rows == 0) return;
  if (keys.cols != dim_) throw InvalidInput("ivfpq add: key dimension mismatch");

  std::unordered_set<std::uint64_t> seen;
  seen.reserve(count_ + ids.size());
  for (const auto& list : lists_) seen.insert(list.ids.begin(), list.ids.end());
  for (std::size_t id : ids) {
    if (!seen.insert(id).second) throw InvalidInput("ivfpq add: duplicate id " + std::to_string(id));
  }

  const auto assignment = assign_max_inner(keys, centroids_);
  const Matrix resid = residuals(keys, centroids_, assignment);
  const std::size_t m = params_.m, dsub = this->dsub();
  std::vector<std::uint8_t> codes(keys.rows * m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto nearest = detail::nearest_l2(sub_columns(resid, j * dsub, dsub), codebooks_[j]);
    for (std::size_t r = 0; r < keys.rows; ++r) codes[r * m + j] = static_cast<std::uint8_t>(nearest[r]);
  }
  for (std::size_t r = 0; r < keys.rows; ++r) {
    auto& list = lists_[assignment[r]];
    list.ids.push_back(ids[r]);
    list.codes.insert(list.codes.end(), codes.begin() + static_cast<std::ptrdiff_t>(r * m),
                      codes.begin() + static_cast<std::ptrdiff_t>((r + 1) * m));
  }
  count_ += keys.rows;
}

void IvfPqIndex::add(const Matrix& keys, std::size_t first_id) {
  std::vector<std::size_t> ids(keys.rows);
  std::iota(ids.begin(), ids.end(), first_id);
  add(ids, keys);
}

Vector IvfPqIndex::reconstruct(std::size_t list, std::size_t position) const {
  const auto& l = lists_.at(list);
  if (position >= l.ids.size()) throw InvalidInput("reconstruct: position out of range");
  Vector out(dim_);
  const auto c = centroids_.row(list);
  const std::size_t dsub = this->dsub();
  for (std::size_t j = 0; j < params_.m; ++j) {
    const auto word = codebooks_[j].row(l.codes[position * params_.m + j]);
    for (std::size_t t = 0; t < dsub; ++t) out[j * dsub + t] = c[j * dsub + t] + word[t];
  }
  return out;
}

std::vector<SearchHit> IvfPqIndex::search(std::span<const float> query, std::size_t nprobe,
                                          std::size_t recall_size) const {
  if (!trained_) throw StateError("ivfpq search: index is not trained");
  if (query.size() != dim_) throw InvalidInput("ivfpq search: query dimension mismatch");
  if (nprobe == 0 || nprobe > params_.nlist) {
    throw InvalidInput("ivfpq search: nprobe must be in [1, " + std::to_string(params_.nlist) + "]");
  }
  if (recall_size == 0) throw InvalidInput("ivfpq search: recall_size must be >= 1");

  std::vector<SearchHit> probes(params_.nlist);
  for (std::size_t c = 0; c < params_.nlist; ++c) {
    probes[c] = {c, inner_unchecked(query.data(), centroids_.row(c).data(), dim_)};
  }
  sort_and_truncate(probes, nprobe);

  const std::size_t m = params_.m, ksub = this->ksub(), dsub = this->dsub();
  std::vector<float> lut(m * ksub);
  for (std::size_t j = 0; j < m; ++j) {
    const float* q = query.data() + j * dsub;
    for (std::size_t k = 0; k < ksub; ++k) {
      lut[j * ksub + k] = static_cast<float>(inner_unchecked(q, codebooks_[j].row(k).data(), dsub));
    }
  }

  // Max-heap under ranks_before keeps the current worst candidate on top.
  std::priority_queue<SearchHit, std::vector<SearchHit>, decltype(&ranks_before)> heap(ranks_before);
  for (const auto& probe : probes) {
    const auto& list = lists_[probe.entry_id];
    const std::uint8_t* code = list.codes.data();
    for (std::size_t i = 0; i < list.ids.size(); ++i, code += m) {
      float acc = 0.0f;
      for (std::size_t j = 0; j < m; ++j) acc += lut[j * ksub + code[j]];
      const SearchHit hit{static_cast<std::size_t>(list.ids[i]), probe.score + static_cast<double>(acc)};
      if (heap.size() < recall_size) {
        heap.push(hit);
      } else if (ranks_before(hit, heap.top())) {
        heap.pop();
        heap.push(hit);
      }
    }
  }
  std::vector<SearchHit> out;
  out.reserve(heap.size());
  while (!heap.empty()) {
    out.push_back(heap.top());
    heap.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::uint8_t> encode_index(const IvfPqIndex& index) {
  const auto& p = index.params_;
  io::ByteWriter w;
  w.magic("PIVF");
  w.u32(kIndexVersion);
  w.u32(p.nlist);
  w.u32(p.m);
  w.u32(p.nbits);
  w.u64(p.seed);
  w.u32(p.kmeans_iters);
  w.u32(static_cast<std::uint32_t>(index.dim_));
  w.u8(index.trained_ ? 1 : 0);
  w.u8(index.frozen_ ? 1 : 0);
  if (index.trained_) {
    w.f32s(index.centroids_.data);
    for (const auto& cb : index.codebooks_) w.f32s(cb.data);
    for (const auto& list : index.lists_) {
      w.u64(list.ids.size());
      for (std::uint64_t id : list.ids) w.u64(id);
      w.raw(list.codes);
    }
  }
  w.append_crc32();
  return w.bytes();
}

IvfPqIndex decode_index(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("PIVF");
  r.expect_version(kIndexVersion);
  r.verify_crc32_trailer();
  IvfPqIndex index;
  auto& p = index.params_;
  const std::size_t params_at = r.offset();
  p.nlist = r.u32();
  p.m = r.u32();
  p.nbits = r.u32();
  p.seed = r.u64();
  p.kmeans_iters = r.u32();
  index.dim_ = r.u32();
  index.trained_ = r.u8() != 0;
  index.frozen_ = r.u8() != 0;
  if (!index.trained_) {
    r.expect_end();
    return index;
  }
  try {
    check_params(p, index.dim_);
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("bad index parameters: ") + e.what(), params_at);
  }
  r.require_remaining(p.nlist, 4ull * index.dim_, "centroids");
  index.centroids_ = Matrix(p.nlist, index.dim_);
  r.f32s(index.centroids_.data);
  const std::size_t ksub = index.ksub(), dsub = index.dsub();
  r.require_remaining(p.m, 4ull * ksub * dsub, "codebooks");
  for (std::size_t j = 0; j < p.m; ++j) {
    Matrix cb(ksub, dsub);
    r.f32s(cb.data);
    index.codebooks_.push_back(std::move(cb));
  }
  index.lists_.resize(p.nlist);
  for (auto& list : index.lists_) {
    const std::uint64_t len = r.u64();
    r.require_remaining(len, 8ull + p.m, "inverted list");
    list.ids.resize(len);
    for (auto& id : list.ids) id = r.u64();
    const std::size_t codes_at = r.offset();
    const auto codes = r.raw(len * p.m);
    if (std::any_of(codes.begin(), codes.end(), [&](std::uint8_t c) { return c >= ksub; })) {
      throw FormatError("PQ code exceeds codebook size", codes_at);
    }
    list.codes.assign(codes.begin(), codes.end());
    index.count_ += len;
  }
  r.expect_end();
  return index;
}

void save_index(const IvfPqIndex& index, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_index(index));
}

IvfPqIndex load_index(const std::filesystem::path& path) { return decode_index(io::read_file(path)); }

}  // namespace memprior

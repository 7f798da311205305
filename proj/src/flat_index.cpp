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

#include "memprior/ann_index.hpp"
#include "memprior/embedding_core.hpp"
#include "memprior/errors.hpp"
#include "memprior/memory_bank.hpp"

namespace memprior {

void sort_and_truncate(std::vector<SearchHit>& hits, std::size_t k) {
  if (k < hits.size()) {
    std::nth_element(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), ranks_before);
    hits.resize(k);
  }
  std::sort(hits.begin(), hits.end(), ranks_before);
}

FlatIndex::FlatIndex(Matrix keys, std::vector<std::size_t> ids) : keys_(std::move(keys)), ids_(std::move(ids)) {
  if (ids_.empty() && keys_.rows > 0) {
    ids_.resize(keys_.rows);
    std::iota(ids_.begin(), ids_.end(), 0);
  }
  if (ids_.size() != keys_.rows) throw InvalidInput("FlatIndex: id count does not match key rows");
  row_of_.reserve(ids_.size());
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (!row_of_.emplace(ids_[r], r).second) throw InvalidInput("FlatIndex: duplicate id " + std::to_string(ids_[r]));
  }
}

Matrix key_matrix(const MemoryBank& bank) {
  Matrix keys(bank.size(), bank.d_key);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto& key = bank.entries[i].key;
    if (key.dim() != bank.d_key) throw InvalidInput("bank entry " + std::to_string(i) + " has wrong key dimension");
    std::copy(key.begin(), key.end(), keys.row(i).begin());
  }
  return keys;
}

FlatIndex FlatIndex::from_bank(const MemoryBank& bank) { return FlatIndex(key_matrix(bank)); }

FlatIndex FlatIndex::from_view(const BankView& view) {
  const auto& bank = view.bank();
  Matrix keys(view.ids().size(), bank.d_key);
  for (std::size_t r = 0; r < view.ids().size(); ++r) {
    const auto& key = bank.entries[view.ids()[r]].key;
    std::copy(key.begin(), key.end(), keys.row(r).begin());
  }
  return FlatIndex(std::move(keys), view.ids());
}

std::span<const float> FlatIndex::key_of(std::size_t entry_id) const {
  auto it = row_of_.find(entry_id);
  if (it == row_of_.end()) throw InvalidInput("entry id " + std::to_string(entry_id) + " not in index");
  return keys_.row(it->second);
}

std::vector<SearchHit> flat_search(const FlatIndex& index, std::span<const float> query, std::size_t k) {
  if (k == 0) throw InvalidInput("flat_search: k must be >= 1");
  if (index.size() == 0) return {};
  if (query.size() != index.dim()) throw InvalidInput("flat_search: query dimension mismatch");
  std::vector<SearchHit> hits(index.size());
  for (std::size_t r = 0; r < index.size(); ++r) {
    hits[r] = {index.ids()[r], inner_unchecked(query.data(), index.keys().row(r).data(), query.size())};
  }
  sort_and_truncate(hits, k);
  return hits;
}

std::vector<SearchHit> rescore(const FlatIndex& exact, std::span<const SearchHit> candidates,
                               std::span<const float> query, std::size_t k) {
  if (query.size() != exact.dim()) throw InvalidInput("rescore: query dimension mismatch");
  std::vector<SearchHit> hits;
  hits.reserve(candidates.size());
  for (const auto& c : candidates) {
    hits.push_back({c.entry_id, inner_unchecked(query.data(), exact.key_of(c.entry_id).data(), query.size())});
  }
  sort_and_truncate(hits, k);
  return hits;
}

std::vector<SearchHit> rescore(const MemoryBank& bank, std::span<const SearchHit> candidates,
                               std::span<const float> query, std::size_t k) {
  if (query.size() != bank.d_key) throw InvalidInput("rescore: query dimension mismatch");
  std::vector<SearchHit> hits;
  hits.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (c.entry_id >= bank.size()) throw InvalidInput("rescore: entry id " + std::to_string(c.entry_id) + " out of range");
    hits.push_back({c.entry_id, inner_unchecked(query.data(), bank.entries[c.entry_id].key.data(), query.size())});
  }
  sort_and_truncate(hits, k);
  return hits;
}

}  // namespace memprior

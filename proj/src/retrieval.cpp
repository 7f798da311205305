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

#include "memprior/retrieval.hpp"

#include <algorithm>
#include <cmath>

#include "memprior/embedding_core.hpp"
#include "memprior/errors.hpp"

namespace memprior {

RetrievalQuery build_query(const EmbeddingProvider& provider, const std::string& category, const std::string& scene,
                           const std::string& image_id, const KeyWeights& w) {
  RetrievalQuery q;
  q.category = category;
  q.scene = scene;
  q.image_id = image_id;
  q.vector = build_key(provider.text(category), provider.scene(scene), provider.image(image_id), w);
  return q;
}

Retriever::Retriever(const MemoryBank& bank) : bank_(&bank) {}

Retriever::Retriever(const MemoryBank& bank, const IvfPqIndex& index, Options options)
    : bank_(&bank), index_(&index), options_(options) {
  if (!index.trained()) throw StateError("Retriever: index is not trained");
  if (index.dim() != bank.d_key) throw InvalidInput("Retriever: index dimension does not match bank keys");
  if (index.size() != bank.size()) throw InvalidInput("Retriever: index and bank sizes differ");
  // nprobe beyond nlist means "probe everything".
  options_.nprobe = std::min<std::size_t>(options_.nprobe, index.params().nlist);
}

std::vector<SearchHit> Retriever::retrieve(const RetrievalQuery& query, std::size_t k,
                                           const std::optional<std::string>& exclude_image) const {
  if (k == 0) throw InvalidInput("retrieve: k must be >= 1");
  const auto& bank = *bank_;
  if (bank.size() == 0) return {};
  if (query.vector.dim() != bank.d_key) throw InvalidInput("retrieve: query dimension mismatch");

  std::vector<SearchHit> pool;
  if (index_) {
    const std::size_t recall = std::max(options_.recall_size, k);
    const auto candidates = index_->search(query.vector, options_.nprobe, recall);
    pool = rescore(bank, candidates, query.vector, candidates.size());
  } else {
    pool.reserve(bank.size());
    for (std::size_t i = 0; i < bank.size(); ++i) {
      pool.push_back({i, inner_unchecked(query.vector.data(), bank.entries[i].key.data(), bank.d_key)});
    }
    // Keep enough of the exact ranking to refill after exclusion.
    std::size_t excluded = 0;
    if (exclude_image) {
      excluded = static_cast<std::size_t>(std::count_if(bank.entries.begin(), bank.entries.end(),
                                                        [&](const MemoryEntry& e) { return e.meta.image_id == *exclude_image; }));
    }
    sort_and_truncate(pool, k + excluded);
  }

  std::vector<SearchHit> out;
  out.reserve(k);
  for (const auto& hit : pool) {
    if (exclude_image && bank.entries[hit.entry_id].meta.image_id == *exclude_image) continue;
    out.push_back(hit);
    if (out.size() == k) break;
  }
  return out;
}

std::vector<double> softmax_weights(std::span<const double> scores, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidInput("softmax: tau must be finite and > 0");
  std::vector<double> w(scores.size());
  if (scores.empty()) return w;
  const double peak = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    w[i] = std::exp((scores[i] - peak) / tau);
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

Prototype aggregate_prototype(const MemoryBank& bank, std::span<const SearchHit> hits, const RetrievalQuery& query,
                              double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidInput("aggregate_prototype: tau must be finite and > 0");
  Prototype proto;
  proto.category = query.category;
  proto.tau = tau;
  proto.vector = Vector(bank.d_val);
  if (hits.empty()) return proto;

  std::vector<double> scores;
  scores.reserve(hits.size());
  for (const auto& h : hits) {
    if (h.entry_id >= bank.size()) throw InvalidInput("aggregate_prototype: entry id out of range");
    scores.push_back(inner(query.vector, bank.entries[h.entry_id].key));
  }
  const auto alpha = softmax_weights(scores, tau);

  std::vector<double> acc(bank.d_val, 0.0);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const auto& value = bank.entries[hits[i].entry_id].value;
    for (std::size_t d = 0; d < bank.d_val; ++d) acc[d] += alpha[i] * value[d];
    proto.neighbors.push_back({hits[i].entry_id, scores[i], alpha[i]});
  }
  double norm = 0.0;
  for (double x : acc) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > kNormEpsilon) {
    for (std::size_t d = 0; d < bank.d_val; ++d) proto.vector[d] = static_cast<float>(acc[d] / norm);
  }
  return proto;
}

}  // namespace memprior

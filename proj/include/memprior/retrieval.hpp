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

#include <optional>
#include <string>
#include <vector>

#include "memprior/ann_index.hpp"
#include "memprior/embedding_provider.hpp"
#include "memprior/memory_bank.hpp"

namespace memprior {

inline constexpr std::size_t kDefaultTopK = 12;
inline constexpr double kDefaultTemperature = 0.07;
inline constexpr std::size_t kDefaultRecallSize = 200;

struct RetrievalQuery {
  std::string category;
  Vector vector;  ///< unit norm, same space as memory keys
  std::string scene;
  std::string image_id;
};

struct PrototypeNeighbor {
  std::size_t entry_id = 0;
  double key_score = 0.0;
  double weight = 0.0;
};

/// Softmax-weighted, normalized aggregate of retrieved memory values for one category.
struct Prototype {
  std::string category;
  Vector vector;  ///< unit norm, or all zeros when nothing was retrieved
  std::vector<PrototypeNeighbor> neighbors;
  double tau = kDefaultTemperature;

  bool empty() const noexcept { return neighbors.empty(); }
};

/// Builds the query with the exact arithmetic of memory keys.
RetrievalQuery build_query(const EmbeddingProvider& provider, const std::string& category, const std::string& scene,
                           const std::string& image_id, const KeyWeights& w);

/// Two-stage search over a bank: IVF-PQ candidate recall followed by exact re-ranking, or an
/// exact flat scan when no approximate index is attached. Holds references; both the bank and
/// the index must outlive it.
class Retriever {
 public:
  struct Options {
    std::size_t nprobe = 16;
    std::size_t recall_size = kDefaultRecallSize;
  };

  /// Flat (exact) retriever.
  explicit Retriever(const MemoryBank& bank);
  /// Approximate retriever; the index must hold the bank's keys under their entry ids.
  Retriever(const MemoryBank& bank, const IvfPqIndex& index, Options options);

  /// Top-k hits by exact key similarity. Entries from exclude_image are dropped and the list is
  /// refilled from the re-ranked candidate pool.
  std::vector<SearchHit> retrieve(const RetrievalQuery& query, std::size_t k,
                                  const std::optional<std::string>& exclude_image = std::nullopt) const;

  const MemoryBank& bank() const noexcept { return *bank_; }
  bool approximate() const noexcept { return index_ != nullptr; }

 private:
  const MemoryBank* bank_;
  const IvfPqIndex* index_ = nullptr;
  Options options_;
};

/// alpha_i = softmax(<q, k_i> / tau) over the hits, p = Norm(sum alpha_i v_i). Key scores are
/// recomputed exactly against the stored keys. No hits gives an empty zero prototype.
Prototype aggregate_prototype(const MemoryBank& bank, std::span<const SearchHit> hits, const RetrievalQuery& query,
                              double tau = kDefaultTemperature);

/// Max-subtracted softmax of scores / tau, in double precision.
std::vector<double> softmax_weights(std::span<const double> scores, double tau);

}  // namespace memprior

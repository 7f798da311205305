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

#include <json.hpp>

#include "memprior/ann_index.hpp"
#include "memprior/config.hpp"
#include "memprior/embedding_provider.hpp"
#include "memprior/memory_bank.hpp"
#include "memprior/priors.hpp"
#include "memprior/prompt_refinement.hpp"
#include "memprior/retrieval.hpp"

namespace memprior {

struct PipelineRequest {
  std::string image_id;
  std::string scene;
  std::vector<std::string> categories;  ///< distinct, in output order
  /// Detector feature maps, one per scale. Empty: the provider's grid for image_id.
  std::vector<FeatureGrid> scales;
  /// Category embeddings for the stand-in head. Empty: the provider's text embeddings.
  CategoryTable head;
};

struct CategoryResult {
  std::string category;
  std::vector<SearchHit> hits;
  Prototype prototype;
  DensePrior prior;
  AnchorSet anchors;
  std::vector<MemoryGuidedPrompt> prompts;
};

struct PipelineResult {
  std::string image_id;
  std::vector<CategoryResult> categories;  ///< request order
  LogitsMatrix logits;                     ///< every prompt against every requested category, masked
};

/// Retrieval -> prototype -> dense prior -> anchors -> refined prompts for each category, then
/// label-constrained scores. An index selects the approximate retriever; null means an exact scan.
/// Errors carry the stage and category in their message and keep their type.
PipelineResult run_pipeline(const MemoryBank& bank, const IvfPqIndex* index, const EmbeddingProvider& provider,
                            const RefinementParamSet& params, const PipelineConfig& config,
                            const PipelineRequest& request);

nlohmann::json pipeline_report(const PipelineResult& result, const PipelineConfig& config, bool include_heatmaps = false);

struct BenchReport {
  std::size_t queries = 0;
  std::size_t k = 0;
  std::size_t nprobe = 0;
  std::size_t recall_size = 0;
  double qps = 0.0;              ///< median over repetitions, approximate retrieval
  double flat_qps = 0.0;         ///< median over repetitions, exact scan
  double recall_at_k = 0.0;      ///< mean |approx top-k ∩ exact top-k| / k
  std::size_t bank_bytes_per_entry = 0;
  std::size_t index_bytes_per_entry = 0;  ///< id + PQ code
  std::size_t repetitions = 0;
};

/// Times retrieval of every query row against the bank through the index and a flat scan.
BenchReport run_bench(const MemoryBank& bank, const IvfPqIndex& index, const Matrix& queries, std::size_t k,
                      std::size_t nprobe, std::size_t recall_size, std::size_t repetitions = 3);

/// Bank keys perturbed by Gaussian noise of the given norm and renormalized.
Matrix perturbed_queries(const MemoryBank& bank, std::size_t count, double noise, std::uint64_t seed);

nlohmann::json bench_report_json(const BenchReport& report);

}  // namespace memprior

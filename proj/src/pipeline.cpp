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

#include "memprior/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <unordered_set>

#include "memprior/embedding_core.hpp"
#include "memprior/errors.hpp"
#include "memprior/random.hpp"

namespace memprior {
namespace {

// Rethrows with "stage [category]: " prepended, keeping the error type.
template <class F>
auto in_stage(const char* stage, const std::string& category, F&& body) -> decltype(body()) {
  const std::string where = std::string(stage) + " [" + category + "]: ";
  try {
    return body();
  } catch (const MissingEmbedding& e) {
    throw MissingEmbedding(where + e.what());
  } catch (const InvalidInput& e) {
    throw InvalidInput(where + e.what());
  } catch (const StateError& e) {
    throw StateError(where + e.what());
  } catch (const FormatError& e) {
    throw FormatError(where + e.what(), e.offset());
  }
}

nlohmann::json heatmap_json(const ScalarMap& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.height; ++r) {
    rows.push_back(std::vector<float>(m.data.begin() + static_cast<std::ptrdiff_t>(r * m.width),
                                      m.data.begin() + static_cast<std::ptrdiff_t>((r + 1) * m.width)));
  }
  return rows;
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace

PipelineResult run_pipeline(const MemoryBank& bank, const IvfPqIndex* index, const EmbeddingProvider& provider,
                            const RefinementParamSet& params, const PipelineConfig& config,
                            const PipelineRequest& request) {
  config.validate();
  {
    std::set<std::string, std::less<>> seen;
    for (const auto& c : request.categories) {
      if (!seen.insert(c).second) throw InvalidInput("pipeline: category \"" + c + "\" requested twice");
    }
  }
  if (bank.d_key != provider.key_dim()) throw InvalidInput("pipeline: bank key dim differs from the provider's");

  std::vector<FeatureGrid> scales = request.scales;
  if (scales.empty()) {
    scales.push_back(in_stage("features", request.image_id, [&] { return provider.features(request.image_id); }));
  }
  if (params.sets.empty()) throw InvalidInput("pipeline: no refinement parameters");
  for (std::size_t s = 0; s < scales.size(); ++s) {
    if (scales[s].dim != params.for_scale(s).dim()) {
      throw InvalidInput("pipeline: scale " + std::to_string(s) + " has dim " + std::to_string(scales[s].dim) +
                         ", prompts have dim " + std::to_string(params.dim()));
    }
  }
  const FeatureGrid& prior_grid = scales.front();

  std::optional<Retriever> retriever;
  if (index) {
    retriever.emplace(bank, *index, Retriever::Options{config.nprobe, config.recall_size});
  } else {
    retriever.emplace(bank);
  }
  const std::optional<std::string> exclude =
      config.exclude_self ? std::optional<std::string>(request.image_id) : std::nullopt;

  // Parameters carry ln_eps and window from the run configuration.
  RefinementParamSet run_params = params;
  for (auto& p : run_params.sets) {
    p.ln_eps = config.ln_eps;
    p.window = config.window;
    p.validate();
  }

  PipelineResult out;
  out.image_id = request.image_id;
  for (const auto& cat : request.categories) {
    CategoryResult r;
    r.category = cat;
    const RetrievalQuery q = in_stage("query", cat, [&] {
      return build_query(provider, cat, request.scene, request.image_id, config.weights);
    });
    r.hits = in_stage("retrieve", cat, [&] { return retriever->retrieve(q, config.k, exclude); });
    r.prototype = in_stage("prototype", cat, [&] { return aggregate_prototype(bank, r.hits, q, config.tau_p); });
    r.prior = in_stage("prior", cat, [&] { return dense_prior(prior_grid, r.prototype, config.sigma); });
    r.anchors = in_stage("anchors", cat, [&] { return extract_anchors(r.prior, config.anchors); });
    r.prompts = in_stage("refine", cat, [&] {
      return refine_all(scales, r.prior, r.anchors, run_params, cat, config.normalize_dense);
    });
    out.categories.push_back(std::move(r));
  }

  CategoryTable head = request.head;
  if (head.empty()) {
    for (const auto& cat : request.categories) {
      head.emplace_back(cat, in_stage("head", cat, [&] { return l2_normalize(provider.text(cat)); }));
    }
  }
  std::vector<MemoryGuidedPrompt> prompts;
  std::vector<std::optional<std::string>> sources;
  for (const auto& r : out.categories) {
    for (const auto& p : r.prompts) {
      prompts.push_back(p);
      sources.emplace_back(p.source_category);
    }
  }
  out.logits = in_stage("score", "*", [&] { return constrain_logits(score_prompts(prompts, head), sources); });
  return out;
}

nlohmann::json pipeline_report(const PipelineResult& result, const PipelineConfig& config, bool include_heatmaps) {
  nlohmann::json j;
  j["image_id"] = result.image_id;
  j["config"] = config_to_json(config);
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& r : result.categories) {
    nlohmann::json c;
    c["category"] = r.category;
    nlohmann::json neighbors = nlohmann::json::array();
    for (const auto& n : r.prototype.neighbors) {
      neighbors.push_back({{"entry_id", n.entry_id}, {"key_score", n.key_score}, {"weight", n.weight}});
    }
    c["neighbors"] = neighbors;
    c["prototype_empty"] = r.prototype.empty();
    nlohmann::json anchors = nlohmann::json::array();
    for (const auto& a : r.anchors.anchors) anchors.push_back({{"x", a.point.x}, {"y", a.point.y}, {"response", a.response}});
    c["anchors"] = anchors;
    c["prompt_count"] = r.prompts.size();
    if (include_heatmaps) c["heatmap"] = heatmap_json(r.prior.heatmap);
    cats.push_back(std::move(c));
  }
  j["categories"] = cats;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < result.logits.rows(); ++i) {
    nlohmann::json row;
    row["prompt"] = result.logits.row_labels[i];
    row["label"] = result.logits.cols() ? nlohmann::json(result.logits.col_labels[result.logits.argmax(i)])
                                        : nlohmann::json(nullptr);
    nlohmann::json scores = nlohmann::json::object();
    for (std::size_t c = 0; c < result.logits.cols(); ++c) {
      const float v = result.logits.at(i, c);
      // JSON has no infinity; masked entries become null.
      scores[result.logits.col_labels[c]] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
    }
    row["scores"] = scores;
    rows.push_back(std::move(row));
  }
  j["prompts"] = rows;
  return j;
}

Matrix perturbed_queries(const MemoryBank& bank, std::size_t count, double noise, std::uint64_t seed) {
  if (bank.size() == 0) throw InvalidInput("perturbed_queries: empty bank");
  Rng rng(derive_seed(seed, "bench-queries"));
  std::uniform_int_distribution<std::size_t> pick(0, bank.size() - 1);
  Matrix out(count, bank.d_key);
  for (std::size_t q = 0; q < count; ++q) {
    const Vector& k = bank.entries[pick(rng)].key;
    const Vector d = random_unit_vector(rng, bank.d_key);
    Vector v(bank.d_key);
    for (std::size_t i = 0; i < bank.d_key; ++i) v[i] = static_cast<float>(k[i] + noise * d[i]);
    const Vector n = l2_normalize(v);
    std::copy(n.begin(), n.end(), out.row(q).begin());
  }
  return out;
}

BenchReport run_bench(const MemoryBank& bank, const IvfPqIndex& index, const Matrix& queries, std::size_t k,
                      std::size_t nprobe, std::size_t recall_size, std::size_t repetitions) {
  if (repetitions == 0) throw InvalidInput("bench: repetitions must be >= 1");
  if (queries.rows == 0) throw InvalidInput("bench: no queries");
  if (queries.cols != bank.d_key) throw InvalidInput("bench: query dim differs from bank key dim");
  const Retriever approx(bank, index, {nprobe, recall_size});
  const Retriever exact(bank);
  std::vector<RetrievalQuery> qs(queries.rows);
  for (std::size_t i = 0; i < queries.rows; ++i) {
    const auto row = queries.row(i);
    qs[i].vector = Vector(std::vector<float>(row.begin(), row.end()));
  }

  using clock = std::chrono::steady_clock;
  auto time_all = [&](const Retriever& r, std::vector<std::vector<SearchHit>>& results) {
    const auto t0 = clock::now();
    for (std::size_t i = 0; i < qs.size(); ++i) results[i] = r.retrieve(qs[i], k);
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    return static_cast<double>(qs.size()) / std::max(secs, 1e-9);
  };

  std::vector<std::vector<SearchHit>> approx_hits(qs.size()), exact_hits(qs.size());
  std::vector<double> approx_rates, exact_rates;
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    approx_rates.push_back(time_all(approx, approx_hits));
    exact_rates.push_back(time_all(exact, exact_hits));
  }

  double recall_sum = 0.0;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    std::unordered_set<std::size_t> truth;
    for (const auto& h : exact_hits[i]) truth.insert(h.entry_id);
    std::size_t found = 0;
    for (const auto& h : approx_hits[i]) found += truth.count(h.entry_id);
    const std::size_t denom = std::min(k, bank.size());
    recall_sum += static_cast<double>(found) / static_cast<double>(denom);
  }

  BenchReport rep;
  rep.queries = qs.size();
  rep.k = k;
  rep.nprobe = std::min<std::size_t>(nprobe, index.params().nlist);
  rep.recall_size = recall_size;
  rep.qps = median(approx_rates);
  rep.flat_qps = median(exact_rates);
  rep.recall_at_k = recall_sum / static_cast<double>(qs.size());
  rep.bank_bytes_per_entry = bank_entry_stride(bank.d_key, bank.d_val);
  rep.index_bytes_per_entry = 8 + index.params().m;
  rep.repetitions = repetitions;
  return rep;
}

nlohmann::json bench_report_json(const BenchReport& r) {
  return {{"queries", r.queries},
          {"k", r.k},
          {"nprobe", r.nprobe},
          {"recall_size", r.recall_size},
          {"qps", r.qps},
          {"flat_qps", r.flat_qps},
          {"recall_at_k", r.recall_at_k},
          {"bank_bytes_per_entry", r.bank_bytes_per_entry},
          {"index_bytes_per_entry", r.index_bytes_per_entry},
          {"repetitions", r.repetitions}};
}

}  // namespace memprior

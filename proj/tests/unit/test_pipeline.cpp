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

#include <doctest.h>

#include <cmath>

#include "memprior/config.hpp"
#include "memprior/errors.hpp"
#include "memprior/pipeline.hpp"
#include "memprior/synthetic.hpp"
#include "../support/fixtures.hpp"

using namespace memprior;

namespace {

struct World {
  SyntheticScenario sc;
  MemoryBank bank;
};

World make_world(std::vector<PlantedRegion> planted, double noise = 0.0, std::uint64_t seed = 7) {
  ScenarioSpec spec;
  spec.planted = std::move(planted);
  spec.noise = noise;
  spec.seed = seed;
  World w{generate_scenario(spec), {}};
  w.bank = build_bank(w.sc.records, w.sc.provider(), PipelineConfig{}.bank_config());
  return w;
}

PipelineRequest request_for(const SyntheticScenario& sc) {
  PipelineRequest r;
  r.image_id = sc.spec.query_image;
  r.scene = sc.spec.scene;
  r.categories = sc.categories;
  return r;
}

RefinementParamSet seeded_params(std::size_t dim) { return {false, {RefinementParams::seeded(dim, 5)}}; }

}  // namespace

TEST_CASE("synthetic scenarios are deterministic and validate their layout") {
  ScenarioSpec spec;
  spec.planted = {{"cup", 5, 5, 3}, {"fork", 20, 20, 5}};
  const auto a = generate_scenario(spec), b = generate_scenario(spec);
  CHECK(a.text == b.text);
  CHECK(a.features == b.features);
  CHECK(a.categories == std::vector<std::string>{"cup", "fork"});
  CHECK(a.records.size() == 2 * 8 + 32);
  CHECK(a.centers[1] == Point2D{20.5 / 32, 20.5 / 32});
  spec.seed = 8;
  CHECK(generate_scenario(spec).text != a.text);

  ScenarioSpec bad;
  bad.planted = {{"cup", 0, 5, 3}};
  CHECK_THROWS_AS(generate_scenario(bad), InvalidInput);
  bad.planted = {{"cup", 5, 5, 3}, {"fork", 6, 6, 3}};
  CHECK_THROWS_AS(generate_scenario(bad), InvalidInput);
  bad.planted = {{"cup", 5, 5, 2}};
  CHECK_THROWS_AS(generate_scenario(bad), InvalidInput);

  const auto places = random_placements(5, "cup", 32, 32, 7.0, 2, 3);
  REQUIRE(places.size() == 5);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < i; ++j)
      CHECK(std::hypot(double(places[i].row) - double(places[j].row), double(places[i].col) - double(places[j].col)) >= 7.0);
  CHECK_THROWS_AS(random_placements(50, "cup", 16, 16, 7.0, 2, 3), InvalidInput);
}

TEST_CASE("pipeline finds every planted region of every category") {
  const World w = make_world({{"cup", 8, 8, 3}, {"cup", 20, 22, 3}, {"fork", 24, 6, 3}});
  const PipelineResult r = run_pipeline(w.bank, nullptr, w.sc.provider(), seeded_params(64), PipelineConfig{},
                                        request_for(w.sc));
  REQUIRE(r.categories.size() == 2);
  for (std::size_t i = 0; i < w.sc.spec.planted.size(); ++i) {
    const auto& p = w.sc.spec.planted[i];
    const auto& cr = *std::find_if(r.categories.begin(), r.categories.end(),
                                   [&](const CategoryResult& c) { return c.category == p.category; });
    double best = 1e9;
    for (const auto& a : cr.anchors.anchors) {
      best = std::min(best, std::hypot(a.point.x - w.sc.centers[i].x, a.point.y - w.sc.centers[i].y));
    }
    CHECK(best * 32 <= 1.5);
  }
  // every prompt row is masked to its own category
  for (std::size_t row = 0; row < r.logits.rows(); ++row) {
    const std::string src = r.logits.row_labels[row].substr(0, r.logits.row_labels[row].find('#'));
    CHECK(r.logits.col_labels[r.logits.argmax(row)] == src);
  }
}

TEST_CASE("pipeline is deterministic and the approximate path agrees with full probing") {
  const World w = make_world({{"cup", 10, 10, 3}});
  PipelineConfig cfg;
  cfg.nlist = 4;
  cfg.m = 4;
  cfg.nbits = 4;
  IvfPqIndex idx = IvfPqIndex::train(key_matrix(w.bank), cfg.index_params());
  idx.add(key_matrix(w.bank));
  const auto provider = w.sc.provider();
  const auto a = run_pipeline(w.bank, nullptr, provider, seeded_params(64), cfg, request_for(w.sc));
  const auto b = run_pipeline(w.bank, nullptr, provider, seeded_params(64), cfg, request_for(w.sc));
  const auto c = run_pipeline(w.bank, &idx, provider, seeded_params(64), cfg, request_for(w.sc));
  CHECK(pipeline_report(a, cfg) == pipeline_report(b, cfg));
  CHECK(a.categories[0].hits == c.categories[0].hits);  // nprobe 16 clamps to nlist 4
  CHECK(pipeline_report(a, cfg) == pipeline_report(c, cfg));
}

TEST_CASE("a bank of distractors only gives a weaker top match than the category's own entries") {
  const World w = make_world({{"cup", 10, 10, 3}});
  MemoryBank distractors = w.bank;
  std::erase_if(distractors.entries, [](const MemoryEntry& e) { return e.category == "cup"; });
  const auto provider = w.sc.provider();
  const auto full = run_pipeline(w.bank, nullptr, provider, seeded_params(64), PipelineConfig{}, request_for(w.sc));
  const auto only = run_pipeline(distractors, nullptr, provider, seeded_params(64), PipelineConfig{}, request_for(w.sc));
  CHECK(full.categories[0].hits[0].score > only.categories[0].hits[0].score + 0.5);
  CHECK(w.bank.entries[full.categories[0].hits[0].entry_id].category == "cup");
}

TEST_CASE("empty requests and empty banks") {
  const World w = make_world({{"cup", 10, 10, 3}});
  PipelineRequest req = request_for(w.sc);
  req.categories.clear();
  const auto none = run_pipeline(w.bank, nullptr, w.sc.provider(), seeded_params(64), PipelineConfig{}, req);
  CHECK(none.categories.empty());
  CHECK(none.logits.rows() == 0);

  MemoryBank empty;
  empty.d_key = w.bank.d_key;
  empty.d_val = w.bank.d_val;
  const auto r = run_pipeline(empty, nullptr, w.sc.provider(), seeded_params(64), PipelineConfig{}, request_for(w.sc));
  REQUIRE(r.categories.size() == 1);
  CHECK(r.categories[0].hits.empty());
  CHECK(r.categories[0].prototype.empty());
  CHECK(r.categories[0].anchors.anchors.empty());
  CHECK(r.categories[0].prompts.empty());
}

TEST_CASE("pipeline errors name the stage and category and keep their type") {
  const World w = make_world({{"cup", 10, 10, 3}});
  PipelineRequest req = request_for(w.sc);
  req.categories = {"cup", "spoon"};
  try {
    run_pipeline(w.bank, nullptr, w.sc.provider(), seeded_params(64), PipelineConfig{}, req);
    FAIL("expected MissingEmbedding");
  } catch (const MissingEmbedding& e) {
    CHECK(std::string(e.what()).rfind("query [spoon]: ", 0) == 0);
  }
  req.categories = {"cup", "cup"};
  CHECK_THROWS_AS(run_pipeline(w.bank, nullptr, w.sc.provider(), seeded_params(64), PipelineConfig{}, req),
                  InvalidInput);
  req = request_for(w.sc);
  CHECK_THROWS_AS(run_pipeline(w.bank, nullptr, w.sc.provider(), seeded_params(32), PipelineConfig{}, req),
                  InvalidInput);
}

TEST_CASE("pipeline report: masked logits are null, config is embedded") {
  const World w = make_world({{"cup", 8, 8, 3}, {"fork", 24, 24, 3}});
  const PipelineConfig cfg;
  const auto r = run_pipeline(w.bank, nullptr, w.sc.provider(), seeded_params(64), cfg, request_for(w.sc));
  const auto j = pipeline_report(r, cfg, true);
  CHECK(j["config"] == config_to_json(cfg));
  REQUIRE(j["prompts"].size() == r.logits.rows());
  for (const auto& p : j["prompts"]) {
    for (const auto& [cat, score] : p["scores"].items()) CHECK(score.is_null() == (cat != p["label"]));
  }
  CHECK(j["categories"][0].contains("heatmap"));
  CHECK_FALSE(pipeline_report(r, cfg)["categories"][0].contains("heatmap"));
}

TEST_CASE("filtering is monotone in min_area and drop_fraction; builds are byte-identical") {
  fixtures::TempDir dir("filter-mono");
  const auto records = fixtures::messy_records(400, 17, dir.path());
  const SyntheticProvider provider(3, 32, 16, 8, 8);
  std::size_t prev = SIZE_MAX;
  for (double area : {0.0, 1e-5, 1e-4, 1e-3, 1e-2, 0.05}) {
    BankBuildConfig cfg;
    cfg.min_area = area;
    const std::size_t n = build_bank(records, provider, cfg).size();
    CHECK(n <= prev);
    prev = n;
  }
  prev = SIZE_MAX;
  for (double f : {0.0, 0.05, 0.1, 0.3, 0.6, 0.9}) {
    BankBuildConfig cfg;
    cfg.drop_fraction = f;
    const std::size_t n = build_bank(records, provider, cfg).size();
    CHECK(n <= prev);
    prev = n;
  }
  CHECK(encode_bank(build_bank(records, provider, {})) == encode_bank(build_bank(records, provider, {})));
}

TEST_CASE("bench: full probing recalls everything, sizes follow the layouts") {
  const Matrix keys = fixtures::random_unit_rows(800, 32, 90);
  const MemoryBank bank = bank_from_keys(keys, 16, 91);
  IvfPqParams p;
  p.nlist = 8;
  p.m = 8;
  p.nbits = 5;
  IvfPqIndex idx = IvfPqIndex::train(keys, p);
  idx.add(keys);
  const Matrix q = perturbed_queries(bank, 40, 0.1, 92);
  const BenchReport full = run_bench(bank, idx, q, 12, 8, 800, 1);
  CHECK(full.recall_at_k == doctest::Approx(1.0));
  CHECK(full.bank_bytes_per_entry == bank_entry_stride(32, 16));
  CHECK(full.index_bytes_per_entry == 8 + 8);
  CHECK(full.qps > 0.0);
  CHECK(full.flat_qps > 0.0);
  const BenchReport one = run_bench(bank, idx, q, 12, 1, 200, 1);
  CHECK(one.recall_at_k <= full.recall_at_k);
  // recall is non-decreasing in recall_size at fixed nprobe
  double prev = 0.0;
  for (std::size_t rs : {12, 24, 50, 100, 200, 400}) {
    const double r = run_bench(bank, idx, q, 12, 2, rs, 1).recall_at_k;
    CHECK(r >= prev - 1e-12);
    prev = r;
  }
  const auto j = bench_report_json(full);
  CHECK(j["recall_at_k"] == full.recall_at_k);
  CHECK_THROWS_AS(run_bench(bank, idx, q, 12, 8, 800, 0), InvalidInput);
}

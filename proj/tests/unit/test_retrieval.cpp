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

#include "memprior/errors.hpp"
#include "memprior/retrieval.hpp"
#include "memprior/synthetic.hpp"
#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

using namespace memprior;

namespace {

RetrievalQuery raw_query(const Vector& v) {
  RetrievalQuery q;
  q.category = "q";
  q.vector = v;
  return q;
}

}  // namespace

TEST_CASE("softmax_weights: examples and oracle") {
  CHECK(softmax_weights(std::vector<double>{0.3}, 0.07) == std::vector<double>{1.0});
  const auto eq = softmax_weights(std::vector<double>{0.5, 0.5, 0.5, 0.5}, 0.07);
  for (double w : eq) CHECK(w == doctest::Approx(0.25));
  // tau 0.07: exp(0.4 / 0.07) ~ 303.0
  const auto w = softmax_weights(std::vector<double>{0.9, 0.5}, 0.07);
  CHECK(w[0] == doctest::Approx(1.0 / (1.0 + std::exp(-0.4 / 0.07))).epsilon(1e-12));
  CHECK(w[0] == doctest::Approx(0.996710).epsilon(1e-5));
  CHECK(softmax_weights(std::vector<double>{}, 0.07).empty());
  CHECK_THROWS_AS(softmax_weights(std::vector<double>{1.0}, 0.0), InvalidInput);
  CHECK_THROWS_AS(softmax_weights(std::vector<double>{1.0}, -1.0), InvalidInput);

  Rng rng(40);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> s(1 + t % 20);
    std::vector<long double> sl;
    for (double& x : s) x = u(rng), sl.push_back(x);
    const double tau = 0.01 + std::abs(u(rng));
    const auto got = softmax_weights(s, tau);
    const auto want = oracle::softmax(sl, tau);
    double total = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(got[i] == doctest::Approx(static_cast<double>(want[i])).epsilon(1e-10));
      total += got[i];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("softmax_weights: order preserving, sharpens as tau shrinks") {
  const std::vector<double> s{0.2, 0.8, 0.5};
  double prev = 0;
  for (double tau : {1.0, 0.3, 0.07, 0.01, 1e-4}) {
    const auto w = softmax_weights(s, tau);
    CHECK(w[1] > w[2]);
    CHECK(w[2] >= w[0]);
    if (tau >= 0.01) CHECK(w[2] > w[0]);  // below that the small weights underflow to 0
    CHECK(w[1] >= prev);
    prev = w[1];
  }
  CHECK(prev == doctest::Approx(1.0));
}

TEST_CASE("aggregate_prototype matches the oracle and is unit norm") {
  const MemoryBank bank = bank_from_keys(fixtures::random_unit_rows(300, 24, 41), 16, 42);
  const Retriever r(bank);
  Rng rng(43);
  for (int t = 0; t < 50; ++t) {
    const auto q = raw_query(random_unit_vector(rng, 24));
    const auto hits = r.retrieve(q, 12);
    const Prototype p = aggregate_prototype(bank, hits, q, 0.07);
    std::vector<long double> scores;
    std::vector<Vector> values;
    for (const auto& h : hits) {
      scores.push_back(oracle::dot(q.vector, bank.entries[h.entry_id].key));
      values.push_back(bank.entries[h.entry_id].value);
    }
    const auto w = oracle::softmax(scores, 0.07L);
    CHECK(oracle::angle(p.vector, oracle::prototype(w, values)) < 1e-5);
    CHECK(l2_norm(p.vector) == doctest::Approx(1.0).epsilon(1e-6));
    REQUIRE(p.neighbors.size() == 12);
    for (std::size_t i = 0; i < 12; ++i) CHECK(p.neighbors[i].weight == doctest::Approx(static_cast<double>(w[i])));
  }
}

TEST_CASE("aggregate_prototype: no hits gives a zero prototype") {
  const MemoryBank bank = bank_from_keys(fixtures::random_unit_rows(10, 8, 44), 5, 45);
  Rng rng(46);
  const Prototype p = aggregate_prototype(bank, {}, raw_query(random_unit_vector(rng, 8)));
  CHECK(p.empty());
  CHECK(p.vector == Vector(5));
}

TEST_CASE("a stored entry's own key triple retrieves it first with score 1") {
  ScenarioSpec spec;
  spec.planted = {{"cup", 10, 10, 3}, {"fork", 20, 20, 3}};
  const auto sc = generate_scenario(spec);
  const auto provider = sc.provider();
  BankBuildConfig cfg;
  cfg.drop_fraction = 0.0;
  const MemoryBank bank = build_bank(sc.records, provider, cfg);
  const Retriever r(bank);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto& e = bank.entries[i];
    const auto& src = *std::find_if(sc.records.begin(), sc.records.end(),
                                    [&](const GroundingRecord& g) { return g.image_id == e.meta.image_id; });
    const auto q = build_query(provider, src.phrase, src.scene, src.image_id, bank.weights);
    const auto hits = r.retrieve(q, 3);
    REQUIRE(!hits.empty());
    CHECK(hits[0].entry_id == i);
    CHECK(hits[0].score == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("exclude_image refills to k from the next best entries") {
  MemoryBank bank = bank_from_keys(fixtures::random_unit_rows(40, 8, 47), 4, 48);
  // make image "img0" hold the best matches: its keys equal the query
  Rng rng(49);
  const Vector qv = random_unit_vector(rng, 8);
  for (std::size_t i = 0; i < 4; ++i) bank.entries[i].key = qv;
  const Retriever r(bank);
  const auto q = raw_query(qv);
  const auto plain = r.retrieve(q, 6);
  CHECK(plain[0].entry_id == 0);
  const auto ex = r.retrieve(q, 6, std::string("img0"));
  REQUIRE(ex.size() == 6);
  for (const auto& h : ex) CHECK(bank.entries[h.entry_id].meta.image_id != "img0");
  // equals the exact ranking over the bank without img0
  std::vector<std::pair<double, std::size_t>> rest;
  for (std::size_t i = 4; i < bank.size(); ++i) rest.push_back({-oracle::dot(bank.entries[i].key, qv), i});
  std::sort(rest.begin(), rest.end());
  for (std::size_t i = 0; i < 6; ++i) CHECK(ex[i].entry_id == rest[i].second);
}

TEST_CASE("approximate retriever with full probing equals the exact one") {
  const Matrix keys = fixtures::random_unit_rows(1200, 32, 50);
  const MemoryBank bank = bank_from_keys(keys, 8, 51);
  IvfPqParams p;
  p.nlist = 16;
  p.m = 8;
  p.nbits = 6;
  p.kmeans_iters = 8;
  IvfPqIndex idx = IvfPqIndex::train(keys, p);
  idx.add(keys);
  const Retriever exact(bank), approx(bank, idx, {64, 1200});  // nprobe clamps to nlist
  CHECK(approx.approximate());
  Rng rng(52);
  for (int t = 0; t < 20; ++t) {
    const auto q = raw_query(random_unit_vector(rng, 32));
    CHECK(approx.retrieve(q, 12) == exact.retrieve(q, 12));
    CHECK(approx.retrieve(q, 12, std::string("img3")) == exact.retrieve(q, 12, std::string("img3")));
  }
}

TEST_CASE("retrieve edge cases") {
  const MemoryBank empty;
  CHECK(Retriever(empty).retrieve(raw_query(Vector(4)), 5).empty());
  const MemoryBank bank = bank_from_keys(fixtures::random_unit_rows(10, 8, 53), 4, 54);
  CHECK_THROWS_AS(Retriever(bank).retrieve(raw_query(Vector(8)), 0), InvalidInput);
  CHECK_THROWS_AS(Retriever(bank).retrieve(raw_query(Vector(7)), 3), InvalidInput);
  CHECK(Retriever(bank).retrieve(raw_query(Vector(8, 1.0f)), 50).size() == 10);
}

TEST_CASE("build_query uses the memory key formula") {
  const SyntheticProvider p(3, 16, 8);
  const KeyWeights w;
  const auto q = build_query(p, "cup", "kitchen", "img", w);
  CHECK(q.vector == build_key(p.text("cup"), p.text("kitchen"), p.image("img"), w));
  const auto no_scene = build_query(p, "cup", "", "img", w);
  CHECK(no_scene.vector == build_key(p.text("cup"), Vector(16), p.image("img"), w));
}

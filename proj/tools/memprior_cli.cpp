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

// memprior command-line front end. Exit codes: 0 success, 1 usage error, 2 data or format error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "memprior/ann_index.hpp"
#include "memprior/binary_io.hpp"
#include "memprior/config.hpp"
#include "memprior/embedding_provider.hpp"
#include "memprior/errors.hpp"
#include "memprior/memory_bank.hpp"
#include "memprior/pipeline.hpp"
#include "memprior/priors.hpp"
#include "memprior/prompt_refinement.hpp"
#include "memprior/records.hpp"
#include "memprior/retrieval.hpp"
#include "memprior/synthetic.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace memprior;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string flag_name(const std::string& key) {
  std::string s = key == "root" ? "seed" : key;
  std::replace(s.begin(), s.end(), '_', '-');
  return "--" + s;
}

struct ProviderArgs {
  std::string text, images, features;
  std::optional<std::uint64_t> synthetic_seed;
  std::size_t key_dim = 64, value_dim = 64, grid = 16;
};

void add_provider_options(CLI::App* sub, ProviderArgs& a) {
  sub->add_option("--text-emb", a.text, "PMEM table of phrase and scene embeddings");
  sub->add_option("--image-emb", a.images, "PMEM table of global image embeddings");
  sub->add_option("--features", a.features, "PGRD table of patch feature grids (scale s>0 stored as <image>@s)");
  sub->add_option("--synthetic-seed", a.synthetic_seed, "hash every name to seeded embeddings instead of tables");
  sub->add_option("--key-dim", a.key_dim, "key dim of the synthetic provider")->capture_default_str();
  sub->add_option("--value-dim", a.value_dim, "value dim of the synthetic provider")->capture_default_str();
  sub->add_option("--grid", a.grid, "grid side of the synthetic provider")->capture_default_str();
}

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderArgs& a) {
  if (a.synthetic_seed) {
    return std::make_unique<SyntheticProvider>(*a.synthetic_seed, a.key_dim, a.value_dim, a.grid, a.grid);
  }
  if (a.text.empty() && a.images.empty() && a.features.empty()) {
    throw UsageError("an embedding source is required: --text-emb/--image-emb/--features or --synthetic-seed");
  }
  EmbeddingTable text, images;
  GridTable grids;
  if (!a.text.empty()) text = load_embedding_table(a.text);
  if (!a.images.empty()) images = load_embedding_table(a.images);
  if (!a.features.empty()) grids = load_grid_table(a.features);
  return std::make_unique<TableProvider>(std::move(text), std::move(images), std::move(grids));
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::vector<FeatureGrid> load_scales(const EmbeddingProvider& provider, const std::string& image, std::size_t count) {
  if (count == 0) throw UsageError("--scales must be >= 1");
  std::vector<FeatureGrid> out;
  out.push_back(provider.features(image));
  for (std::size_t s = 1; s < count; ++s) out.push_back(provider.features(image + "@" + std::to_string(s)));
  return out;
}

RefinementParamSet resolve_params(const std::string& path, std::size_t dim, const PipelineConfig& config) {
  if (!path.empty()) return load_params(path);
  RefinementParamSet set;
  RefinementParams p = RefinementParams::seeded(dim, config.stage_seed("refine-params"));
  if (config.zero_init) {
    p.sparse_proj = Matrix(dim, dim);
    p.dense_proj = Matrix(dim, dim);
  }
  set.sets.push_back(std::move(p));
  return set;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    io::write_text_atomic(path, text);
  }
}

// Shared by retrieve, priors and pipeline.
struct RetrievalArgs {
  std::string bank, index, categories_file, scene, image;
  std::vector<std::string> categories;
};

void add_retrieval_options(CLI::App* sub, RetrievalArgs& a) {
  sub->add_option("--bank", a.bank, "PBNK memory bank")->required();
  sub->add_option("--index", a.index, "PIVF index; omit for an exact scan");
  sub->add_option("--categories", a.categories_file, "file with one category per line");
  sub->add_option("--category", a.categories, "category (repeatable), appended after --categories");
  sub->add_option("--scene", a.scene, "scene descriptor of the query image");
  sub->add_option("--image", a.image, "query image id")->required();
}

std::vector<std::string> categories_of(const RetrievalArgs& a) {
  std::vector<std::string> out;
  if (!a.categories_file.empty()) out = read_lines(a.categories_file);
  out.insert(out.end(), a.categories.begin(), a.categories.end());
  return out;
}

struct LoadedMemory {
  MemoryBank bank;
  std::optional<IvfPqIndex> index;
};

LoadedMemory load_memory(const RetrievalArgs& a) {
  LoadedMemory m{load_bank(a.bank), std::nullopt};
  if (!a.index.empty()) m.index = load_index(a.index);
  return m;
}

std::string slug(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", i);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memprior: retrieval-grounded visual priors from an external memory bank"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "INI config file; flags below override it");
  const PipelineConfig defaults;
  std::vector<std::pair<const ConfigKey*, std::string>> overrides;
  std::map<std::string, std::string> flag_values;
  for (const auto& key : config_keys()) {
    const std::string name = flag_name(key.key);
    app.add_option(name, flag_values[key.section + "." + key.key],
                   "[" + key.section + "] " + key.help + " (default " +
                       get_config_value(defaults, key.section, key.key) + ")")
        ->group("Config overrides");
  }

  auto resolve_config = [&]() {
    try {
      PipelineConfig c = config_path.empty() ? PipelineConfig{} : load_config(config_path);
      for (const auto& key : config_keys()) {
        const auto& v = flag_values[key.section + "." + key.key];
        if (!v.empty()) set_config_value(c, key.section, key.key, v);
      }
      c.validate();
      return c;
    } catch (const InvalidInput& e) {
      throw UsageError(e.what());
    }
  };

  // config
  auto* cmd_config = app.add_subcommand("config", "print the effective configuration");
  bool as_ini = false;
  cmd_config->add_flag("--ini", as_ini, "print INI instead of JSON");

  // build-memory
  auto* cmd_build = app.add_subcommand("build-memory", "filter grounding records and write a memory bank");
  std::string records_path, crop_root, exclude_path, bank_out;
  ProviderArgs build_provider;
  cmd_build->add_option("--records", records_path, "JSONL grounding records")->required();
  cmd_build->add_option("--crop-root", crop_root, "directory that gray_crop paths resolve against");
  cmd_build->add_option("--exclude-images", exclude_path, "file of image ids to leave out, one per line");
  cmd_build->add_option("--out", bank_out, "output bank (PBNK)")->required();
  add_provider_options(cmd_build, build_provider);

  // build-index
  auto* cmd_index = app.add_subcommand("build-index", "train an IVF-PQ index over a bank's keys");
  std::string index_bank, index_out;
  cmd_index->add_option("--bank", index_bank, "PBNK memory bank")->required();
  cmd_index->add_option("--out", index_out, "output index (PIVF)")->required();

  // retrieve
  auto* cmd_retrieve = app.add_subcommand("retrieve", "retrieve neighbours and prototypes, one JSON line per category");
  RetrievalArgs retrieve_args;
  ProviderArgs retrieve_provider;
  std::string retrieve_out;
  add_retrieval_options(cmd_retrieve, retrieve_args);
  add_provider_options(cmd_retrieve, retrieve_provider);
  cmd_retrieve->add_option("--out", retrieve_out, "output JSONL (default stdout)");

  // priors
  auto* cmd_priors = app.add_subcommand("priors", "dense heatmaps and anchors per category");
  RetrievalArgs priors_args;
  ProviderArgs priors_provider;
  std::string priors_dir;
  bool priors_pgm = false;
  add_retrieval_options(cmd_priors, priors_args);
  add_provider_options(cmd_priors, priors_provider);
  cmd_priors->add_option("--out-dir", priors_dir, "writes NNN.phmp heatmaps and anchors.jsonl")->required();
  cmd_priors->add_flag("--pgm", priors_pgm, "also write NNN.pgm renderings");

  // refine
  auto* cmd_refine = app.add_subcommand("refine", "memory-guided prompts from stored priors");
  ProviderArgs refine_provider;
  std::string refine_image, refine_priors, refine_params, refine_out;
  std::size_t refine_scales = 1;
  add_provider_options(cmd_refine, refine_provider);
  cmd_refine->add_option("--image", refine_image, "image id of the feature grids")->required();
  cmd_refine->add_option("--priors", refine_priors, "directory written by `priors`")->required();
  cmd_refine->add_option("--params", refine_params, "PPRM parameters; omitted: init from --zero-init / --seed");
  cmd_refine->add_option("--scales", refine_scales, "feature scales to refine at")->capture_default_str();
  cmd_refine->add_option("--out", refine_out, "writes <out>.pmem prompts and <out>.json sidecar")->required();

  // pipeline
  auto* cmd_pipeline = app.add_subcommand("pipeline", "full run for one image, one JSON report");
  RetrievalArgs pipe_args;
  ProviderArgs pipe_provider;
  std::string pipe_params, pipe_head, pipe_report;
  std::size_t pipe_scales = 1;
  bool pipe_heatmaps = false;
  add_retrieval_options(cmd_pipeline, pipe_args);
  add_provider_options(cmd_pipeline, pipe_provider);
  cmd_pipeline->add_option("--params", pipe_params, "PPRM parameters; omitted: init from --zero-init / --seed");
  cmd_pipeline->add_option("--head", pipe_head, "PMEM category embeddings for scoring (default: text embeddings)");
  cmd_pipeline->add_option("--scales", pipe_scales, "feature scales to refine at")->capture_default_str();
  cmd_pipeline->add_option("--report", pipe_report, "output JSON (default stdout)");
  cmd_pipeline->add_flag("--heatmaps", pipe_heatmaps, "include heatmaps in the report");

  // init-params
  auto* cmd_init = app.add_subcommand("init-params", "write seeded or zero-projection refinement parameters");
  std::size_t init_dim = 0, init_sets = 1;
  std::string init_out;
  cmd_init->add_option("--dim", init_dim, "prompt dimension")->required();
  cmd_init->add_option("--per-scale", init_sets, "number of per-scale sets (1: shared)")->capture_default_str();
  cmd_init->add_option("--out", init_out, "output PPRM")->required();

  // gen-synthetic
  auto* cmd_gen = app.add_subcommand("gen-synthetic", "write a planted toy scenario");
  ScenarioSpec gen_spec;
  std::vector<std::string> gen_planted;
  std::size_t gen_random = 0;
  std::string gen_category = "object", gen_dir;
  cmd_gen->add_option("--out-dir", gen_dir, "output directory")->required();
  cmd_gen->add_option("--planted", gen_planted, "region as category:row:col[:extent] (repeatable)");
  cmd_gen->add_option("--random-planted", gen_random, "place this many regions of --category at random");
  cmd_gen->add_option("--category", gen_category, "category for --random-planted")->capture_default_str();
  cmd_gen->add_option("--height", gen_spec.grid_height, "query grid height")->capture_default_str();
  cmd_gen->add_option("--width", gen_spec.grid_width, "query grid width")->capture_default_str();
  cmd_gen->add_option("--key-dim", gen_spec.key_dim, "key dim")->capture_default_str();
  cmd_gen->add_option("--value-dim", gen_spec.value_dim, "value dim")->capture_default_str();
  cmd_gen->add_option("--noise", gen_spec.noise, "per-element feature noise")->capture_default_str();
  cmd_gen->add_option("--entries-per-category", gen_spec.entries_per_category, "memory entries per category")
      ->capture_default_str();
  cmd_gen->add_option("--distractors", gen_spec.distractors, "unrelated memory entries")->capture_default_str();
  cmd_gen->add_option("--scene", gen_spec.scene, "scene of the query and category entries")->capture_default_str();

  // bench
  auto* cmd_bench = app.add_subcommand("bench", "queries per second and recall@k against the exact scan");
  std::string bench_bank, bench_index;
  std::size_t bench_queries = 1000, bench_reps = 3, bench_corpus = 0, bench_dim = 256;
  double bench_noise = 0.3;
  cmd_bench->add_option("--bank", bench_bank, "PBNK bank (with --index)");
  cmd_bench->add_option("--index", bench_index, "PIVF index over the bank");
  cmd_bench->add_option("--corpus", bench_corpus, "instead of files: synthesize this many keys and train an index");
  cmd_bench->add_option("--dim", bench_dim, "key dim of the synthesized corpus")->capture_default_str();
  cmd_bench->add_option("--queries", bench_queries, "query count")->capture_default_str();
  cmd_bench->add_option("--reps", bench_reps, "timed repetitions, median reported")->capture_default_str();
  cmd_bench->add_option("--query-noise", bench_noise, "perturbation of bank keys used as queries")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const PipelineConfig config = resolve_config();

    if (cmd_config->parsed()) {
      std::cout << (as_ini ? format_config(config) : config_to_json(config).dump(2) + "\n");

    } else if (cmd_build->parsed()) {
      const auto provider = make_provider(build_provider);
      BankBuildConfig bc = config.bank_config();
      if (!exclude_path.empty()) {
        for (auto& id : read_lines(exclude_path)) bc.excluded_images.insert(std::move(id));
      }
      const auto records = load_grounding_records(records_path, crop_root);
      const MemoryBank bank = build_bank(records, *provider, bc);
      save_bank(bank, bank_out);
      const auto& m = bank.manifest;
      std::cout << json{{"entries", bank.size()},
                        {"d_key", bank.d_key},
                        {"d_val", bank.d_val},
                        {"input_records", m.input_records},
                        {"removed_excluded", m.removed_excluded},
                        {"removed_small", m.removed_small},
                        {"removed_merged", m.removed_merged},
                        {"removed_blur", m.removed_blur},
                        {"bytes_per_entry", bank_entry_stride(bank.d_key, bank.d_val)}}
                       .dump()
                << "\n";

    } else if (cmd_index->parsed()) {
      const MemoryBank bank = load_bank(index_bank);
      auto index = IvfPqIndex::train(key_matrix(bank), config.index_params());
      index.add(key_matrix(bank), 0);
      index.freeze();
      save_index(index, index_out);
      const auto p = index.params();
      std::cout << json{{"entries", index.size()}, {"nlist", p.nlist}, {"m", p.m}, {"nbits", p.nbits}, {"seed", p.seed}}
                       .dump()
                << "\n";

    } else if (cmd_retrieve->parsed()) {
      const auto provider = make_provider(retrieve_provider);
      const auto mem = load_memory(retrieve_args);
      const Retriever r = mem.index ? Retriever(mem.bank, *mem.index, {config.nprobe, config.recall_size})
                                    : Retriever(mem.bank);
      const auto exclude = config.exclude_self ? std::optional<std::string>(retrieve_args.image) : std::nullopt;
      std::ostringstream out;
      for (const auto& cat : categories_of(retrieve_args)) {
        const auto q = build_query(*provider, cat, retrieve_args.scene, retrieve_args.image, config.weights);
        const auto hits = r.retrieve(q, config.k, exclude);
        const auto proto = aggregate_prototype(mem.bank, hits, q, config.tau_p);
        json hj = json::array();
        for (const auto& n : proto.neighbors) {
          const auto& e = mem.bank.entries[n.entry_id];
          hj.push_back({{"entry_id", n.entry_id},
                        {"score", n.key_score},
                        {"weight", n.weight},
                        {"phrase", e.category},
                        {"image_id", e.meta.image_id}});
        }
        out << json{{"category", cat}, {"hits", hj}, {"prototype", proto.vector.values()}}.dump() << "\n";
      }
      emit(retrieve_out, out.str());

    } else if (cmd_priors->parsed()) {
      const auto provider = make_provider(priors_provider);
      const auto mem = load_memory(priors_args);
      const Retriever r = mem.index ? Retriever(mem.bank, *mem.index, {config.nprobe, config.recall_size})
                                    : Retriever(mem.bank);
      const auto exclude = config.exclude_self ? std::optional<std::string>(priors_args.image) : std::nullopt;
      const FeatureGrid grid = provider->features(priors_args.image);
      fs::create_directories(priors_dir);
      std::ostringstream anchors_out;
      json summary = json::array();
      const auto cats = categories_of(priors_args);
      for (std::size_t i = 0; i < cats.size(); ++i) {
        const auto q = build_query(*provider, cats[i], priors_args.scene, priors_args.image, config.weights);
        const auto proto = aggregate_prototype(mem.bank, r.retrieve(q, config.k, exclude), q, config.tau_p);
        const auto prior = dense_prior(grid, proto, config.sigma);
        const auto anchors = extract_anchors(prior, config.anchors);
        save_heatmap(prior, fs::path(priors_dir) / (slug(i) + ".phmp"));
        if (priors_pgm) {
          ScalarMap scaled = prior.heatmap;
          for (float& v : scaled.data) v *= 255.0f;
          io::write_file_atomic(fs::path(priors_dir) / (slug(i) + ".pgm"), encode_pgm(scaled));
        }
        for (const auto& a : anchors.anchors) {
          anchors_out << json{{"category", cats[i]}, {"x", a.point.x}, {"y", a.point.y}, {"response", a.response}}.dump()
                      << "\n";
        }
        summary.push_back({{"category", cats[i]}, {"heatmap", slug(i) + ".phmp"}, {"anchors", anchors.anchors.size()}});
      }
      io::write_text_atomic(fs::path(priors_dir) / "anchors.jsonl", anchors_out.str());
      std::cout << summary.dump() << "\n";

    } else if (cmd_refine->parsed()) {
      const auto provider = make_provider(refine_provider);
      const auto scales = load_scales(*provider, refine_image, refine_scales);
      RefinementParamSet params = resolve_params(refine_params, scales.front().dim, config);
      for (auto& p : params.sets) {
        p.ln_eps = config.ln_eps;
        p.window = config.window;
      }
      std::vector<DensePrior> priors;
      for (const auto& entry : fs::directory_iterator(refine_priors)) {
        if (entry.path().extension() == ".phmp") priors.push_back(load_heatmap(entry.path()));
      }
      std::map<std::string, AnchorSet> anchors;
      std::vector<std::string> order;
      std::ifstream in(fs::path(refine_priors) / "anchors.jsonl");
      if (!in) throw InvalidInput("missing anchors.jsonl in " + refine_priors);
      std::string line;
      std::uint64_t offset = 0;
      while (std::getline(in, line)) {
        const std::uint64_t at = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        try {
          const auto j = json::parse(line);
          const std::string cat = j.at("category").get<std::string>();
          if (!anchors.contains(cat)) order.push_back(cat);
          auto& set = anchors[cat];
          set.category = cat;
          set.anchors.push_back({{j.at("x").get<double>(), j.at("y").get<double>()}, j.at("response").get<double>()});
        } catch (const json::exception& e) {
          throw FormatError(std::string("anchors.jsonl: ") + e.what(), at);
        }
      }
      EmbeddingTable prompts_out;
      json sidecar = json::array();
      std::size_t j = 0;
      for (const auto& cat : order) {
        const auto it = std::find_if(priors.begin(), priors.end(), [&](const DensePrior& p) { return p.category == cat; });
        if (it == priors.end()) throw InvalidInput("no heatmap for category \"" + cat + "\"");
        for (const auto& p : refine_all(scales, *it, anchors[cat], params, cat, config.normalize_dense)) {
          const std::string name = cat + "#" + std::to_string(j++);
          prompts_out.emplace(name, p.embedding);
          sidecar.push_back({{"name", name},
                             {"category", p.source_category},
                             {"anchor", {p.anchor.x, p.anchor.y}},
                             {"scale", p.scale_index}});
        }
      }
      save_embedding_table(prompts_out, refine_out + ".pmem");
      io::write_text_atomic(refine_out + ".json", sidecar.dump(2) + "\n");
      std::cout << json{{"prompts", j}}.dump() << "\n";

    } else if (cmd_pipeline->parsed()) {
      const auto provider = make_provider(pipe_provider);
      const auto mem = load_memory(pipe_args);
      PipelineRequest req;
      req.image_id = pipe_args.image;
      req.scene = pipe_args.scene;
      req.categories = categories_of(pipe_args);
      req.scales = load_scales(*provider, pipe_args.image, pipe_scales);
      if (!pipe_head.empty()) {
        const auto table = load_embedding_table(pipe_head);
        for (const auto& c : req.categories) {
          const auto it = table.find(c);
          if (it == table.end()) throw MissingEmbedding("--head has no embedding for \"" + c + "\"");
          req.head.emplace_back(c, it->second);
        }
      }
      const auto params = resolve_params(pipe_params, req.scales.front().dim, config);
      const auto result = run_pipeline(mem.bank, mem.index ? &*mem.index : nullptr, *provider, params, config, req);
      emit(pipe_report, pipeline_report(result, config, pipe_heatmaps).dump(2) + "\n");

    } else if (cmd_init->parsed()) {
      if (init_dim == 0 || init_sets == 0) throw UsageError("--dim and --per-scale must be >= 1");
      RefinementParamSet set;
      set.per_scale = init_sets > 1;
      for (std::size_t s = 0; s < init_sets; ++s) {
        RefinementParams p = RefinementParams::seeded(init_dim, config.stage_seed("refine-params/" + std::to_string(s)));
        if (config.zero_init) {
          p.sparse_proj = Matrix(init_dim, init_dim);
          p.dense_proj = Matrix(init_dim, init_dim);
        }
        set.sets.push_back(std::move(p));
      }
      save_params(set, init_out);

    } else if (cmd_gen->parsed()) {
      gen_spec.seed = config.stage_seed("scenario");
      for (const auto& text : gen_planted) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
        if (parts.size() < 3 || parts.size() > 4) throw UsageError("--planted expects category:row:col[:extent]");
        try {
          gen_spec.planted.push_back({parts[0], std::stoul(parts[1]), std::stoul(parts[2]),
                                      parts.size() == 4 ? std::stoul(parts[3]) : 3});
        } catch (const std::logic_error&) {
          throw UsageError("--planted: bad number in \"" + text + "\"");
        }
      }
      if (gen_random > 0) {
        const auto placed = random_placements(gen_random, gen_category, gen_spec.grid_height, gen_spec.grid_width, 7.0,
                                              2, config.stage_seed("placements"));
        gen_spec.planted.insert(gen_spec.planted.end(), placed.begin(), placed.end());
      }
      const auto sc = generate_scenario(gen_spec);
      const fs::path dir(gen_dir);
      fs::create_directories(dir);
      save_grounding_records(sc.records, dir / "records.jsonl");
      save_embedding_table(sc.text, dir / "text.pmem");
      save_embedding_table(sc.images, dir / "images.pmem");
      save_grid_table(sc.features, dir / "features.pgrd");
      std::string cats;
      for (const auto& c : sc.categories) cats += c + "\n";
      io::write_text_atomic(dir / "categories.txt", cats);
      json truth = {{"query_image", gen_spec.query_image}, {"scene", gen_spec.scene}, {"regions", json::array()}};
      for (std::size_t i = 0; i < gen_spec.planted.size(); ++i) {
        truth["regions"].push_back({{"category", gen_spec.planted[i].category},
                                    {"row", gen_spec.planted[i].row},
                                    {"col", gen_spec.planted[i].col},
                                    {"x", sc.centers[i].x},
                                    {"y", sc.centers[i].y}});
      }
      io::write_text_atomic(dir / "truth.json", truth.dump(2) + "\n");
      std::cout << json{{"records", sc.records.size()}, {"categories", sc.categories}}.dump() << "\n";

    } else if (cmd_bench->parsed()) {
      MemoryBank bank;
      std::optional<IvfPqIndex> index;
      Matrix queries;
      if (bench_corpus > 0) {
        KeyCorpusSpec spec;
        spec.count = bench_corpus;
        spec.dim = bench_dim;
        spec.weights = config.weights;
        spec.seed = config.stage_seed("corpus");
        auto corpus = generate_key_corpus(spec, bench_queries);
        bank = bank_from_keys(corpus.keys, 16, config.stage_seed("corpus-values"));
        index = IvfPqIndex::train(corpus.keys, config.index_params());
        index->add(corpus.keys, 0);
        index->freeze();
        queries = std::move(corpus.queries);
      } else {
        if (bench_bank.empty() || bench_index.empty()) throw UsageError("bench needs --bank and --index, or --corpus");
        bank = load_bank(bench_bank);
        index = load_index(bench_index);
        queries = perturbed_queries(bank, bench_queries, bench_noise, config.stage_seed("bench"));
      }
      const auto rep = run_bench(bank, *index, queries, config.k, config.nprobe, config.recall_size, bench_reps);
      std::cout << bench_report_json(rep).dump(2) << "\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

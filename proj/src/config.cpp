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

#include "memprior/config.hpp"

#include <cmath>
#include <algorithm>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "memprior/errors.hpp"
#include "memprior/random.hpp"

namespace memprior {
namespace {

namespace pt = boost::property_tree;

// One table drives parsing, formatting, flags and the unknown-key check.
struct Field {
  char kind;  // 'd'ouble, 'i'nteger, 'b'ool
  const char* section;
  const char* key;
  const char* help;
  void (*read)(PipelineConfig&, const std::string&);
  std::string (*write)(const PipelineConfig&);
};

template <class T>
T parse_value(const std::string& text, const char* key) {
  std::istringstream in(text);
  T v{};
  if constexpr (std::is_same_v<T, bool>) {
    std::string word;
    in >> word;
    if (word == "true" || word == "1") return true;
    if (word == "false" || word == "0") return false;
    throw InvalidInput(std::string("config: ") + key + " expects true/false, got \"" + text + "\"");
  } else {
    if constexpr (std::is_unsigned_v<T>) {
      if (text.find('-') != std::string::npos) {
        throw InvalidInput(std::string("config: ") + key + " must be non-negative");
      }
    }
    in >> v;
    if (!in || !(in >> std::ws).eof()) {
      throw InvalidInput(std::string("config: cannot parse ") + key + " = \"" + text + "\"");
    }
  }
  return v;
}

// Shortest of 15 or 17 significant digits that reads back exactly.
std::string show(double v) {
  for (int precision : {15, 17}) {
    std::ostringstream out;
    out.precision(precision);
    out << v;
    if (precision == 17 || std::stod(out.str()) == v) return out.str();
  }
  return {};
}

#define MP_FIELD_D(sec, name, member, help)                                                              \
  Field {                                                                                                \
    'd', sec, name, help, [](PipelineConfig& c, const std::string& s) { c.member = parse_value<double>(s, name); }, \
        [](const PipelineConfig& c) { return show(c.member); }                                           \
  }
#define MP_FIELD_I(sec, name, member, help)                                    \
  Field {                                                                      \
    'i', sec, name, help,                                                      \
        [](PipelineConfig& c, const std::string& s) {                          \
          c.member = parse_value<std::decay_t<decltype(c.member)>>(s, name);   \
        },                                                                     \
        [](const PipelineConfig& c) { return std::to_string(c.member); }       \
  }
#define MP_FIELD_B(sec, name, member, help)                                                               \
  Field {                                                                                                 \
    'b', sec, name, help, [](PipelineConfig& c, const std::string& s) { c.member = parse_value<bool>(s, name); }, \
        [](const PipelineConfig& c) { return std::string(c.member ? "true" : "false"); }                  \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      MP_FIELD_I("retrieval", "k", k, "neighbours aggregated per category"),
      MP_FIELD_D("retrieval", "tau_p", tau_p, "softmax temperature over key similarities"),
      MP_FIELD_D("retrieval", "w_phrase", weights.phrase, "phrase weight in keys and queries"),
      MP_FIELD_D("retrieval", "w_scene", weights.scene, "scene weight in keys and queries"),
      MP_FIELD_D("retrieval", "w_image", weights.image, "global image weight in keys and queries"),
      MP_FIELD_I("retrieval", "recall_size", recall_size, "approximate candidates re-ranked exactly"),
      MP_FIELD_B("retrieval", "exclude_self", exclude_self, "drop memory entries from the query image"),
      MP_FIELD_D("priors", "sigma", sigma, "Gaussian smoothing of the similarity map, in cells"),
      MP_FIELD_D("priors", "threshold", anchors.threshold, "minimum anchor response on the [0,1] heatmap"),
      MP_FIELD_D("priors", "radius", anchors.radius_cells, "anchor suppression radius, in cells"),
      MP_FIELD_I("priors", "max_anchors", anchors.max_anchors, "anchors kept per category"),
      MP_FIELD_I("refine", "window", window, "odd side of the dense pooling window, in cells"),
      MP_FIELD_B("refine", "normalize_dense", normalize_dense, "divide the dense feature by the window's heat"),
      MP_FIELD_D("refine", "ln_eps", ln_eps, "layer-norm epsilon"),
      MP_FIELD_B("refine", "zero_init", zero_init, "zero projections when no parameter file is given"),
      MP_FIELD_I("index", "nlist", nlist, "coarse clusters"),
      MP_FIELD_I("index", "m", m, "PQ sub-quantizers"),
      MP_FIELD_I("index", "nbits", nbits, "bits per PQ code"),
      MP_FIELD_I("index", "kmeans_iters", kmeans_iters, "Lloyd iterations for every quantizer"),
      MP_FIELD_I("index", "nprobe", nprobe, "coarse lists scanned per query"),
      MP_FIELD_D("filter", "min_area", min_area, "minimum normalized box area"),
      MP_FIELD_D("filter", "iou_threshold", iou_threshold, "IoU at which same-phrase boxes merge"),
      MP_FIELD_D("filter", "drop_fraction", drop_fraction, "share of blurriest records dropped"),
      MP_FIELD_I("seeds", "root", seed, "root of every random stream"),
  };
  return table;
}

#undef MP_FIELD_D
#undef MP_FIELD_I
#undef MP_FIELD_B

const Field& find_field(std::string_view section, std::string_view key) {
  const auto& all = fields();
  const auto it = std::find_if(all.begin(), all.end(), [&](const Field& f) { return section == f.section && key == f.key; });
  if (it == all.end()) throw InvalidInput("config: unknown key " + std::string(section) + "." + std::string(key));
  return *it;
}

void check(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput("config: " + what);
}

bool finite(double x) { return std::isfinite(x); }

}  // namespace

void PipelineConfig::validate() const {
  check(k >= 1, "retrieval.k must be >= 1");
  check(finite(tau_p) && tau_p > 0.0, "retrieval.tau_p must be > 0");
  check(finite(weights.phrase) && finite(weights.scene) && finite(weights.image), "retrieval weights must be finite");
  check(recall_size >= 1, "retrieval.recall_size must be >= 1");
  check(nprobe >= 1, "retrieval.nprobe must be >= 1");
  check(finite(sigma) && sigma >= 0.0, "priors.sigma must be >= 0");
  check(anchors.threshold >= 0.0 && anchors.threshold <= 1.0, "priors.threshold must be in [0, 1]");
  check(finite(anchors.radius_cells) && anchors.radius_cells > 0.0, "priors.radius must be > 0");
  check(window >= 1 && window % 2 == 1, "refine.window must be odd");
  check(finite(ln_eps) && ln_eps > 0.0, "refine.ln_eps must be > 0");
  check(nlist >= 1, "index.nlist must be >= 1");
  check(m >= 1, "index.m must be >= 1");
  check(nbits >= 1 && nbits <= 8, "index.nbits must be in [1, 8]");
  check(kmeans_iters >= 1, "index.kmeans_iters must be >= 1");
  check(finite(min_area) && min_area >= 0.0, "filter.min_area must be >= 0");
  check(iou_threshold > 0.0 && iou_threshold <= 1.0, "filter.iou_threshold must be in (0, 1]");
  check(drop_fraction >= 0.0 && drop_fraction < 1.0, "filter.drop_fraction must be in [0, 1)");
}

std::uint64_t PipelineConfig::stage_seed(std::string_view stage) const { return derive_seed(seed, stage); }

IvfPqParams PipelineConfig::index_params() const {
  return {nlist, m, nbits, stage_seed("index"), kmeans_iters};
}

BankBuildConfig PipelineConfig::bank_config() const {
  BankBuildConfig c;
  c.weights = weights;
  c.min_area = min_area;
  c.iou_threshold = iou_threshold;
  c.drop_fraction = drop_fraction;
  return c;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& f : fields()) out.push_back({f.section, f.key, f.help});
    return out;
  }();
  return keys;
}

void set_config_value(PipelineConfig& config, std::string_view section, std::string_view key,
                      const std::string& value) {
  find_field(section, key).read(config, value);
}

std::string get_config_value(const PipelineConfig& config, std::string_view section, std::string_view key) {
  return find_field(section, key).write(config);
}

PipelineConfig parse_config(const std::string& ini_text, const PipelineConfig& base) {
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InvalidInput(std::string("config: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  PipelineConfig c = base;
  for (const auto& [section, entries] : tree) {
    if (entries.empty()) throw InvalidInput("config: key \"" + section + "\" outside any section");
    for (const auto& [key, node] : entries) find_field(section, key).read(c, node.get_value<std::string>());
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path, const PipelineConfig& base) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open config " + path.string());
  std::ostringstream text;
  text << f.rdbuf();
  return parse_config(text.str(), base);
}

std::string format_config(const PipelineConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.write(config) << '\n';
  }
  return out.str();
}

nlohmann::json config_to_json(const PipelineConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : fields()) {
    const std::string text = f.write(config);
    nlohmann::json v;
    switch (f.kind) {
      case 'b': v = text == "true"; break;
      case 'd': v = std::stod(text); break;
      default: v = std::stoull(text); break;
    }
    j[f.section][f.key] = v;
  }
  j["index"]["seed"] = config.index_params().seed;
  return j;
}

}  // namespace memprior

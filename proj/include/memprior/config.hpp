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

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "memprior/ann_index.hpp"
#include "memprior/embedding_core.hpp"
#include "memprior/memory_bank.hpp"
#include "memprior/priors.hpp"
#include "memprior/retrieval.hpp"

namespace memprior {

/// Every tunable of the pipeline. Defaults are the reference settings.
struct PipelineConfig {
  // [retrieval]
  KeyWeights weights;
  std::size_t k = kDefaultTopK;
  double tau_p = kDefaultTemperature;
  std::size_t recall_size = kDefaultRecallSize;
  bool exclude_self = false;
  // [priors]
  double sigma = 1.0;
  AnchorParams anchors;
  // [refine]
  std::size_t window = 5;
  bool normalize_dense = false;
  double ln_eps = kLayerNormEpsilon;
  bool zero_init = false;  ///< without a parameter file: zero projections instead of seeded ones
  // [index]
  std::uint32_t nlist = 256;
  std::uint32_t m = 16;
  std::uint32_t nbits = 8;
  std::uint32_t kmeans_iters = 25;
  std::size_t nprobe = 16;
  // [filter]
  double min_area = 1e-4;
  double iou_threshold = 0.9;
  double drop_fraction = 0.10;
  // [seeds]
  std::uint64_t seed = 20260101;

  /// Throws InvalidInput naming the first out-of-range field.
  void validate() const;

  /// Index parameters with the seed derived from the root seed.
  IvfPqParams index_params() const;
  BankBuildConfig bank_config() const;
  /// Seed for a named stage, derived from the root seed.
  std::uint64_t stage_seed(std::string_view stage) const;

  bool operator==(const PipelineConfig&) const = default;
};

/// One INI key. Flags on the command line are "--" + key with '_' replaced by '-'.
struct ConfigKey {
  std::string section;
  std::string key;
  std::string help;
};

const std::vector<ConfigKey>& config_keys();
/// Parses and assigns one value; unknown keys and unparsable values throw InvalidInput.
void set_config_value(PipelineConfig& config, std::string_view section, std::string_view key,
                      const std::string& value);
std::string get_config_value(const PipelineConfig& config, std::string_view section, std::string_view key);

/// Parses INI text with sections [retrieval] [priors] [refine] [index] [filter] [seeds].
/// Missing keys keep their defaults; unknown sections or keys throw InvalidInput.
PipelineConfig parse_config(const std::string& ini_text, const PipelineConfig& base = {});
PipelineConfig load_config(const std::filesystem::path& path, const PipelineConfig& base = {});

/// INI text that parses back to an identical config.
std::string format_config(const PipelineConfig& config);

nlohmann::json config_to_json(const PipelineConfig& config);

}  // namespace memprior

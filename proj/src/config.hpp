// Copyright 2026 The kbvqa Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef KBVQA_CONFIG_HPP_
#define KBVQA_CONFIG_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fusion.hpp"
#include "harness.hpp"
#include "json.hpp"
#include "knowledge.hpp"
#include "lexicon.hpp"
#include "reasoner.hpp"
#include "stats_kb.hpp"
#include "world.hpp"

namespace kbvqa {

// One document with a section per module. Section seeds left out of a config
// file fall back to the top-level seed, which itself defaults to KBVQA_SEED
// (or 1).
struct RunConfig {
  std::uint64_t seed = 1;
  int jobs = 1;

  WorldConfig world;

  long stats_threshold = 3;
  std::string stopwords_path;  // empty: built-in list
  bool singularize = true;

  int embedding_dim = 32;
  std::uint64_t embedding_seed = 1;
  std::string embedding_path;  // empty: synthesize from the world vocabulary

  std::string lexicon_dir;  // empty: built-in lexicon

  double p_drop = 0.5;
  double p_swap = 0.4;
  std::optional<std::uint64_t> noise_seed;  // required for detected knowledge

  RegionConfig region;
  bool stats_with_region = false;

  HyperParams model;
  bool shared_encoder = false;

  TrainConfig train;

  std::vector<std::uint64_t> ablation_seeds = {1, 2, 3};
  std::vector<FeatureMode> ablation_modes = {FeatureMode::kGroundTruth, FeatureMode::kStats,
                                             FeatureMode::kDetected};
};

// Top-level seed from KBVQA_SEED, or `fallback` when unset. Throws kConfig on
// a value that is not a non-negative integer.
std::uint64_t env_seed(std::uint64_t fallback = 1);

RunConfig default_config();

// Throws kConfig naming the offending field ("train.epochs: ...") on unknown
// keys, wrong types or invalid values.
RunConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const RunConfig& config);
void validate(const RunConfig& config);

// Sets `dotted_key` (e.g. "train.epochs") in `doc`. `value` is parsed as JSON
// and taken as a plain string when that fails.
void set_config_value(nlohmann::json& doc, const std::string& dotted_key,
                      const std::string& value);

// Loads a config file (kIo when unreadable, kConfig when malformed). An empty
// path yields the defaults.
nlohmann::json load_config_document(const std::string& path);

// Resolved module inputs.
Lexicon config_lexicon(const RunConfig& config);
StatsConfig config_stats(const RunConfig& config);
NoiseModel config_noise(const RunConfig& config);
EmbeddingTable config_embeddings(const RunConfig& config);
AblationSettings config_ablation(const RunConfig& config);

}  // namespace kbvqa

#endif  // KBVQA_CONFIG_HPP_

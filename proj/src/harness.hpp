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

#ifndef KBVQA_HARNESS_HPP_
#define KBVQA_HARNESS_HPP_

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "embeddings.hpp"
#include "fusion.hpp"
#include "ingest.hpp"
#include "json.hpp"
#include "knowledge.hpp"
#include "lexicon.hpp"
#include "stats_kb.hpp"
#include "world.hpp"

namespace kbvqa {

// Everything besides the feature mode that decides what the reasoner sees.
struct KnowledgeSettings {
  StatsConfig stats;
  NoiseModel noise;
  RegionConfig region;
  bool stats_with_region = false;
};

// Branch kinds of the model used for `mode`.
std::vector<StreamKind> branch_kinds(FeatureMode mode, bool stats_with_region);

// Sorted object names and attributes occurring in `scenes`; the confusion
// pools of the detection noise.
struct SceneVocabulary {
  std::vector<std::string> names;
  std::vector<std::string> attributes;
};
SceneVocabulary scene_vocabulary(const SceneGraphMap& scenes);

using KnowledgeMap = std::map<std::string, ImageKnowledge>;

// Knowledge for every image that has questions or a scene graph. Stats mode
// needs `kb`; the other modes skip images without a scene graph.
KnowledgeMap build_knowledge(FeatureMode mode, Phase phase, const SceneGraphMap& scenes,
                             const Corpus& corpus, const StatsKnowledgeBase* kb,
                             const Lexicon& lexicon, const EmbeddingTable& table,
                             const KnowledgeSettings& settings);

// Embedded question tokens, one row per token (out-of-table tokens are zero).
Eigen::MatrixXd embed_question(const std::string& text, const EmbeddingTable& table);

// One Example per listed question id. Throws kNotFound for an unknown id and
// kConsistency for an answer outside `answers` or a knowledge dimension other
// than the table's. Questions whose image has no knowledge get none.
std::vector<Example> make_examples(const Corpus& corpus, const std::vector<std::string>& ids,
                                   const KnowledgeMap& knowledge, const EmbeddingTable& table,
                                   const std::vector<std::string>& answers);

struct EvalRecord {
  std::string question_id;
  std::string predicted;
  std::string gold;
};

struct EvalResult {
  std::size_t correct = 0;
  std::size_t n = 0;
  double accuracy = 0.0;  // correct / n
  std::vector<EvalRecord> records;
};

// Throws kContract on an empty example list.
EvalResult evaluate(const FusionModel& model, const std::vector<Example>& examples);

struct AblationSettings {
  std::vector<FeatureMode> modes = {FeatureMode::kGroundTruth, FeatureMode::kStats,
                                    FeatureMode::kDetected};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  HyperParams hp;
  TrainConfig train;
  KnowledgeSettings knowledge;
  bool shared_encoder = false;
  int jobs = 1;
};

struct AblationRow {
  FeatureMode mode = FeatureMode::kGroundTruth;
  std::uint64_t seed = 0;
  std::string split;  // "train" or "val"
  std::size_t correct = 0;
  std::size_t n = 0;
  double accuracy = 0.0;
};

struct AblationReport {
  std::vector<FeatureMode> modes;
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;  // ordered by (mode, seed, split)

  // Mean and sample standard deviation of one mode's accuracy on a split.
  std::pair<double, double> summary(FeatureMode mode, const std::string& split) const;
};

using ProgressFn = std::function<void(const std::string& line)>;

// Trains one model per (mode, seed) on the train split with Train-phase
// knowledge and scores it on both splits (val with Test-phase knowledge).
// Model initialization and data order follow the run seed; the world and the
// detection noise stay fixed.
AblationReport run_ablation(const World& world, const Lexicon& lexicon,
                            const EmbeddingTable& table, const AblationSettings& settings,
                            const ProgressFn& progress = {});

nlohmann::json report_to_json(const AblationReport& report);
AblationReport report_from_json(const nlohmann::json& j);
std::string report_markdown(const AblationReport& report);

}  // namespace kbvqa

#endif  // KBVQA_HARNESS_HPP_

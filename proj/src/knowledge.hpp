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

#ifndef KBVQA_KNOWLEDGE_HPP_
#define KBVQA_KNOWLEDGE_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "embeddings.hpp"
#include "ingest.hpp"
#include "lexicon.hpp"
#include "stats_kb.hpp"

namespace kbvqa {

enum class FeatureMode { kGroundTruth, kStats, kDetected };
enum class StreamKind { kRegion, kObjectLabel, kAttribute, kRelationship, kStatsWord };
enum class Phase { kTrain, kTest };

const char* feature_mode_name(FeatureMode mode);
const char* stream_kind_name(StreamKind kind);
const char* phase_name(Phase phase);
// Throw kConfig on unknown names.
FeatureMode parse_feature_mode(std::string_view name);
StreamKind parse_stream_kind(std::string_view name);
Phase parse_phase(std::string_view name);

struct KnowledgeStream {
  StreamKind kind = StreamKind::kObjectLabel;
  std::vector<std::string> labels;
  Eigen::MatrixXd vectors;  // labels.size() x table dim

  bool operator==(const KnowledgeStream& other) const;
};

struct ImageKnowledge {
  std::string image_id;
  Phase phase = Phase::kTrain;
  std::vector<KnowledgeStream> streams;

  // nullptr when the image has no stream of that kind.
  const KnowledgeStream* find(StreamKind kind) const;

  bool operator==(const ImageKnowledge&) const = default;
};

// Stand-in for imperfect detectors: every object name, attribute and triple is
// dropped with p_drop or relabelled from a confusion vocabulary with p_swap.
struct NoiseModel {
  double p_drop = 0.0;
  double p_swap = 0.0;
  std::uint64_t seed = 0;
};

// Pseudo region features: a fixed seeded projection of an object's name and
// mean attribute vectors plus small per-object noise.
struct RegionConfig {
  std::uint64_t seed = 17;
  double noise = 0.05;
};

ImageKnowledge assemble_groundtruth(const SceneGraph& graph, const Lexicon& lexicon,
                                    const EmbeddingTable& table, Phase phase,
                                    const RegionConfig& region = {});

// `vocab` must be nonempty; swapped names and triple endpoints draw from it.
// Swapped attributes draw from `attribute_vocab`, or `vocab` when that is
// empty. Noise draws are keyed by (seed, image, item) so output does not
// depend on assembly order.
ImageKnowledge assemble_detected(const SceneGraph& graph, const NoiseModel& noise,
                                 const Lexicon& lexicon, const EmbeddingTable& table,
                                 Phase phase, const std::vector<std::string>& vocab,
                                 const std::vector<std::string>& attribute_vocab = {},
                                 const RegionConfig& region = {});

// A single StatsWord stream (empty when the image is not in the KB). When
// `graph` is given a Region stream is added as well (names singularized with
// `lexicon`, or the built-in lexicon when null).
ImageKnowledge assemble_stats(const StatsKnowledgeBase& kb, const std::string& image_id,
                              const EmbeddingTable& table, Phase phase = Phase::kTrain,
                              const SceneGraph* graph = nullptr,
                              const Lexicon* lexicon = nullptr,
                              const RegionConfig& region = {});

// knowledge.jsonl, one image per line.
std::string serialize_knowledge(const std::vector<ImageKnowledge>& images);
// Throws a kCorrupt ParseError naming the line and byte offset.
std::vector<ImageKnowledge> parse_knowledge(std::istream& in);

void write_knowledge(const std::string& path, const std::vector<ImageKnowledge>& images);
std::vector<ImageKnowledge> read_knowledge(const std::string& path);

}  // namespace kbvqa

#endif  // KBVQA_KNOWLEDGE_HPP_

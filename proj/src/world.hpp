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

#ifndef KBVQA_WORLD_HPP_
#define KBVQA_WORLD_HPP_

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "ingest.hpp"
#include "json.hpp"
#include "lexicon.hpp"

namespace kbvqa {

enum class QuestionType { kColor, kExists, kRelationForward, kRelationBackward, kVerify };

const char* question_type_name(QuestionType type);
QuestionType parse_question_type(std::string_view name);

struct WorldConfig {
  int n_images = 500;
  int objects_min = 2;
  int objects_max = 5;
  std::vector<std::string> name_vocab = {"dog",   "cat",   "horse", "bird",  "man",  "woman",
                                         "table", "chair", "bench", "car",   "bus",  "tree",
                                         "grass", "cup",   "plate", "shirt"};
  // Colours; every object gets exactly one.
  std::vector<std::string> attribute_vocab = {"red",   "blue",  "green",  "white",
                                              "black", "brown", "yellow", "gray"};
  // Materials; an object gets one with probability material_rate.
  std::vector<std::string> material_vocab = {"wood", "metal", "plastic", "glass"};
  double material_rate = 0.3;
  std::vector<std::string> predicate_vocab = {"on", "near", "behind", "under", "holding"};
  // Probability that an unordered object pair is related.
  double relation_rate = 0.6;
  int questions_per_image = 20;
  // Object i of an image is asked about with weight salience_decay^i.
  double salience_decay = 0.05;
  std::vector<QuestionType> question_types = {QuestionType::kColor, QuestionType::kExists,
                                              QuestionType::kRelationForward,
                                              QuestionType::kRelationBackward};
  // Sampling weight per entry of question_types; empty means uniform.
  std::vector<double> question_weights;
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
};

// Throws kConfig on empty vocabularies, bad ranges or probabilities.
void validate(const WorldConfig& config);
nlohmann::json world_config_to_json(const WorldConfig& config);
WorldConfig world_config_from_json(const nlohmann::json& j);

struct World {
  SceneGraphMap scenes;
  Corpus corpus;
  std::vector<std::string> answers;  // sorted, unique
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
};

// Deterministic in config.seed. Throws kConfig when the name vocabulary is
// too small for objects_max distinct names per image. A question slot whose
// target object admits none of the enabled question types is skipped.
World generate_world(const WorldConfig& config);

// Fraction of images whose most-asked-about object name occurs more than
// `threshold` times in that image's questions.
double salient_recurrence(const World& world, long threshold, const Lexicon& lexicon);

// Plural form used by the question templates; singularize() inverts it on the
// default vocabulary.
std::string pluralize(const std::string& word, const Lexicon& lexicon);

// split.json: {"train": [ids], "val": [ids]}
std::string serialize_split(const World& world);
void parse_split(std::string_view text, std::vector<std::string>& train,
                 std::vector<std::string>& val);

// Every word the world can emit (names, attributes, predicates, template
// words, answers).
std::vector<std::string> world_vocabulary(const WorldConfig& config);

}  // namespace kbvqa

#endif  // KBVQA_WORLD_HPP_

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

#ifndef KBVQA_INGEST_HPP_
#define KBVQA_INGEST_HPP_

#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace kbvqa {

struct QuestionRecord {
  std::string question_id;
  std::string image_id;
  std::string text;
  std::string answer;

  bool operator==(const QuestionRecord&) const = default;
};

struct SceneObject {
  std::string object_id;
  std::string name;
  std::vector<std::string> attributes;

  bool operator==(const SceneObject&) const = default;
};

struct RelationTriple {
  std::string subject_id;
  std::string predicate;
  std::string object_id;

  bool operator==(const RelationTriple&) const = default;
};

struct SceneGraph {
  std::string image_id;
  std::vector<SceneObject> objects;
  std::vector<RelationTriple> triples;

  // nullptr when no object carries that id.
  const SceneObject* find_object(const std::string& object_id) const;

  bool operator==(const SceneGraph&) const = default;
};

// Checks the graph invariants; throws kReference / kDuplicateKey / kSchema.
void validate_scene_graph(const SceneGraph& graph);

// A question corpus with a derived per-image index. Images iterate in
// ascending id order; within an image questions keep insertion order.
class Corpus {
 public:
  Corpus() = default;

  // Throws kDuplicateKey on a repeated question id.
  void add(QuestionRecord record);

  const std::vector<QuestionRecord>& questions() const { return questions_; }
  const std::map<std::string, std::vector<std::size_t>>& by_image() const {
    return by_image_;
  }
  std::vector<QuestionRecord> questions_for(const std::string& image_id) const;
  std::size_t image_count() const { return by_image_.size(); }

  bool operator==(const Corpus& other) const {
    return questions_ == other.questions_;
  }

 private:
  std::vector<QuestionRecord> questions_;
  std::map<std::string, std::vector<std::size_t>> by_image_;
  std::set<std::string> ids_;
};

using SceneGraphMap = std::map<std::string, SceneGraph>;

Corpus parse_questions(std::istream& in);
SceneGraphMap parse_scene_graphs(std::istream& in);

std::string serialize_questions(const Corpus& corpus);
std::string serialize_scene_graphs(const SceneGraphMap& graphs);

struct JoinedImage {
  std::string image_id;
  std::vector<QuestionRecord> questions;
  std::optional<SceneGraph> graph;
};

std::vector<JoinedImage> join_corpus(const Corpus& corpus,
                                     const SceneGraphMap& graphs);

}  // namespace kbvqa

#endif  // KBVQA_INGEST_HPP_

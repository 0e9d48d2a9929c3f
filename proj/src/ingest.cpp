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

#include "ingest.hpp"

#include <set>
#include <sstream>

#include "common.hpp"
#include "json.hpp"

namespace kbvqa {
namespace {

using nlohmann::json;

json parse_line(const std::string& line, std::size_t line_no) {
  try {
    json value = json::parse(line);
    if (!value.is_object()) {
      throw ParseError(ErrorKind::kParse, line_no, "expected a JSON object");
    }
    return value;
  } catch (const json::parse_error& e) {
    throw ParseError(ErrorKind::kParse, line_no, e.what());
  }
}

std::string string_field(const json& obj, const char* field,
                         std::size_t line_no) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw ParseError(ErrorKind::kSchema, line_no,
                     std::string("missing field '") + field + "'");
  }
  if (!it->is_string()) {
    throw ParseError(ErrorKind::kSchema, line_no,
                     std::string("field '") + field + "' must be a string");
  }
  return it->get<std::string>();
}

const json& array_field(const json& obj, const char* field,
                        std::size_t line_no) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw ParseError(ErrorKind::kSchema, line_no,
                     std::string("missing field '") + field + "'");
  }
  if (!it->is_array()) {
    throw ParseError(ErrorKind::kSchema, line_no,
                     std::string("field '") + field + "' must be an array");
  }
  return *it;
}

void require_nonempty(const std::string& value, const char* field,
                      std::size_t line_no) {
  if (value.empty()) {
    throw ParseError(ErrorKind::kSchema, line_no,
                     std::string("field '") + field + "' must be nonempty");
  }
}

// Calls fn(line, line_no) for each nonblank line.
template <typename Fn>
void for_each_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    fn(line, line_no);
  }
}

SceneGraph graph_from_json(const json& obj, std::size_t line_no) {
  SceneGraph graph;
  graph.image_id = string_field(obj, "image_id", line_no);
  require_nonempty(graph.image_id, "image_id", line_no);
  for (const json& o : array_field(obj, "objects", line_no)) {
    if (!o.is_object()) {
      throw ParseError(ErrorKind::kSchema, line_no, "object entry must be an object");
    }
    SceneObject object;
    object.object_id = string_field(o, "object_id", line_no);
    object.name = to_lower(string_field(o, "name", line_no));
    require_nonempty(object.object_id, "object_id", line_no);
    require_nonempty(object.name, "name", line_no);
    for (const json& a : array_field(o, "attributes", line_no)) {
      if (!a.is_string()) {
        throw ParseError(ErrorKind::kSchema, line_no, "attributes must be strings");
      }
      object.attributes.push_back(to_lower(a.get<std::string>()));
    }
    graph.objects.push_back(std::move(object));
  }
  for (const json& t : array_field(obj, "triples", line_no)) {
    if (!t.is_object()) {
      throw ParseError(ErrorKind::kSchema, line_no, "triple entry must be an object");
    }
    RelationTriple triple;
    triple.subject_id = string_field(t, "subject_id", line_no);
    triple.predicate = to_lower(string_field(t, "predicate", line_no));
    triple.object_id = string_field(t, "object_id", line_no);
    graph.triples.push_back(std::move(triple));
  }
  return graph;
}

}  // namespace

const SceneObject* SceneGraph::find_object(const std::string& object_id) const {
  for (const SceneObject& o : objects) {
    if (o.object_id == object_id) return &o;
  }
  return nullptr;
}

void validate_scene_graph(const SceneGraph& graph) {
  if (graph.image_id.empty()) {
    throw Error(ErrorKind::kSchema, "scene graph image_id must be nonempty");
  }
  std::set<std::string> ids;
  for (const SceneObject& o : graph.objects) {
    if (o.name.empty()) {
      throw Error(ErrorKind::kSchema, "object '" + o.object_id + "' has an empty name");
    }
    if (!ids.insert(o.object_id).second) {
      throw Error(ErrorKind::kDuplicateKey,
                  "duplicate object_id '" + o.object_id + "' in image '" +
                      graph.image_id + "'");
    }
  }
  for (const RelationTriple& t : graph.triples) {
    for (const std::string* id : {&t.subject_id, &t.object_id}) {
      if (!ids.contains(*id)) {
        throw Error(ErrorKind::kReference, "triple endpoint '" + *id +
                                               "' not found in image '" +
                                               graph.image_id + "'");
      }
    }
    if (t.subject_id == t.object_id) {
      throw Error(ErrorKind::kReference,
                  "triple relates '" + t.subject_id + "' to itself");
    }
  }
}

void Corpus::add(QuestionRecord record) {
  if (!ids_.insert(record.question_id).second) {
    throw Error(ErrorKind::kDuplicateKey,
                "duplicate question_id '" + record.question_id + "'");
  }
  by_image_[record.image_id].push_back(questions_.size());
  questions_.push_back(std::move(record));
}

std::vector<QuestionRecord> Corpus::questions_for(
    const std::string& image_id) const {
  std::vector<QuestionRecord> out;
  auto it = by_image_.find(image_id);
  if (it == by_image_.end()) return out;
  out.reserve(it->second.size());
  for (std::size_t i : it->second) out.push_back(questions_[i]);
  return out;
}

Corpus parse_questions(std::istream& in) {
  Corpus corpus;
  for_each_line(in, [&](const std::string& line, std::size_t line_no) {
    json obj = parse_line(line, line_no);
    QuestionRecord q;
    q.question_id = string_field(obj, "question_id", line_no);
    q.image_id = string_field(obj, "image_id", line_no);
    q.text = to_lower(string_field(obj, "text", line_no));
    q.answer = to_lower(string_field(obj, "answer", line_no));
    require_nonempty(q.question_id, "question_id", line_no);
    require_nonempty(q.image_id, "image_id", line_no);
    require_nonempty(q.text, "text", line_no);
    try {
      corpus.add(std::move(q));
    } catch (const Error& e) {
      throw ParseError(e.kind(), line_no, e.what());
    }
  });
  return corpus;
}

SceneGraphMap parse_scene_graphs(std::istream& in) {
  SceneGraphMap graphs;
  for_each_line(in, [&](const std::string& line, std::size_t line_no) {
    SceneGraph graph = graph_from_json(parse_line(line, line_no), line_no);
    try {
      validate_scene_graph(graph);
    } catch (const Error& e) {
      throw ParseError(e.kind(), line_no, e.what());
    }
    if (graphs.contains(graph.image_id)) {
      throw ParseError(ErrorKind::kDuplicateKey, line_no,
                       "duplicate image_id '" + graph.image_id + "'");
    }
    std::string key = graph.image_id;
    graphs.emplace(std::move(key), std::move(graph));
  });
  return graphs;
}

std::string serialize_questions(const Corpus& corpus) {
  std::string out;
  for (const QuestionRecord& q : corpus.questions()) {
    json obj = {{"question_id", q.question_id},
                {"image_id", q.image_id},
                {"text", q.text},
                {"answer", q.answer}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

std::string serialize_scene_graphs(const SceneGraphMap& graphs) {
  std::string out;
  for (const auto& [image_id, graph] : graphs) {
    json objects = json::array();
    for (const SceneObject& o : graph.objects) {
      objects.push_back({{"object_id", o.object_id},
                         {"name", o.name},
                         {"attributes", o.attributes}});
    }
    json triples = json::array();
    for (const RelationTriple& t : graph.triples) {
      triples.push_back({{"subject_id", t.subject_id},
                         {"predicate", t.predicate},
                         {"object_id", t.object_id}});
    }
    json obj = {{"image_id", image_id},
                {"objects", std::move(objects)},
                {"triples", std::move(triples)}};
    out += obj.dump();
    out += '\n';
  }
  return out;
}

std::vector<JoinedImage> join_corpus(const Corpus& corpus,
                                     const SceneGraphMap& graphs) {
  std::set<std::string> ids;
  for (const auto& [id, _] : corpus.by_image()) ids.insert(id);
  for (const auto& [id, _] : graphs) ids.insert(id);
  std::vector<JoinedImage> joined;
  joined.reserve(ids.size());
  for (const std::string& id : ids) {
    JoinedImage entry;
    entry.image_id = id;
    entry.questions = corpus.questions_for(id);
    if (auto it = graphs.find(id); it != graphs.end()) entry.graph = it->second;
    joined.push_back(std::move(entry));
  }
  return joined;
}

}  // namespace kbvqa

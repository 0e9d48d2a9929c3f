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

#include "stats_kb.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "common.hpp"
#include "default_data.hpp"
#include "json.hpp"

namespace kbvqa {

using nlohmann::json;

std::vector<std::string> StatsKnowledgeBase::tokens(const std::string& image_id) const {
  std::vector<std::string> out;
  auto it = per_image.find(image_id);
  if (it == per_image.end()) return out;
  for (const StatsEntry& e : it->second) out.push_back(e.token);
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

TokenStats count_tokens(const std::vector<QuestionRecord>& questions) {
  TokenStats counts;
  for (const QuestionRecord& q : questions) {
    if (q.image_id != questions.front().image_id) {
      throw Error(ErrorKind::kContract,
                  "count_tokens: questions span images '" +
                      questions.front().image_id + "' and '" + q.image_id + "'");
    }
    for (std::string& t : tokenize(q.text)) ++counts[std::move(t)];
  }
  return counts;
}

std::vector<StatsEntry> filter_frequent(const TokenStats& stats,
                                        const StatsConfig& config,
                                        const Lexicon& lexicon) {
  std::map<std::string, long> kept;
  for (const auto& [token, count] : stats) {
    if (count <= config.threshold) continue;
    if (config.stopwords.contains(token)) continue;
    std::string key = config.singularize_tokens ? singularize(token, lexicon) : token;
    kept[key] += count;
  }
  std::vector<StatsEntry> out;
  out.reserve(kept.size());
  for (auto& [token, count] : kept) out.push_back({token, count});
  std::stable_sort(out.begin(), out.end(), [](const StatsEntry& a, const StatsEntry& b) {
    return a.count > b.count;
  });
  return out;
}

StatsKnowledgeBase build_stats_kb(const Corpus& corpus, const StatsConfig& config,
                                  const Lexicon& lexicon) {
  if (config.threshold < 0) {
    throw Error(ErrorKind::kConfig, "stats threshold must be >= 0");
  }
  StatsKnowledgeBase kb;
  for (const auto& [image_id, _] : corpus.by_image()) {
    kb.per_image[image_id] =
        filter_frequent(count_tokens(corpus.questions_for(image_id)), config, lexicon);
  }
  return kb;
}

std::set<std::string> load_stopwords(std::istream& in) {
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    std::string_view w = trim(line);
    if (!w.empty() && !w.starts_with("#")) words.insert(to_lower(w));
  }
  return words;
}

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = [] {
    std::istringstream in{std::string(data::kStopwords)};
    return load_stopwords(in);
  }();
  return words;
}

std::string serialize_stats_kb(const StatsKnowledgeBase& kb) {
  std::string out;
  for (const auto& [image_id, entries] : kb.per_image) {
    json tokens = json::array();
    json counts = json::array();
    for (const StatsEntry& e : entries) {
      tokens.push_back(e.token);
      counts.push_back(e.count);
    }
    json line = {{"image_id", image_id}, {"tokens", tokens}, {"counts", counts}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

StatsKnowledgeBase parse_stats_kb(std::istream& in) {
  StatsKnowledgeBase kb;
  std::string line;
  std::size_t line_no = 0;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t line_offset = offset;
    offset += line.size() + 1;
    if (trim(line).empty()) continue;
    auto corrupt = [&](const std::string& what) {
      return ParseError(ErrorKind::kCorrupt, line_no,
                        "byte offset " + std::to_string(line_offset) + ": " + what);
    };
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw corrupt(e.what());
    }
    if (!obj.is_object() || !obj.contains("image_id") || !obj["image_id"].is_string() ||
        !obj.contains("tokens") || !obj["tokens"].is_array() ||
        !obj.contains("counts") || !obj["counts"].is_array()) {
      throw corrupt("expected {image_id, tokens, counts}");
    }
    const json& tokens = obj["tokens"];
    const json& counts = obj["counts"];
    if (tokens.size() != counts.size()) throw corrupt("tokens/counts length mismatch");
    std::vector<StatsEntry> entries;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (!tokens[i].is_string() || !counts[i].is_number_integer()) {
        throw corrupt("token must be a string and count an integer");
      }
      entries.push_back({tokens[i].get<std::string>(), counts[i].get<long>()});
    }
    std::string image_id = obj["image_id"].get<std::string>();
    if (!kb.per_image.emplace(image_id, std::move(entries)).second) {
      throw ParseError(ErrorKind::kDuplicateKey, line_no,
                       "duplicate image_id '" + image_id + "'");
    }
  }
  return kb;
}

}  // namespace kbvqa

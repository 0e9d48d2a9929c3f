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

#ifndef KBVQA_STATS_KB_HPP_
#define KBVQA_STATS_KB_HPP_

#include <istream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ingest.hpp"
#include "lexicon.hpp"

namespace kbvqa {

using TokenStats = std::map<std::string, long>;

struct StatsConfig {
  // Tokens are kept when their count is strictly greater than this.
  long threshold = 10;
  std::set<std::string> stopwords;
  bool singularize_tokens = true;
};

struct StatsEntry {
  std::string token;
  long count = 0;

  bool operator==(const StatsEntry&) const = default;
};

// Per image, the frequent question tokens sorted by descending count, then
// lexicographically.
struct StatsKnowledgeBase {
  std::map<std::string, std::vector<StatsEntry>> per_image;

  std::vector<std::string> tokens(const std::string& image_id) const;

  bool operator==(const StatsKnowledgeBase&) const = default;
};

// Lowercases and splits on every run of non-alphanumeric characters.
std::vector<std::string> tokenize(std::string_view text);

// Counts token occurrences across question texts; answers are not counted.
// Throws kContract when the questions span more than one image.
TokenStats count_tokens(const std::vector<QuestionRecord>& questions);

// Singularization uses `lexicon`; counts of tokens that merge are summed.
std::vector<StatsEntry> filter_frequent(const TokenStats& stats,
                                        const StatsConfig& config,
                                        const Lexicon& lexicon);

StatsKnowledgeBase build_stats_kb(const Corpus& corpus, const StatsConfig& config,
                                  const Lexicon& lexicon);

std::set<std::string> load_stopwords(std::istream& in);
// The built-in function-word list (also shipped as data/stopwords.txt).
const std::set<std::string>& default_stopwords();

// stats_kb.jsonl: {"image_id": s, "tokens": [s...], "counts": [n...]}
std::string serialize_stats_kb(const StatsKnowledgeBase& kb);
StatsKnowledgeBase parse_stats_kb(std::istream& in);

}  // namespace kbvqa

#endif  // KBVQA_STATS_KB_HPP_

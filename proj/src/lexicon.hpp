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

#ifndef KBVQA_LEXICON_HPP_
#define KBVQA_LEXICON_HPP_

#include <filesystem>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace kbvqa {

// Hypernym DAG. Each word maps to its direct parents; `root` is the single
// top concept and is never reported as an ancestor.
class Taxonomy {
 public:
  Taxonomy() = default;
  // Validates acyclicity, the root having no parents and every word reaching
  // the root. Throws kSchema / kContract.
  Taxonomy(std::map<std::string, std::set<std::string>> parents,
           std::string root);

  const std::string& root() const { return root_; }
  const std::map<std::string, std::set<std::string>>& parents() const {
    return parents_;
  }
  bool contains(const std::string& word) const;

 private:
  std::map<std::string, std::set<std::string>> parents_;
  std::string root_;
};

struct SynsetFlag {
  bool has_adjective_synset = false;
  bool has_verb_synset = false;
};

class SynsetFlags {
 public:
  void set(const std::string& word, SynsetFlag flag) { table_[word] = flag; }
  // Absent words report (false, false).
  SynsetFlag lookup(const std::string& word) const;
  const std::map<std::string, SynsetFlag>& table() const { return table_; }

 private:
  std::map<std::string, SynsetFlag> table_;
};

struct PredicateGroups {
  std::set<std::string> spatial;
  std::set<std::string> other_manual;
};

enum class PredicateGroup { kInteraction, kSpatial, kOther };

const char* predicate_group_name(PredicateGroup group);

struct Lexicon {
  Taxonomy taxonomy;
  SynsetFlags flags;
  PredicateGroups predicate_groups;
  std::map<std::string, std::string> irregular_plurals;
};

std::string singularize(const std::string& word, const Lexicon& lexicon);

// Strict ancestors in breadth-first order, first occurrence kept, root
// excluded. Unknown words have no ancestors.
std::vector<std::string> hypernym_closure(const std::string& word,
                                          const Taxonomy& taxonomy);

// `labels` followed by each label's closure, de-duplicated in first
// occurrence order.
std::vector<std::string> expand_categories(
    const std::vector<std::string>& labels, const Taxonomy& taxonomy);

struct AttributeSplit {
  std::vector<std::string> adjectives;
  std::vector<std::string> non_adjectives;
};

AttributeSplit split_attributes(const std::vector<std::string>& attrs,
                                const SynsetFlags& flags);

// The verb-synset check wins over the manual spatial list.
PredicateGroup classify_predicate(const std::string& pred,
                                  const Lexicon& lexicon);

// File loaders for the tab-separated lexicon formats. Each throws a
// ParseError carrying the 1-based line number.
Taxonomy load_taxonomy(std::istream& in);
SynsetFlags load_synsets(std::istream& in);
std::map<std::string, std::string> load_plurals(std::istream& in);
PredicateGroups load_predicates(std::istream& in);

// Reads taxonomy.tsv, synsets.tsv, plurals.tsv and predicates.tsv from dir.
Lexicon load_lexicon(const std::filesystem::path& dir);

// The built-in lexicon covering the synthetic world vocabulary. The same
// content ships as data/lexicon/*.tsv.
const Lexicon& default_lexicon();

// Serializations matching the load_* formats.
std::string serialize_taxonomy(const Taxonomy& taxonomy);
std::string serialize_synsets(const SynsetFlags& flags);
std::string serialize_plurals(const std::map<std::string, std::string>& plurals);
std::string serialize_predicates(const PredicateGroups& groups);

}  // namespace kbvqa

#endif  // KBVQA_LEXICON_HPP_

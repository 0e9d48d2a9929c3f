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

#include "lexicon.hpp"

#include <deque>
#include <fstream>
#include <functional>
#include <sstream>

#include "common.hpp"
#include "default_data.hpp"

namespace kbvqa {
namespace {

bool ends_with(const std::string& word, std::string_view suffix) {
  return word.size() >= suffix.size() &&
         word.compare(word.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Suffix rules only, no irregular lookup. Returns the input when no rule
// applies. A rule whose output would itself be rewritten is skipped so the
// result is always a fixed point ("houses" -> "house", not "hous").
std::string apply_suffix_rules(const std::string& word);

std::string rule_ies(const std::string& w) {
  if (w.size() > 4 && ends_with(w, "ies")) return w.substr(0, w.size() - 3) + "y";
  return {};
}

std::string rule_es(const std::string& w) {
  for (std::string_view suffix : {"ches", "shes", "xes", "ses", "zes"}) {
    if (ends_with(w, suffix)) return w.substr(0, w.size() - 2);
  }
  return {};
}

std::string rule_s(const std::string& w) {
  if (ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") &&
      !ends_with(w, "is") && w.size() > 1) {
    return w.substr(0, w.size() - 1);
  }
  return {};
}

bool is_fixed_point(const std::string& w) {
  return rule_ies(w).empty() && rule_es(w).empty() && rule_s(w).empty();
}

std::string apply_suffix_rules(const std::string& word) {
  for (auto rule : {rule_ies, rule_es, rule_s}) {
    std::string candidate = rule(word);
    if (!candidate.empty() && is_fixed_point(candidate)) return candidate;
  }
  return word;
}

// Yields (line_no, fields) for each nonblank, non-comment line.
template <typename Fn>
void for_each_tsv(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    std::vector<std::string> fields = split(view, '\t');
    for (std::string& f : fields) f = std::string(trim(f));
    fn(line_no, fields);
  }
}

void expect_fields(const std::vector<std::string>& fields, std::size_t n,
                   std::size_t line_no) {
  if (fields.size() != n) {
    throw ParseError(ErrorKind::kParse, line_no,
                     "expected " + std::to_string(n) + " tab-separated fields, got " +
                         std::to_string(fields.size()));
  }
  for (const std::string& f : fields) {
    if (f.empty()) throw ParseError(ErrorKind::kParse, line_no, "empty field");
  }
}

}  // namespace

Taxonomy::Taxonomy(std::map<std::string, std::set<std::string>> parents,
                   std::string root)
    : parents_(std::move(parents)), root_(std::move(root)) {
  if (root_.empty()) throw Error(ErrorKind::kSchema, "taxonomy has no root");
  if (auto it = parents_.find(root_); it != parents_.end() && !it->second.empty()) {
    throw Error(ErrorKind::kSchema, "taxonomy root '" + root_ + "' has parents");
  }
  // Every parent word that is not a key is a sink; the only legal sink is root.
  for (const auto& [child, ps] : parents_) {
    for (const std::string& p : ps) {
      if (p != root_ && !parents_.contains(p)) {
        throw Error(ErrorKind::kSchema,
                    "taxonomy word '" + p + "' does not reach root '" + root_ + "'");
      }
    }
    if (child != root_ && ps.empty()) {
      throw Error(ErrorKind::kSchema,
                  "taxonomy word '" + child + "' does not reach root '" + root_ + "'");
    }
  }
  // Cycle check by iterative three-colour DFS.
  enum class Mark { kNone, kActive, kDone };
  std::map<std::string, Mark> mark;
  for (const auto& [start, _] : parents_) {
    if (mark[start] == Mark::kDone) continue;
    std::vector<std::pair<std::string, std::set<std::string>::const_iterator>> stack;
    auto push = [&](const std::string& w) {
      mark[w] = Mark::kActive;
      auto it = parents_.find(w);
      static const std::set<std::string> kEmpty;
      stack.emplace_back(w, it == parents_.end() ? kEmpty.begin() : it->second.begin());
    };
    push(start);
    while (!stack.empty()) {
      auto& [word, next] = stack.back();
      auto pit = parents_.find(word);
      if (pit == parents_.end() || next == pit->second.end()) {
        mark[word] = Mark::kDone;
        stack.pop_back();
        continue;
      }
      const std::string parent = *next++;
      Mark m = mark[parent];
      if (m == Mark::kActive) {
        throw Error(ErrorKind::kSchema, "taxonomy cycle through '" + parent + "'");
      }
      if (m == Mark::kNone) push(parent);
    }
  }
}

bool Taxonomy::contains(const std::string& word) const {
  return word == root_ || parents_.contains(word);
}

SynsetFlag SynsetFlags::lookup(const std::string& word) const {
  auto it = table_.find(word);
  return it == table_.end() ? SynsetFlag{} : it->second;
}

const char* predicate_group_name(PredicateGroup group) {
  switch (group) {
    case PredicateGroup::kInteraction: return "interaction";
    case PredicateGroup::kSpatial: return "spatial";
    case PredicateGroup::kOther: return "other";
  }
  return "other";
}

std::string singularize(const std::string& word, const Lexicon& lexicon) {
  if (auto it = lexicon.irregular_plurals.find(word);
      it != lexicon.irregular_plurals.end()) {
    return it->second;
  }
  // Known singular forms stay put, so irregular outputs are fixed points too.
  for (const auto& [plural, singular] : lexicon.irregular_plurals) {
    if (singular == word) return word;
  }
  return apply_suffix_rules(word);
}

std::vector<std::string> hypernym_closure(const std::string& word,
                                          const Taxonomy& taxonomy) {
  std::vector<std::string> out;
  std::set<std::string> seen{word};
  std::deque<std::string> frontier{word};
  const auto& parents = taxonomy.parents();
  while (!frontier.empty()) {
    std::string current = std::move(frontier.front());
    frontier.pop_front();
    auto it = parents.find(current);
    if (it == parents.end()) continue;
    for (const std::string& p : it->second) {
      if (!seen.insert(p).second) continue;
      frontier.push_back(p);
      if (p != taxonomy.root()) out.push_back(p);
    }
  }
  return out;
}

std::vector<std::string> expand_categories(
    const std::vector<std::string>& labels, const Taxonomy& taxonomy) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  auto add = [&](const std::string& w) {
    if (seen.insert(w).second) out.push_back(w);
  };
  for (const std::string& l : labels) add(l);
  for (const std::string& l : labels) {
    for (const std::string& h : hypernym_closure(l, taxonomy)) add(h);
  }
  return out;
}

AttributeSplit split_attributes(const std::vector<std::string>& attrs,
                                const SynsetFlags& flags) {
  AttributeSplit split;
  for (const std::string& a : attrs) {
    if (flags.lookup(a).has_adjective_synset) {
      split.adjectives.push_back(a);
    } else {
      split.non_adjectives.push_back(a);
    }
  }
  return split;
}

PredicateGroup classify_predicate(const std::string& pred,
                                  const Lexicon& lexicon) {
  if (lexicon.flags.lookup(pred).has_verb_synset) return PredicateGroup::kInteraction;
  if (lexicon.predicate_groups.spatial.contains(pred)) return PredicateGroup::kSpatial;
  return PredicateGroup::kOther;
}

Taxonomy load_taxonomy(std::istream& in) {
  std::map<std::string, std::set<std::string>> parents;
  std::string root;
  std::size_t root_line = 0;
  for_each_tsv(in, [&](std::size_t line_no, const std::vector<std::string>& f) {
    if (f[0] == "#root") {
      expect_fields(f, 2, line_no);
      if (!root.empty()) {
        throw ParseError(ErrorKind::kDuplicateKey, line_no, "second #root line");
      }
      root = to_lower(f[1]);
      root_line = line_no;
      return;
    }
    if (f[0].starts_with("#")) return;
    expect_fields(f, 2, line_no);
    std::string child = to_lower(f[0]);
    std::string parent = to_lower(f[1]);
    if (child == parent) {
      throw ParseError(ErrorKind::kSchema, line_no, "'" + child + "' is its own parent");
    }
    parents[child].insert(parent);
  });
  if (root.empty()) {
    throw ParseError(ErrorKind::kSchema, 0, "taxonomy is missing its #root line");
  }
  try {
    return Taxonomy(std::move(parents), std::move(root));
  } catch (const Error& e) {
    throw ParseError(e.kind(), root_line, e.what());
  }
}

SynsetFlags load_synsets(std::istream& in) {
  SynsetFlags flags;
  for_each_tsv(in, [&](std::size_t line_no, const std::vector<std::string>& f) {
    if (f[0].starts_with("#")) return;
    expect_fields(f, 2, line_no);
    SynsetFlag flag;
    if (f[1] == "A") {
      flag.has_adjective_synset = true;
    } else if (f[1] == "V") {
      flag.has_verb_synset = true;
    } else if (f[1] == "AV") {
      flag.has_adjective_synset = flag.has_verb_synset = true;
    } else if (f[1] != "-") {
      throw ParseError(ErrorKind::kParse, line_no,
                       "synset flag must be A, V, AV or -, got '" + f[1] + "'");
    }
    flags.set(to_lower(f[0]), flag);
  });
  return flags;
}

std::map<std::string, std::string> load_plurals(std::istream& in) {
  std::map<std::string, std::string> plurals;
  for_each_tsv(in, [&](std::size_t line_no, const std::vector<std::string>& f) {
    if (f[0].starts_with("#")) return;
    expect_fields(f, 2, line_no);
    if (!plurals.emplace(to_lower(f[0]), to_lower(f[1])).second) {
      throw ParseError(ErrorKind::kDuplicateKey, line_no, "duplicate plural '" + f[0] + "'");
    }
  });
  return plurals;
}

PredicateGroups load_predicates(std::istream& in) {
  PredicateGroups groups;
  for_each_tsv(in, [&](std::size_t line_no, const std::vector<std::string>& f) {
    if (f[0].starts_with("#")) return;
    expect_fields(f, 2, line_no);
    std::string word = to_lower(f[0]);
    if (f[1] == "spatial") {
      groups.spatial.insert(word);
    } else if (f[1] == "other") {
      groups.other_manual.insert(word);
    } else {
      throw ParseError(ErrorKind::kParse, line_no,
                       "predicate group must be spatial or other, got '" + f[1] + "'");
    }
    if (groups.spatial.contains(word) && groups.other_manual.contains(word)) {
      throw ParseError(ErrorKind::kSchema, line_no,
                       "'" + word + "' listed as both spatial and other");
    }
  });
  return groups;
}

Lexicon load_lexicon(const std::filesystem::path& dir) {
  auto open = [&](const char* name) {
    std::ifstream in(dir / name);
    if (!in) throw Error(ErrorKind::kIo, "cannot open " + (dir / name).string());
    return in;
  };
  auto wrap = [&](const char* name, auto&& load) {
    std::ifstream in = open(name);
    try {
      return load(in);
    } catch (const ParseError& e) {
      throw Error(e.kind(), (dir / name).string() + ": " + e.what());
    }
  };
  Lexicon lexicon;
  lexicon.taxonomy = wrap("taxonomy.tsv", [](std::istream& s) { return load_taxonomy(s); });
  lexicon.flags = wrap("synsets.tsv", [](std::istream& s) { return load_synsets(s); });
  lexicon.irregular_plurals =
      wrap("plurals.tsv", [](std::istream& s) { return load_plurals(s); });
  lexicon.predicate_groups =
      wrap("predicates.tsv", [](std::istream& s) { return load_predicates(s); });
  return lexicon;
}

const Lexicon& default_lexicon() {
  static const Lexicon lexicon = [] {
    auto stream = [](std::string_view text) { return std::istringstream{std::string(text)}; };
    Lexicon lex;
    auto taxonomy = stream(data::kTaxonomy);
    lex.taxonomy = load_taxonomy(taxonomy);
    auto synsets = stream(data::kSynsets);
    lex.flags = load_synsets(synsets);
    auto plurals = stream(data::kPlurals);
    lex.irregular_plurals = load_plurals(plurals);
    auto predicates = stream(data::kPredicates);
    lex.predicate_groups = load_predicates(predicates);
    return lex;
  }();
  return lexicon;
}

std::string serialize_taxonomy(const Taxonomy& taxonomy) {
  std::string out = "#root\t" + taxonomy.root() + "\n";
  for (const auto& [child, ps] : taxonomy.parents()) {
    for (const std::string& p : ps) out += child + "\t" + p + "\n";
  }
  return out;
}

std::string serialize_synsets(const SynsetFlags& flags) {
  std::string out;
  for (const auto& [word, flag] : flags.table()) {
    const char* code = flag.has_adjective_synset
                           ? (flag.has_verb_synset ? "AV" : "A")
                           : (flag.has_verb_synset ? "V" : "-");
    out += word + "\t" + code + "\n";
  }
  return out;
}

std::string serialize_plurals(const std::map<std::string, std::string>& plurals) {
  std::string out;
  for (const auto& [plural, singular] : plurals) out += plural + "\t" + singular + "\n";
  return out;
}

std::string serialize_predicates(const PredicateGroups& groups) {
  std::string out;
  for (const std::string& w : groups.spatial) out += w + "\tspatial\n";
  for (const std::string& w : groups.other_manual) out += w + "\tother\n";
  return out;
}

}  // namespace kbvqa

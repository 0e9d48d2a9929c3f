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

#include "oracles.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>

namespace kbvqa::oracle {
namespace {

std::vector<std::string> words_of(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (ch == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

bool starts_with(const std::vector<std::string>& w, const std::vector<std::string>& prefix) {
  if (w.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (w[i] != prefix[i]) return false;
  }
  return true;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

struct Scene {
  const SceneGraph& graph;
  const WorldConfig& config;

  bool is_color(const std::string& w) const { return contains(config.attribute_vocab, w); }
  bool is_pred(const std::string& w) const { return contains(config.predicate_vocab, w); }

  std::string color(const SceneObject& o) const {
    for (const std::string& a : o.attributes) {
      if (is_color(a)) return a;
    }
    return "";
  }

  bool related(const SceneObject& s, const std::string& p, const SceneObject& o) const {
    for (const RelationTriple& t : graph.triples) {
      if (t.subject_id == s.object_id && t.predicate == p && t.object_id == o.object_id) {
        return true;
      }
    }
    return false;
  }

  // Objects described by a referring phrase: "N", "N P the M" or
  // "N that the M is P". nullopt when the phrase has none of these shapes.
  std::optional<std::vector<const SceneObject*>> refer(const std::vector<std::string>& w) const {
    std::vector<const SceneObject*> out;
    if (w.size() == 1) {
      for (const SceneObject& o : graph.objects) {
        if (o.name == w[0]) out.push_back(&o);
      }
      return out;
    }
    if (w.size() == 4 && is_pred(w[1]) && w[2] == "the") {
      for (const SceneObject& o : graph.objects) {
        if (o.name != w[0]) continue;
        for (const SceneObject& m : graph.objects) {
          if (m.name == w[3] && related(o, w[1], m)) {
            out.push_back(&o);
            break;
          }
        }
      }
      return out;
    }
    if (w.size() == 6 && w[1] == "that" && w[2] == "the" && w[4] == "is" && is_pred(w[5])) {
      for (const SceneObject& o : graph.objects) {
        if (o.name != w[0]) continue;
        for (const SceneObject& m : graph.objects) {
          if (m.name == w[3] && related(m, w[5], o)) {
            out.push_back(&o);
            break;
          }
        }
      }
      return out;
    }
    return std::nullopt;
  }

  std::string singular_of_plural(const std::string& plural) const {
    static const std::map<std::string, std::string> kIrregular = {
        {"men", "man"}, {"women", "woman"}, {"people", "person"}, {"children", "child"},
        {"mice", "mouse"}, {"geese", "goose"}, {"feet", "foot"}, {"teeth", "tooth"}};
    for (const std::string& n : config.name_vocab) {
      std::string p;
      auto it = std::find_if(kIrregular.begin(), kIrregular.end(),
                             [&](const auto& kv) { return kv.second == n; });
      if (it != kIrregular.end()) {
        p = it->first;
      } else if (n.back() == 's' || n.back() == 'x' || n.back() == 'z' ||
                 (n.size() > 1 && (n.substr(n.size() - 2) == "ch" || n.substr(n.size() - 2) == "sh"))) {
        p = n + "es";
      } else if (n.back() == 'y' && n.size() > 1 &&
                 std::string("aeiou").find(n[n.size() - 2]) == std::string::npos) {
        p = n.substr(0, n.size() - 1) + "ies";
      } else {
        p = n + "s";
      }
      if (p == plural) return n;
    }
    return "";
  }
};

std::optional<std::string> unique(const std::set<std::string>& answers) {
  if (answers.size() != 1) return std::nullopt;
  return *answers.begin();
}

std::string yes_no(bool b) { return b ? "yes" : "no"; }

}  // namespace

std::map<std::string, std::vector<std::pair<std::string, long>>> stats_kb(
    const std::vector<QuestionRecord>& questions, long threshold,
    const std::set<std::string>& stopwords, bool singularize_tokens, const Lexicon& lexicon) {
  // image -> list of (raw token, count) in first-seen order
  std::map<std::string, std::vector<std::pair<std::string, long>>> raw;
  for (const QuestionRecord& q : questions) {
    auto& counts = raw[q.image_id];
    std::string cur;
    auto flush = [&] {
      if (cur.empty()) return;
      bool found = false;
      for (auto& [tok, n] : counts) {
        if (tok == cur) {
          ++n;
          found = true;
        }
      }
      if (!found) counts.emplace_back(cur, 1);
      cur.clear();
    };
    for (char ch : q.text) {
      const auto u = static_cast<unsigned char>(ch);
      if (std::isalnum(u)) {
        cur += static_cast<char>(std::tolower(u));
      } else {
        flush();
      }
    }
    flush();
  }
  std::map<std::string, std::vector<std::pair<std::string, long>>> out;
  for (const auto& [image, counts] : raw) {
    std::vector<std::pair<std::string, long>> kept;
    for (const auto& [tok, n] : counts) {
      if (n <= threshold || stopwords.count(tok) > 0) continue;
      const std::string t = singularize_tokens ? singularize(tok, lexicon) : tok;
      bool merged = false;
      for (auto& [k, m] : kept) {
        if (k == t) {
          m += n;
          merged = true;
        }
      }
      if (!merged) kept.emplace_back(t, n);
    }
    // Selection sort: largest count first, then smallest token.
    for (std::size_t i = 0; i < kept.size(); ++i) {
      std::size_t best = i;
      for (std::size_t j = i + 1; j < kept.size(); ++j) {
        const bool better = kept[j].second > kept[best].second ||
                            (kept[j].second == kept[best].second && kept[j].first < kept[best].first);
        if (better) best = j;
      }
      std::swap(kept[i], kept[best]);
    }
    out[image] = kept;
  }
  return out;
}

std::vector<std::string> closure(const std::map<std::string, std::set<std::string>>& parents,
                                 const std::string& root, const std::string& word) {
  std::vector<std::string> order;
  std::vector<std::string> seen = {word};
  std::deque<std::string> queue = {word};
  while (!queue.empty()) {
    const std::string cur = queue.front();
    queue.pop_front();
    auto it = parents.find(cur);
    if (it == parents.end()) continue;
    for (const std::string& p : it->second) {
      if (std::find(seen.begin(), seen.end(), p) != seen.end()) continue;
      seen.push_back(p);
      queue.push_back(p);
      if (p != root) order.push_back(p);
    }
  }
  return order;
}

double sigmoid_of_sum(const std::vector<double>& logits) {
  long double s = 0.0L;
  for (double x : logits) s += x;
  return static_cast<double>(1.0L / (1.0L + std::exp(-s)));
}

std::optional<std::string> answer(const std::string& question, const SceneGraph& graph,
                                  const WorldConfig& config) {
  const Scene scene{graph, config};
  const std::vector<std::string> w = words_of(question);
  auto tail = [&](std::size_t from) { return std::vector<std::string>(w.begin() + from, w.end()); };

  // Colour questions.
  for (const auto& prefix : std::vector<std::vector<std::string>>{
           {"what", "color", "is", "the"},
           {"which", "color", "is", "the"},
           {"what", "is", "the", "color", "of", "the"}}) {
    if (!starts_with(w, prefix)) continue;
    auto objs = scene.refer(tail(prefix.size()));
    if (!objs || objs->size() != 1) return std::nullopt;
    return scene.color(*objs->front());
  }

  // Existence questions.
  for (const auto& prefix : std::vector<std::vector<std::string>>{{"is", "there", "a"},
                                                                  {"do", "you", "see", "a"}}) {
    if (!starts_with(w, prefix)) continue;
    std::vector<std::string> rest = tail(prefix.size());
    std::string c;
    if (!rest.empty() && scene.is_color(rest[0])) {
      c = rest[0];
      rest.erase(rest.begin());
    }
    auto objs = scene.refer(rest);
    if (!objs) return std::nullopt;
    bool found = false;
    for (const SceneObject* o : *objs) found = found || c.empty() || scene.color(*o) == c;
    return yes_no(found);
  }
  if (starts_with(w, {"are", "there", "any"})) {
    std::vector<std::string> rest = tail(3);
    std::string c;
    if (rest.size() == 2 && scene.is_color(rest[0])) {
      c = rest[0];
      rest.erase(rest.begin());
    }
    if (rest.size() != 1) return std::nullopt;
    const std::string name = scene.singular_of_plural(rest[0]);
    if (name.empty()) return std::nullopt;
    bool found = false;
    for (const SceneObject& o : graph.objects) {
      found = found || (o.name == name && (c.empty() || scene.color(o) == c));
    }
    return yes_no(found);
  }

  // Verification questions.
  if (starts_with(w, {"is", "the"})) {
    std::vector<std::string> rest = tail(2);
    if (rest.size() >= 2 && scene.is_color(rest.back())) {
      const std::string c = rest.back();
      rest.pop_back();
      auto objs = scene.refer(rest);
      if (!objs || objs->size() != 1) return std::nullopt;
      return yes_no(scene.color(*objs->front()) == c);
    }
    std::string c;
    if (!rest.empty() && scene.is_color(rest[0])) {
      c = rest[0];
      rest.erase(rest.begin());
    }
    if (rest.size() != 4 || !scene.is_pred(rest[1]) || rest[2] != "the") return std::nullopt;
    bool found = false;
    for (const SceneObject& s : graph.objects) {
      if (s.name != rest[0] || (!c.empty() && scene.color(s) != c)) continue;
      for (const SceneObject& o : graph.objects) {
        found = found || (o.name == rest[3] && scene.related(s, rest[1], o));
      }
    }
    return yes_no(found);
  }

  // Relation questions.
  for (const auto& prefix : std::vector<std::vector<std::string>>{{"what", "is"},
                                                                  {"which", "object", "is"}}) {
    if (!starts_with(w, prefix)) continue;
    std::vector<std::string> rest = tail(prefix.size());
    std::set<std::string> answers;
    if (!rest.empty() && rest[0] == "the" && rest.size() >= 3 && scene.is_pred(rest.back())) {
      // what is the [C] N P
      const std::string p = rest.back();
      std::string c;
      std::string n = rest[1];
      if (rest.size() == 4 && scene.is_color(rest[1])) {
        c = rest[1];
        n = rest[2];
      } else if (rest.size() != 3) {
        return std::nullopt;
      }
      for (const SceneObject& s : graph.objects) {
        if (s.name != n || (!c.empty() && scene.color(s) != c)) continue;
        for (const SceneObject& o : graph.objects) {
          if (scene.related(s, p, o)) answers.insert(o.name);
        }
      }
      return unique(answers);
    }
    if (rest.size() >= 3 && scene.is_pred(rest[0]) && rest[1] == "the") {
      // what is P the [C] N
      const std::string p = rest[0];
      std::string c;
      std::string n = rest[2];
      if (rest.size() == 4 && scene.is_color(rest[2])) {
        c = rest[2];
        n = rest[3];
      } else if (rest.size() != 3) {
        return std::nullopt;
      }
      for (const SceneObject& o : graph.objects) {
        if (o.name != n || (!c.empty() && scene.color(o) != c)) continue;
        for (const SceneObject& s : graph.objects) {
          if (scene.related(s, p, o)) answers.insert(s.name);
        }
      }
      return unique(answers);
    }
  }
  return std::nullopt;
}

}  // namespace kbvqa::oracle

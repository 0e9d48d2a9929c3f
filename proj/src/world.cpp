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

#include "world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "common.hpp"
#include "stats_kb.hpp"

namespace kbvqa {
namespace {

using nlohmann::json;

struct Relation {
  std::size_t subject;
  std::string predicate;
  std::size_t object;
};

std::string fill(std::string_view pattern,
                 std::initializer_list<std::pair<std::string_view, std::string>> slots) {
  std::string out(pattern);
  for (const auto& [key, value] : slots) {
    std::string token = "{" + std::string(key) + "}";
    for (std::size_t pos = out.find(token); pos != std::string::npos;
         pos = out.find(token, pos + value.size())) {
      out.replace(pos, token.size(), value);
    }
  }
  return out;
}

std::size_t pick_weighted(const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

template <typename T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  return items[rng.index(items.size())];
}

}  // namespace

const char* question_type_name(QuestionType type) {
  switch (type) {
    case QuestionType::kColor: return "color";
    case QuestionType::kExists: return "exists";
    case QuestionType::kRelationForward: return "relation_forward";
    case QuestionType::kRelationBackward: return "relation_backward";
    case QuestionType::kVerify: return "verify";
  }
  return "";
}

QuestionType parse_question_type(std::string_view name) {
  for (QuestionType t : {QuestionType::kColor, QuestionType::kExists,
                         QuestionType::kRelationForward, QuestionType::kRelationBackward,
                         QuestionType::kVerify}) {
    if (name == question_type_name(t)) return t;
  }
  throw Error(ErrorKind::kConfig, "unknown question type '" + std::string(name) + "'");
}

void validate(const WorldConfig& c) {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::kConfig, "world." + what); };
  if (c.n_images < 0) fail("n_images must be >= 0");
  if (c.objects_min < 1 || c.objects_max < c.objects_min) {
    fail("objects_min/objects_max must satisfy 1 <= min <= max");
  }
  if (c.name_vocab.empty() || c.attribute_vocab.empty() || c.predicate_vocab.empty()) {
    fail("name_vocab, attribute_vocab and predicate_vocab must be nonempty");
  }
  if (c.questions_per_image < 0) fail("questions_per_image must be >= 0");
  if (c.question_types.empty()) fail("question_types must be nonempty");
  if (!c.question_weights.empty()) {
    if (c.question_weights.size() != c.question_types.size()) {
      fail("question_weights must match question_types in length");
    }
    for (double w : c.question_weights) {
      if (!(w > 0.0 && std::isfinite(w))) fail("question_weights must be positive");
    }
  }
  for (double p : {c.material_rate, c.relation_rate, c.train_fraction}) {
    if (!(p >= 0.0 && p <= 1.0)) fail("rates and train_fraction must lie in [0, 1]");
  }
  if (c.material_rate > 0 && c.material_vocab.empty()) {
    fail("material_vocab must be nonempty when material_rate > 0");
  }
  if (!(c.salience_decay > 0.0 && c.salience_decay <= 1.0)) fail("salience_decay must lie in (0, 1]");
  for (const auto* vocab : {&c.name_vocab, &c.attribute_vocab, &c.material_vocab,
                            &c.predicate_vocab}) {
    if (std::set<std::string>(vocab->begin(), vocab->end()).size() != vocab->size()) {
      fail("vocabularies must not contain duplicates");
    }
  }
}

json world_config_to_json(const WorldConfig& c) {
  std::vector<std::string> types;
  for (QuestionType t : c.question_types) types.emplace_back(question_type_name(t));
  return {{"n_images", c.n_images},
          {"objects_min", c.objects_min},
          {"objects_max", c.objects_max},
          {"name_vocab", c.name_vocab},
          {"attribute_vocab", c.attribute_vocab},
          {"material_vocab", c.material_vocab},
          {"material_rate", c.material_rate},
          {"predicate_vocab", c.predicate_vocab},
          {"relation_rate", c.relation_rate},
          {"questions_per_image", c.questions_per_image},
          {"salience_decay", c.salience_decay},
          {"question_types", types},
          {"question_weights", c.question_weights},
          {"train_fraction", c.train_fraction},
          {"seed", c.seed}};
}

WorldConfig world_config_from_json(const json& j) {
  WorldConfig c;
  c.n_images = j.value("n_images", c.n_images);
  c.objects_min = j.value("objects_min", c.objects_min);
  c.objects_max = j.value("objects_max", c.objects_max);
  c.name_vocab = j.value("name_vocab", c.name_vocab);
  c.attribute_vocab = j.value("attribute_vocab", c.attribute_vocab);
  c.material_vocab = j.value("material_vocab", c.material_vocab);
  c.material_rate = j.value("material_rate", c.material_rate);
  c.predicate_vocab = j.value("predicate_vocab", c.predicate_vocab);
  c.relation_rate = j.value("relation_rate", c.relation_rate);
  c.questions_per_image = j.value("questions_per_image", c.questions_per_image);
  c.salience_decay = j.value("salience_decay", c.salience_decay);
  if (j.contains("question_types")) {
    c.question_types.clear();
    for (const json& t : j.at("question_types")) {
      c.question_types.push_back(parse_question_type(t.get<std::string>()));
    }
  }
  c.question_weights = j.value("question_weights", c.question_weights);
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  c.seed = j.value("seed", c.seed);
  return c;
}

std::string pluralize(const std::string& word, const Lexicon& lexicon) {
  for (const auto& [plural, singular] : lexicon.irregular_plurals) {
    if (singular == word) return plural;
  }
  auto ends = [&](std::string_view s) { return word.ends_with(s); };
  if (ends("s") || ends("x") || ends("z") || ends("ch") || ends("sh")) return word + "es";
  if (word.size() > 1 && ends("y") && std::string_view("aeiou").find(word[word.size() - 2]) ==
                                          std::string_view::npos) {
    return word.substr(0, word.size() - 1) + "ies";
  }
  return word + "s";
}

World generate_world(const WorldConfig& config) {
  validate(config);
  const bool wants_exists =
      std::find(config.question_types.begin(), config.question_types.end(),
                QuestionType::kExists) != config.question_types.end();
  const std::size_t needed = static_cast<std::size_t>(config.objects_max) + (wants_exists ? 1 : 0);
  if (config.name_vocab.size() < needed) {
    throw Error(ErrorKind::kConfig,
                "world.name_vocab has " + std::to_string(config.name_vocab.size()) +
                    " names; need at least " + std::to_string(needed) +
                    " for distinct object names (plus one absent name for existence questions)");
  }
  const Lexicon& lexicon = default_lexicon();
  Rng rng(mix64(config.seed ^ 0x77071dULL));
  World world;
  std::set<std::string> answers;
  std::size_t question_counter = 0;
  std::vector<std::string> question_order;

  for (int img = 1; img <= config.n_images; ++img) {
    char id_buf[32];
    std::snprintf(id_buf, sizeof(id_buf), "img%05d", img);
    SceneGraph graph;
    graph.image_id = id_buf;

    const int k = config.objects_min +
                  static_cast<int>(rng.index(static_cast<std::size_t>(
                      config.objects_max - config.objects_min + 1)));
    std::vector<std::string> names = config.name_vocab;
    rng.shuffle(names);
    std::vector<std::string> colors;
    for (int o = 0; o < k; ++o) {
      SceneObject object;
      object.object_id = "o" + std::to_string(o + 1);
      object.name = names[static_cast<std::size_t>(o)];
      colors.push_back(pick(config.attribute_vocab, rng));
      object.attributes.push_back(colors.back());
      if (rng.uniform() < config.material_rate) {
        object.attributes.push_back(pick(config.material_vocab, rng));
      }
      graph.objects.push_back(std::move(object));
    }

    // Each object takes part in at most one relation per predicate, so every
    // relation question has a single answer.
    std::vector<Relation> relations;
    std::vector<std::set<std::string>> used(static_cast<std::size_t>(k));
    for (std::size_t a = 0; a < static_cast<std::size_t>(k); ++a) {
      for (std::size_t b = a + 1; b < static_cast<std::size_t>(k); ++b) {
        if (rng.uniform() >= config.relation_rate) continue;
        std::vector<std::string> free;
        for (const std::string& p : config.predicate_vocab) {
          if (!used[a].contains(p) && !used[b].contains(p)) free.push_back(p);
        }
        const bool flip = rng.uniform() < 0.5;
        if (free.empty()) continue;
        const std::string& pred = pick(free, rng);
        used[a].insert(pred);
        used[b].insert(pred);
        relations.push_back(flip ? Relation{b, pred, a} : Relation{a, pred, b});
      }
    }
    for (const Relation& r : relations) {
      graph.triples.push_back({graph.objects[r.subject].object_id, r.predicate,
                               graph.objects[r.object].object_id});
    }

    // Questions concentrate on the first object and, next, on one of its
    // relation partners.
    std::vector<std::size_t> rank_order = {0};
    for (const Relation& r : relations) {
      if (rank_order.size() > 1) break;
      if (r.subject == 0) rank_order.push_back(r.object);
      if (r.object == 0) rank_order.push_back(r.subject);
    }
    for (std::size_t o = 1; o < static_cast<std::size_t>(k); ++o) {
      if (std::find(rank_order.begin(), rank_order.end(), o) == rank_order.end()) {
        rank_order.push_back(o);
      }
    }
    std::vector<double> weights(static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < rank_order.size(); ++r) {
      weights[rank_order[r]] = std::pow(config.salience_decay, static_cast<double>(r));
    }
    auto pick_relation = [&](const std::vector<const Relation*>& options, std::size_t self) {
      std::vector<double> w;
      for (const Relation* r : options) w.push_back(weights[r->subject == self ? r->object : r->subject]);
      return options[pick_weighted(w, rng)];
    };
    std::vector<std::string> absent(names.begin() + k, names.end());

    for (int q = 0; q < config.questions_per_image; ++q) {
      const std::size_t t = pick_weighted(weights, rng);
      const std::string& x = graph.objects[t].name;
      const std::string& cx = colors[t];
      std::vector<const Relation*> as_subject, as_object;
      for (const Relation& r : relations) {
        if (r.subject == t) as_subject.push_back(&r);
        if (r.object == t) as_object.push_back(&r);
      }
      std::vector<QuestionType> applicable;
      std::vector<double> type_weights;
      for (std::size_t i = 0; i < config.question_types.size(); ++i) {
        const QuestionType type = config.question_types[i];
        if (type == QuestionType::kRelationForward && as_subject.empty()) continue;
        if (type == QuestionType::kRelationBackward && as_object.empty()) continue;
        applicable.push_back(type);
        type_weights.push_back(config.question_weights.empty() ? 1.0 : config.question_weights[i]);
      }
      if (applicable.empty()) continue;
      const QuestionType type = applicable[pick_weighted(type_weights, rng)];
      // Colour, existence and colour-check questions may single out the
      // target through one of its relations.
      std::string ref = x;
      std::vector<const Relation*> involved = as_subject;
      involved.insert(involved.end(), as_object.begin(), as_object.end());
      if (!involved.empty() && rng.uniform() < 0.5) {
        const Relation& r = *pick_relation(involved, t);
        ref = r.subject == t
                  ? x + " " + r.predicate + " the " + graph.objects[r.object].name
                  : x + " that the " + graph.objects[r.subject].name + " is " + r.predicate;
      }
      std::string text;
      std::string answer;
      switch (type) {
        case QuestionType::kColor: {
          const std::vector<std::string> forms = {"what color is the {r}", "which color is the {r}",
                                                  "what is the color of the {r}"};
          text = fill(pick(forms, rng), {{"r", ref}});
          answer = cx;
          break;
        }
        case QuestionType::kExists: {
          // Negatives use the same phrasings with a name absent from the image.
          const bool present = absent.empty() || rng.uniform() < 0.5;
          std::string name = x;
          std::string color = cx;
          std::string desc = ref;
          if (!present) {
            name = pick(absent, rng);
            color = pick(config.attribute_vocab, rng);
            desc = name + ref.substr(x.size());
          }
          const std::vector<std::string> forms = {"is there a {r}", "is there a {c} {r}",
                                                  "are there any {c} {xs}",
                                                  "do you see a {c} {r}"};
          text = fill(pick(forms, rng),
                      {{"r", desc}, {"c", color}, {"xs", pluralize(name, lexicon)}});
          answer = present ? "yes" : "no";
          break;
        }
        case QuestionType::kRelationForward: {
          const Relation& r = *pick_relation(as_subject, t);
          const std::vector<std::string> forms = {"what is the {x} {p}", "what is the {c} {x} {p}",
                                                  "which object is the {c} {x} {p}"};
          text = fill(pick(forms, rng), {{"x", x}, {"c", cx}, {"p", r.predicate}});
          answer = graph.objects[r.object].name;
          break;
        }
        case QuestionType::kRelationBackward: {
          const Relation& r = *pick_relation(as_object, t);
          const std::vector<std::string> forms = {"what is {p} the {y}", "what is {p} the {c} {y}",
                                                  "which object is {p} the {c} {y}"};
          text = fill(pick(forms, rng), {{"y", x}, {"c", cx}, {"p", r.predicate}});
          answer = graph.objects[r.subject].name;
          break;
        }
        case QuestionType::kVerify: {
          const bool truth = rng.uniform() < 0.5;
          if (!as_subject.empty() && rng.uniform() < 0.5) {
            const Relation& r = *pick_relation(as_subject, t);
            std::vector<std::size_t> others;
            for (std::size_t o = 0; o < graph.objects.size(); ++o) {
              if (o != t && o != r.object) others.push_back(o);
            }
            const std::size_t y = truth || others.empty() ? r.object : pick(others, rng);
            const std::vector<std::string> forms = {"is the {x} {p} the {y}",
                                                    "is the {c} {x} {p} the {y}"};
            text = fill(pick(forms, rng),
                        {{"x", x}, {"c", cx}, {"p", r.predicate}, {"y", graph.objects[y].name}});
            answer = y == r.object ? "yes" : "no";
          } else {
            std::vector<std::string> wrong;
            for (const std::string& c : config.attribute_vocab) {
              if (c != cx) wrong.push_back(c);
            }
            const std::string& c = truth || wrong.empty() ? cx : pick(wrong, rng);
            text = fill("is the {r} {c}", {{"r", ref}, {"c", c}});
            answer = c == cx ? "yes" : "no";
          }
          break;
        }
      }
      char qid[32];
      std::snprintf(qid, sizeof(qid), "q%07zu", ++question_counter);
      world.corpus.add({qid, graph.image_id, text, answer});
      question_order.emplace_back(qid);
      answers.insert(answer);
    }
    std::string key = graph.image_id;
    world.scenes.emplace(std::move(key), std::move(graph));
  }

  world.answers.assign(answers.begin(), answers.end());
  rng.shuffle(question_order);
  const auto n_train = static_cast<std::size_t>(
      std::llround(config.train_fraction * static_cast<double>(question_order.size())));
  world.train_ids.assign(question_order.begin(),
                         question_order.begin() + static_cast<std::ptrdiff_t>(n_train));
  world.val_ids.assign(question_order.begin() + static_cast<std::ptrdiff_t>(n_train),
                       question_order.end());
  std::sort(world.train_ids.begin(), world.train_ids.end());
  std::sort(world.val_ids.begin(), world.val_ids.end());
  return world;
}

double salient_recurrence(const World& world, long threshold, const Lexicon& lexicon) {
  std::size_t images = 0;
  std::size_t recurring = 0;
  for (const auto& [image_id, indices] : world.corpus.by_image()) {
    auto it = world.scenes.find(image_id);
    if (it == world.scenes.end() || it->second.objects.empty()) continue;
    ++images;
    TokenStats counts;
    for (const auto& [token, n] : count_tokens(world.corpus.questions_for(image_id))) {
      counts[singularize(token, lexicon)] += n;
    }
    const std::string& top = it->second.objects.front().name;
    if (auto c = counts.find(top); c != counts.end() && c->second > threshold) ++recurring;
  }
  return images == 0 ? 1.0 : static_cast<double>(recurring) / static_cast<double>(images);
}

std::string serialize_split(const World& world) {
  json j = {{"train", world.train_ids}, {"val", world.val_ids}};
  return j.dump() + "\n";
}

void parse_split(std::string_view text, std::vector<std::string>& train,
                 std::vector<std::string>& val) {
  try {
    json j = json::parse(text);
    train = j.at("train").get<std::vector<std::string>>();
    val = j.at("val").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kCorrupt, std::string("split file: ") + e.what());
  }
}

std::vector<std::string> world_vocabulary(const WorldConfig& config) {
  const Lexicon& lexicon = default_lexicon();
  std::set<std::string> words = {"what", "color", "is",  "the", "which", "of",  "there",
                                 "a",    "are",   "any", "do",  "you",   "see", "object", "that",
                                 "yes",  "no"};
  for (const auto* vocab : {&config.name_vocab, &config.attribute_vocab, &config.material_vocab,
                            &config.predicate_vocab}) {
    words.insert(vocab->begin(), vocab->end());
  }
  for (const std::string& n : config.name_vocab) words.insert(pluralize(n, lexicon));
  return {words.begin(), words.end()};
}

}  // namespace kbvqa

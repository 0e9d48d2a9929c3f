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

#include "config.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "common.hpp"

namespace kbvqa {
namespace {

using nlohmann::json;

bool is_count(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
}

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw Error(ErrorKind::kConfig, field + ": " + what);
}

// Reads the keys of one config object, rejecting anything it was not asked
// about.
class Section {
 public:
  Section(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) fail(prefix_.empty() ? "config" : prefix_, "expected an object");
  }

  std::string field(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  const json* take(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void read(const std::string& key, int& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) fail(field(key), "expected an integer");
      const auto x = v->get<std::int64_t>();
      if (x < INT32_MIN || x > INT32_MAX) fail(field(key), "out of range");
      out = static_cast<int>(x);
    }
  }
  void read(const std::string& key, long& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) fail(field(key), "expected an integer");
      out = v->get<long>();
    }
  }
  void read(const std::string& key, std::uint64_t& out) {
    if (const json* v = take(key)) {
      if (!is_count(*v)) fail(field(key), "expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void read(const std::string& key, std::optional<std::uint64_t>& out) {
    if (const json* v = take(key)) {
      if (v->is_null()) {
        out.reset();
        return;
      }
      if (!is_count(*v)) fail(field(key), "expected a non-negative integer or null");
      out = v->get<std::uint64_t>();
    }
  }
  void read(const std::string& key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) fail(field(key), "expected a number");
      out = v->get<double>();
    }
  }
  void read(const std::string& key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) fail(field(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void read(const std::string& key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) fail(field(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  void read(const std::string& key, std::vector<std::string>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) fail(field(key), "expected a list of strings");
      out.clear();
      for (const json& s : *v) {
        if (!s.is_string()) fail(field(key), "expected a list of strings");
        out.push_back(s.get<std::string>());
      }
    }
  }
  void read(const std::string& key, std::vector<std::uint64_t>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) fail(field(key), "expected a list of non-negative integers");
      out.clear();
      for (const json& s : *v) {
        if (!is_count(s)) fail(field(key), "expected a list of non-negative integers");
        out.push_back(s.get<std::uint64_t>());
      }
    }
  }
  void read(const std::string& key, std::vector<double>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) fail(field(key), "expected a list of numbers");
      out.clear();
      for (const json& x : *v) {
        if (!x.is_number()) fail(field(key), "expected a list of numbers");
        out.push_back(x.get<double>());
      }
    }
  }
  template <typename Fn>
  void read_names(const std::string& key, Fn&& parse) {
    std::vector<std::string> names;
    bool present = j_.contains(key);
    read(key, names);
    if (!present) return;
    for (const std::string& n : names) {
      try {
        parse(n);
      } catch (const Error& e) {
        fail(field(key), e.what());
      }
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  Section sub(const std::string& key) {
    seen_.insert(key);
    static const json kEmpty = json::object();
    auto it = j_.find(key);
    return Section(it == j_.end() ? kEmpty : *it, field(key));
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) fail(field(key), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

}  // namespace

std::uint64_t env_seed(std::uint64_t fallback) {
  const char* v = std::getenv("KBVQA_SEED");
  if (v == nullptr || *v == '\0') return fallback;
  std::uint64_t out = 0;
  const char* end = v + std::char_traits<char>::length(v);
  auto [ptr, ec] = std::from_chars(v, end, out);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorKind::kConfig,
                std::string("KBVQA_SEED: expected a non-negative integer, got '") + v + "'");
  }
  return out;
}

RunConfig default_config() {
  RunConfig c;
  c.seed = env_seed(1);
  c.world.seed = c.seed;
  c.embedding_seed = c.seed;
  c.model.seed = c.seed;
  c.train.seed = c.seed;
  c.train.epochs = 30;
  c.train.learning_rate = 6e-3;
  c.train.batch_size = 16;
  c.train.linear_decay = true;
  return c;
}

RunConfig config_from_json(const json& doc) {
  RunConfig c = default_config();
  Section top(doc, "");
  top.read("seed", c.seed);
  // Seeds that a file leaves out follow its top-level seed.
  c.world.seed = c.embedding_seed = c.model.seed = c.train.seed = c.seed;
  top.read("jobs", c.jobs);

  {
    Section s = top.sub("world");
    s.read("n_images", c.world.n_images);
    s.read("objects_min", c.world.objects_min);
    s.read("objects_max", c.world.objects_max);
    s.read("name_vocab", c.world.name_vocab);
    s.read("attribute_vocab", c.world.attribute_vocab);
    s.read("material_vocab", c.world.material_vocab);
    s.read("material_rate", c.world.material_rate);
    s.read("predicate_vocab", c.world.predicate_vocab);
    s.read("relation_rate", c.world.relation_rate);
    s.read("questions_per_image", c.world.questions_per_image);
    s.read("salience_decay", c.world.salience_decay);
    std::vector<QuestionType> types;
    if (s.has("question_types")) {
      s.read_names("question_types", [&](const std::string& n) {
        types.push_back(parse_question_type(n));
      });
      c.world.question_types = types;
    }
    std::vector<double> weights;
    if (s.has("question_weights")) {
      s.read("question_weights", weights);
      c.world.question_weights = weights;
    }
    s.read("train_fraction", c.world.train_fraction);
    s.read("seed", c.world.seed);
    s.finish();
  }
  {
    Section s = top.sub("stats");
    s.read("threshold", c.stats_threshold);
    s.read("stopwords_path", c.stopwords_path);
    s.read("singularize", c.singularize);
    s.finish();
  }
  {
    Section s = top.sub("embedding");
    s.read("dim", c.embedding_dim);
    s.read("seed", c.embedding_seed);
    s.read("path", c.embedding_path);
    s.finish();
  }
  {
    Section s = top.sub("lexicon");
    s.read("dir", c.lexicon_dir);
    s.finish();
  }
  {
    Section s = top.sub("noise");
    s.read("p_drop", c.p_drop);
    s.read("p_swap", c.p_swap);
    s.read("seed", c.noise_seed);
    s.finish();
  }
  {
    Section s = top.sub("region");
    s.read("seed", c.region.seed);
    s.read("noise", c.region.noise);
    s.read("stats_with_region", c.stats_with_region);
    s.finish();
  }
  {
    Section s = top.sub("model");
    s.read("d", c.model.d);
    s.read("p", c.model.p);
    s.read("seed", c.model.seed);
    s.read("shared_encoder", c.shared_encoder);
    s.finish();
  }
  {
    Section s = top.sub("train");
    s.read("learning_rate", c.train.learning_rate);
    s.read("batch_size", c.train.batch_size);
    s.read("epochs", c.train.epochs);
    s.read("seed", c.train.seed);
    s.read("adaptive", c.train.adaptive);
    s.read("linear_decay", c.train.linear_decay);
    s.read("beta1", c.train.beta1);
    s.read("beta2", c.train.beta2);
    s.read("epsilon", c.train.epsilon);
    s.finish();
  }
  {
    Section s = top.sub("ablation");
    s.read("seeds", c.ablation_seeds);
    if (s.has("modes")) {
      std::vector<FeatureMode> modes;
      s.read_names("modes", [&](const std::string& n) { modes.push_back(parse_feature_mode(n)); });
      c.ablation_modes = modes;
    }
    s.finish();
  }
  top.finish();
  validate(c);
  return c;
}

json config_to_json(const RunConfig& c) {
  json world = world_config_to_json(c.world);
  std::vector<std::string> modes;
  for (FeatureMode m : c.ablation_modes) modes.emplace_back(feature_mode_name(m));
  return {
      {"seed", c.seed},
      {"jobs", c.jobs},
      {"world", world},
      {"stats",
       {{"threshold", c.stats_threshold},
        {"stopwords_path", c.stopwords_path},
        {"singularize", c.singularize}}},
      {"embedding", {{"dim", c.embedding_dim}, {"seed", c.embedding_seed}, {"path", c.embedding_path}}},
      {"lexicon", {{"dir", c.lexicon_dir}}},
      {"noise",
       {{"p_drop", c.p_drop},
        {"p_swap", c.p_swap},
        {"seed", c.noise_seed ? json(*c.noise_seed) : json(nullptr)}}},
      {"region",
       {{"seed", c.region.seed}, {"noise", c.region.noise}, {"stats_with_region", c.stats_with_region}}},
      {"model",
       {{"d", c.model.d}, {"p", c.model.p}, {"seed", c.model.seed},
        {"shared_encoder", c.shared_encoder}}},
      {"train", train_config_to_json(c.train)},
      {"ablation", {{"seeds", c.ablation_seeds}, {"modes", modes}}},
  };
}

void validate(const RunConfig& c) {
  if (c.jobs < 1) fail("jobs", "must be >= 1");
  validate(c.world);
  if (c.stats_threshold < 0) fail("stats.threshold", "must be >= 0");
  if (c.embedding_dim < 1) fail("embedding.dim", "must be >= 1");
  if (!(c.p_drop >= 0.0 && c.p_drop <= 1.0)) fail("noise.p_drop", "must lie in [0, 1]");
  if (!(c.p_swap >= 0.0 && c.p_swap <= 1.0)) fail("noise.p_swap", "must lie in [0, 1]");
  if (c.p_drop + c.p_swap > 1.0) fail("noise", "p_drop + p_swap must be <= 1");
  if (!(c.region.noise >= 0.0)) fail("region.noise", "must be >= 0");
  if (c.model.d < 2) fail("model.d", "must be >= 2");
  if (c.model.p < 1) fail("model.p", "must be >= 1");
  try {
    validate(c.train);
  } catch (const Error& e) {
    fail("train", e.what());
  }
  if (c.ablation_seeds.empty()) fail("ablation.seeds", "must be nonempty");
  if (c.ablation_modes.empty()) fail("ablation.modes", "must be nonempty");
}

void set_config_value(json& doc, const std::string& dotted_key, const std::string& value) {
  std::vector<std::string> path = split(dotted_key, '.');
  for (const std::string& part : path) {
    if (part.empty()) fail(dotted_key, "malformed key");
  }
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;
  }
  json* node = &doc;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (!node->is_object()) fail(dotted_key, "not inside an object");
    node = &(*node)[path[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) fail(dotted_key, "not inside an object");
  (*node)[path.back()] = std::move(parsed);
}

json load_config_document(const std::string& path) {
  if (path.empty()) return json::object();
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::kIo, "config '" + path + "': " + e.what());
  }
  try {
    json doc = json::parse(text);
    if (!doc.is_object()) fail("config", "expected an object at the top level");
    return doc;
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kConfig, "config '" + path + "': " + e.what());
  }
}

Lexicon config_lexicon(const RunConfig& c) {
  if (c.lexicon_dir.empty()) return default_lexicon();
  return load_lexicon(c.lexicon_dir);
}

StatsConfig config_stats(const RunConfig& c) {
  StatsConfig s;
  s.threshold = c.stats_threshold;
  s.singularize_tokens = c.singularize;
  if (c.stopwords_path.empty()) {
    s.stopwords = default_stopwords();
  } else {
    std::ifstream in(c.stopwords_path);
    if (!in) throw Error(ErrorKind::kIo, "cannot open stopwords '" + c.stopwords_path + "'");
    s.stopwords = load_stopwords(in);
  }
  return s;
}

NoiseModel config_noise(const RunConfig& c) {
  return {c.p_drop, c.p_swap, c.noise_seed.value_or(c.seed)};
}

EmbeddingTable config_embeddings(const RunConfig& c) {
  if (!c.embedding_path.empty()) {
    std::ifstream in(c.embedding_path);
    if (!in) throw Error(ErrorKind::kIo, "cannot open embeddings '" + c.embedding_path + "'");
    return load_embeddings(in, c.embedding_dim);
  }
  std::set<std::string> words;
  for (const std::string& w : world_vocabulary(c.world)) words.insert(w);
  const Lexicon lexicon = config_lexicon(c);
  for (const auto& [child, parents] : lexicon.taxonomy.parents()) {
    words.insert(child);
    words.insert(parents.begin(), parents.end());
  }
  return synthesize_table({words.begin(), words.end()}, c.embedding_dim, c.embedding_seed);
}

AblationSettings config_ablation(const RunConfig& c) {
  AblationSettings a;
  a.modes = c.ablation_modes;
  a.seeds = c.ablation_seeds;
  a.hp = c.model;
  a.train = c.train;
  a.knowledge.stats = config_stats(c);
  a.knowledge.noise = config_noise(c);
  a.knowledge.region = c.region;
  a.knowledge.stats_with_region = c.stats_with_region;
  a.shared_encoder = c.shared_encoder;
  a.jobs = c.jobs;
  return a;
}

}  // namespace kbvqa

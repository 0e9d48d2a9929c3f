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

#include <gtest/gtest.h>

#include <set>

#include "ingest.hpp"
#include "oracles.hpp"
#include "test_util.hpp"
#include "world.hpp"

namespace kbvqa {
namespace {

using testing::kind_of;

WorldConfig small_world(std::uint64_t seed = 1) {
  WorldConfig c;
  c.n_images = 60;
  c.seed = seed;
  return c;
}

TEST(World, DeterministicInSeed) {
  World a = generate_world(small_world(4));
  World b = generate_world(small_world(4));
  EXPECT_EQ(serialize_questions(a.corpus), serialize_questions(b.corpus));
  EXPECT_EQ(serialize_scene_graphs(a.scenes), serialize_scene_graphs(b.scenes));
  EXPECT_EQ(serialize_split(a), serialize_split(b));
  World c = generate_world(small_world(5));
  EXPECT_NE(serialize_questions(a.corpus), serialize_questions(c.corpus));
}

TEST(World, ZeroQuestionsGivesEmptyCorpus) {
  WorldConfig c = small_world();
  c.questions_per_image = 0;
  World w = generate_world(c);
  EXPECT_TRUE(w.corpus.questions().empty());
  EXPECT_TRUE(w.train_ids.empty());
  EXPECT_TRUE(w.val_ids.empty());
  EXPECT_EQ(w.scenes.size(), 60u);
}

TEST(World, EveryAnswerFollowsFromItsSceneGraph) {
  for (std::uint64_t seed : {1, 2, 3}) {
    WorldConfig c = small_world(seed);
    c.question_types.push_back(QuestionType::kVerify);
    World w = generate_world(c);
    ASSERT_FALSE(w.corpus.questions().empty());
    for (const QuestionRecord& q : w.corpus.questions()) {
      std::optional<std::string> a = oracle::answer(q.text, w.scenes.at(q.image_id), c);
      ASSERT_TRUE(a.has_value()) << q.text;
      EXPECT_EQ(*a, q.answer) << q.text;
    }
  }
}

TEST(World, EveryTemplateKindOccurs) {
  World w = generate_world(small_world());
  bool color = false, exists = false, forward = false, backward = false;
  for (const QuestionRecord& q : w.corpus.questions()) {
    color = color || q.text.find("color") != std::string::npos;
    exists = exists || q.text.starts_with("is there") || q.text.starts_with("are there");
    forward = forward || (q.text.starts_with("what is the ") && q.text.find("color") == std::string::npos);
    backward = backward || (q.text.starts_with("what is ") && !q.text.starts_with("what is the "));
  }
  EXPECT_TRUE(color && exists && forward && backward);
}

TEST(World, SplitIsEightyTwentyAndDisjoint) {
  World w = generate_world(small_world());
  const std::size_t n = w.corpus.questions().size();
  EXPECT_EQ(w.train_ids.size() + w.val_ids.size(), n);
  EXPECT_EQ(w.train_ids.size(), static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n))));
  std::set<std::string> train(w.train_ids.begin(), w.train_ids.end());
  for (const std::string& id : w.val_ids) EXPECT_FALSE(train.contains(id));
  std::vector<std::string> tr, va;
  parse_split(serialize_split(w), tr, va);
  EXPECT_EQ(tr, w.train_ids);
  EXPECT_EQ(va, w.val_ids);
  EXPECT_EQ(kind_of([&] { parse_split("{\"train\":[", tr, va); }), ErrorKind::kCorrupt);
}

TEST(World, AnswersAreSortedAndCoverCorpus) {
  World w = generate_world(small_world());
  EXPECT_TRUE(std::is_sorted(w.answers.begin(), w.answers.end()));
  std::set<std::string> answers(w.answers.begin(), w.answers.end());
  EXPECT_EQ(answers.size(), w.answers.size());
  for (const QuestionRecord& q : w.corpus.questions()) EXPECT_TRUE(answers.contains(q.answer));
}

TEST(World, ScenesAreValidWithDistinctNames) {
  World w = generate_world(small_world());
  for (const auto& [id, g] : w.scenes) {
    validate_scene_graph(g);
    std::set<std::string> names;
    for (const SceneObject& o : g.objects) names.insert(o.name);
    EXPECT_EQ(names.size(), g.objects.size());
    EXPECT_GE(g.objects.size(), 2u);
    EXPECT_LE(g.objects.size(), 5u);
  }
}

TEST(World, VocabularyCoversEveryQuestionToken) {
  WorldConfig c = small_world();
  c.question_types.push_back(QuestionType::kVerify);
  World w = generate_world(c);
  std::vector<std::string> v = world_vocabulary(c);
  std::set<std::string> vocab(v.begin(), v.end());
  for (const QuestionRecord& q : w.corpus.questions()) {
    for (const std::string& t : split(q.text, ' ')) EXPECT_TRUE(vocab.contains(t)) << t;
    EXPECT_TRUE(vocab.contains(q.answer)) << q.answer;
  }
}

TEST(World, DefaultWorldMakesSalientFactsRecur) {
  World w = generate_world(WorldConfig{});
  EXPECT_GE(salient_recurrence(w, 3, default_lexicon()), 0.9);
}

TEST(World, ConfigErrors) {
  WorldConfig c = small_world();
  c.name_vocab = {"dog", "cat"};
  EXPECT_EQ(kind_of([&] { generate_world(c); }), ErrorKind::kConfig);
  c = small_world();
  c.attribute_vocab.clear();
  EXPECT_EQ(kind_of([&] { validate(c); }), ErrorKind::kConfig);
  c = small_world();
  c.objects_min = 4;
  c.objects_max = 3;
  EXPECT_EQ(kind_of([&] { validate(c); }), ErrorKind::kConfig);
  c = small_world();
  c.question_weights = {1.0};
  EXPECT_EQ(kind_of([&] { validate(c); }), ErrorKind::kConfig);
}

TEST(World, QuestionWeightsShiftTheMix) {
  WorldConfig c = small_world();
  c.question_types = {QuestionType::kColor, QuestionType::kExists};
  c.question_weights = {9.0, 1.0};
  World w = generate_world(c);
  std::size_t color = 0;
  for (const QuestionRecord& q : w.corpus.questions()) {
    color += q.text.find("color") != std::string::npos ? 1 : 0;
  }
  EXPECT_GT(static_cast<double>(color) / static_cast<double>(w.corpus.questions().size()), 0.8);
}

TEST(World, ConfigJsonRoundTrips) {
  WorldConfig c = small_world(9);
  c.question_weights = {2, 1, 1, 1};
  c.relation_rate = 0.25;
  WorldConfig back = world_config_from_json(world_config_to_json(c));
  EXPECT_EQ(world_config_to_json(back), world_config_to_json(c));
}

TEST(World, Pluralize) {
  const Lexicon& lex = default_lexicon();
  EXPECT_EQ(pluralize("dog", lex), "dogs");
  EXPECT_EQ(pluralize("bench", lex), "benches");
  EXPECT_EQ(pluralize("bus", lex), "buses");
  EXPECT_EQ(pluralize("berry", lex), "berries");
  EXPECT_EQ(pluralize("man", lex), "men");
}

}  // namespace
}  // namespace kbvqa

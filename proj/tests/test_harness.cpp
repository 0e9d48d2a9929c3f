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

#include <algorithm>

#include "harness.hpp"
#include "test_util.hpp"
#include "world.hpp"

namespace kbvqa {
namespace {

using testing::kind_of;

HyperParams tiny_hp(int dim) {
  HyperParams hp;
  hp.d = 4;
  hp.p = 1;
  hp.word_dim = dim;
  hp.knowledge_dim = dim;
  return hp;
}

// Model that always predicts `answers[winner]`.
FusionModel constant_model(const std::vector<std::string>& answers, std::size_t winner, int dim) {
  HyperParams hp = tiny_hp(dim);
  FusionModel m = init_model({StreamKind::kObjectLabel}, answers, hp);
  m.branches[0].cell.out2_b = Eigen::VectorXd::Constant(hp.answer_count, -100.0);
  m.branches[0].cell.out2_b[static_cast<Eigen::Index>(winner)] = 100.0;
  return m;
}

std::vector<Example> examples_with_answers(const std::vector<std::size_t>& golds) {
  static const ImageKnowledge knowledge{
      "i", Phase::kTrain, {{StreamKind::kObjectLabel, {"a"}, Eigen::MatrixXd::Ones(1, 3)}}};
  std::vector<Example> out;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    Example e;
    e.question_id = "q" + std::to_string(i);
    e.knowledge = &knowledge;
    e.tokens = Eigen::MatrixXd::Ones(2, 3);
    e.answer = golds[i];
    out.push_back(e);
  }
  return out;
}

TEST(Harness, EvaluateFixtures) {
  const std::vector<std::string> answers = {"no", "yes"};
  FusionModel m = constant_model(answers, 1, 3);
  EvalResult all = evaluate(m, examples_with_answers({1, 1, 1}));
  EXPECT_EQ(all.accuracy, 1.0);
  EvalResult none = evaluate(m, examples_with_answers({0, 0}));
  EXPECT_EQ(none.accuracy, 0.0);
  EvalResult mixed = evaluate(m, examples_with_answers({1, 1, 0, 1}));
  EXPECT_EQ(mixed.accuracy, 0.75);
  EXPECT_EQ(mixed.correct, 3u);
  EXPECT_EQ(mixed.n, 4u);
  ASSERT_EQ(mixed.records.size(), 4u);
  EXPECT_EQ(mixed.records[2].question_id, "q2");
  EXPECT_EQ(mixed.records[2].predicted, "yes");
  EXPECT_EQ(mixed.records[2].gold, "no");
  EXPECT_EQ(kind_of([&] { evaluate(m, {}); }), ErrorKind::kContract);
}

TEST(Harness, EvaluateIgnoresOrder) {
  WorldConfig wc;
  wc.n_images = 20;
  World w = generate_world(wc);
  EmbeddingTable table = synthesize_table(world_vocabulary(wc), 6, 1);
  KnowledgeSettings ks;
  KnowledgeMap k = build_knowledge(FeatureMode::kGroundTruth, Phase::kTrain, w.scenes, w.corpus,
                                   nullptr, default_lexicon(), table, ks);
  std::vector<Example> ex = make_examples(w.corpus, w.val_ids, k, table, w.answers);
  HyperParams hp = tiny_hp(6);
  FusionModel m = init_model(branch_kinds(FeatureMode::kGroundTruth, false), w.answers, hp);
  EvalResult a = evaluate(m, ex);
  Rng rng(3);
  rng.shuffle(ex);
  EvalResult b = evaluate(m, ex);
  EXPECT_EQ(a.correct, b.correct);
  EXPECT_EQ(a.accuracy, static_cast<double>(a.correct) / static_cast<double>(a.n));
}

TEST(Harness, MakeExamplesErrors) {
  WorldConfig wc;
  wc.n_images = 5;
  World w = generate_world(wc);
  EmbeddingTable table = synthesize_table(world_vocabulary(wc), 6, 1);
  KnowledgeMap k;
  EXPECT_EQ(kind_of([&] { make_examples(w.corpus, {"nope"}, k, table, w.answers); }),
            ErrorKind::kNotFound);
  EXPECT_EQ(kind_of([&] { make_examples(w.corpus, w.train_ids, k, table, {"zzz"}); }),
            ErrorKind::kConsistency);
}

TEST(Harness, EmbedQuestionZeroRowsForUnknownTokens) {
  EmbeddingTable table = synthesize_table({"dog"}, 3, 1);
  Eigen::MatrixXd m = embed_question("the dog", table);
  ASSERT_EQ(m.rows(), 2);
  EXPECT_EQ(m.row(0).norm(), 0.0);
  EXPECT_EQ(Eigen::VectorXd(m.row(1).transpose()), *table.find("dog"));
}

TEST(Harness, BranchKinds) {
  EXPECT_EQ(branch_kinds(FeatureMode::kStats, false), (std::vector<StreamKind>{StreamKind::kStatsWord}));
  EXPECT_EQ(branch_kinds(FeatureMode::kGroundTruth, false).size(), 4u);
  EXPECT_EQ(branch_kinds(FeatureMode::kDetected, false),
            branch_kinds(FeatureMode::kGroundTruth, false));
}

AblationSettings tiny_ablation() {
  AblationSettings s;
  s.hp = tiny_hp(6);
  s.train.epochs = 2;
  s.train.batch_size = 16;
  s.knowledge.stats.threshold = 3;
  s.knowledge.stats.stopwords = default_stopwords();
  return s;
}

TEST(Harness, SingleRunReport) {
  WorldConfig wc;
  wc.n_images = 10;
  World w = generate_world(wc);
  EmbeddingTable table = synthesize_table(world_vocabulary(wc), 6, 1);
  AblationSettings s = tiny_ablation();
  s.modes = {FeatureMode::kStats};
  s.seeds = {4};
  AblationReport r = run_ablation(w, default_lexicon(), table, s);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].split, "train");
  EXPECT_EQ(r.rows[1].split, "val");
  EXPECT_EQ(r.rows[1].n, w.val_ids.size());
  for (const AblationRow& row : r.rows) {
    EXPECT_EQ(row.accuracy, static_cast<double>(row.correct) / static_cast<double>(row.n));
  }
  auto [mean, sd] = r.summary(FeatureMode::kStats, "val");
  EXPECT_EQ(mean, r.rows[1].accuracy);
  EXPECT_EQ(sd, 0.0);
}

TEST(Harness, ZeroNoiseDetectedMatchesGroundTruth) {
  WorldConfig wc;
  wc.n_images = 10;
  World w = generate_world(wc);
  EmbeddingTable table = synthesize_table(world_vocabulary(wc), 6, 1);
  AblationSettings s = tiny_ablation();
  s.modes = {FeatureMode::kGroundTruth, FeatureMode::kDetected};
  s.seeds = {1, 2};
  s.knowledge.noise = {0.0, 0.0, 1};
  AblationReport r = run_ablation(w, default_lexicon(), table, s);
  for (const std::string split : {"train", "val"}) {
    EXPECT_EQ(r.summary(FeatureMode::kGroundTruth, split),
              r.summary(FeatureMode::kDetected, split));
  }
}

TEST(Harness, ParallelRunsMatchSerialRuns) {
  WorldConfig wc;
  wc.n_images = 8;
  World w = generate_world(wc);
  EmbeddingTable table = synthesize_table(world_vocabulary(wc), 6, 1);
  AblationSettings s = tiny_ablation();
  s.knowledge.noise = {0.3, 0.2, 1};
  s.seeds = {1, 2};
  AblationReport serial = run_ablation(w, default_lexicon(), table, s);
  s.jobs = 3;
  AblationReport parallel = run_ablation(w, default_lexicon(), table, s);
  EXPECT_EQ(report_to_json(serial), report_to_json(parallel));
}

TEST(Harness, ReportJsonAndMarkdown) {
  AblationReport r;
  r.modes = {FeatureMode::kGroundTruth, FeatureMode::kStats, FeatureMode::kDetected};
  r.seeds = {1, 2};
  for (FeatureMode m : r.modes) {
    for (std::uint64_t seed : r.seeds) {
      for (const char* split : {"train", "val"}) {
        r.rows.push_back({m, seed, split, 3 + seed, 8, static_cast<double>(3 + seed) / 8.0});
      }
    }
  }
  AblationReport back = report_from_json(report_to_json(r));
  EXPECT_EQ(report_to_json(back), report_to_json(r));
  auto [mean, sd] = r.summary(FeatureMode::kStats, "val");
  EXPECT_DOUBLE_EQ(mean, 4.5 / 8.0);
  EXPECT_NEAR(sd, std::sqrt(0.5) / 8.0, 1e-15);
  std::string md = report_markdown(r);
  for (const char* name : {"groundtruth", "stats", "detected"}) {
    EXPECT_NE(md.find(name), std::string::npos) << name;
  }
  EXPECT_NE(md.find("Val Acc."), std::string::npos);
}

}  // namespace
}  // namespace kbvqa

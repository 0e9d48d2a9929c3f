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

// Exercises the library only through its public C header.
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kbvqa/kbvqa.h"

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CApi : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("kbvqa_capi_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    ASSERT_EQ(kbvqa_config_create(&cfg_), KBVQA_OK);
    set("world.n_images", "12");
    set("train.epochs", "1");
    set("model.d", "4");
    set("model.p", "1");
    set("embedding.dim", "8");
  }
  void TearDown() override {
    kbvqa_config_free(cfg_);
    fs::remove_all(dir_);
  }
  void set(const char* key, const char* value) {
    ASSERT_EQ(kbvqa_config_set(cfg_, key, value), KBVQA_OK) << kbvqa_last_error();
  }
  std::string path(const char* name) const { return (dir_ / name).string(); }
  // Consumes a library-owned string.
  static std::string take(char* s) {
    std::string out = s != nullptr ? s : "";
    kbvqa_free_string(s);
    return out;
  }
  void make_world() {
    char* summary = nullptr;
    ASSERT_EQ(kbvqa_gen_world(cfg_, path("world").c_str(), &summary), KBVQA_OK)
        << kbvqa_last_error();
    take(summary);
  }

  fs::path dir_;
  kbvqa_config* cfg_ = nullptr;
};

TEST_F(CApi, VersionAndDump) {
  EXPECT_NE(std::string(kbvqa_version()), "");
  char* dump = nullptr;
  ASSERT_EQ(kbvqa_config_dump(cfg_, &dump), KBVQA_OK);
  std::string text = take(dump);
  EXPECT_NE(text.find("\"n_images\": 12"), std::string::npos) << text;
}

TEST_F(CApi, ConfigErrors) {
  EXPECT_EQ(kbvqa_config_set(cfg_, "train.epochs", "\"many\""), KBVQA_ERR_USAGE);
  EXPECT_NE(std::string(kbvqa_last_error()).find("train.epochs"), std::string::npos);
  EXPECT_EQ(kbvqa_config_set(cfg_, "nonsense.key", "1"), KBVQA_ERR_USAGE);
  kbvqa_config* other = nullptr;
  EXPECT_EQ(kbvqa_config_load("/nonexistent/kbvqa.json", &other), KBVQA_ERR_IO);
  EXPECT_EQ(other, nullptr);
  // A rejected value leaves the configuration unchanged.
  char* dump = nullptr;
  ASSERT_EQ(kbvqa_config_dump(cfg_, &dump), KBVQA_OK);
  EXPECT_EQ(take(dump).find("nonsense"), std::string::npos);
}

TEST_F(CApi, NullArgumentsAreUsageErrors) {
  EXPECT_EQ(kbvqa_config_create(nullptr), KBVQA_ERR_USAGE);
  EXPECT_EQ(kbvqa_gen_world(cfg_, nullptr, nullptr), KBVQA_ERR_USAGE);
  EXPECT_EQ(kbvqa_build_kb(cfg_, nullptr, nullptr), KBVQA_ERR_USAGE);
}

TEST_F(CApi, GenWorldWritesFourFiles) {
  make_world();
  for (const char* f : {"questions.jsonl", "scenes.jsonl", "answers.txt", "split.json"}) {
    EXPECT_GT(fs::file_size(dir_ / "world" / f), 0u) << f;
  }
}

TEST_F(CApi, BuildTrainEvalInspect) {
  make_world();
  const std::string q = path("world/questions.jsonl");
  const std::string s = path("world/scenes.jsonl");
  const std::string kb = path("stats_kb.jsonl");
  const std::string gt = path("knowledge.jsonl");
  char* summary = nullptr;
  kbvqa_build_args stats{KBVQA_MODE_STATS, KBVQA_PHASE_TRAIN, q.c_str(), nullptr, kb.c_str()};
  ASSERT_EQ(kbvqa_build_kb(cfg_, &stats, &summary), KBVQA_OK) << kbvqa_last_error();
  take(summary);
  kbvqa_build_args truth{KBVQA_MODE_GROUNDTRUTH, KBVQA_PHASE_TEST, nullptr, s.c_str(), gt.c_str()};
  ASSERT_EQ(kbvqa_build_kb(cfg_, &truth, &summary), KBVQA_OK) << kbvqa_last_error();
  take(summary);

  const std::string split = path("world/split.json");
  const std::string answers = path("world/answers.txt");
  const std::string ckpt = path("model.json");
  kbvqa_data_args data{q.c_str(), nullptr, kb.c_str(), split.c_str(), answers.c_str(), nullptr};
  ASSERT_EQ(kbvqa_train(cfg_, &data, ckpt.c_str(), &summary), KBVQA_OK) << kbvqa_last_error();
  take(summary);
  const std::string metrics = path("metrics.json");
  ASSERT_EQ(kbvqa_eval(cfg_, &data, ckpt.c_str(), metrics.c_str(), &summary), KBVQA_OK)
      << kbvqa_last_error();
  EXPECT_NE(take(summary).find("accuracy"), std::string::npos);
  EXPECT_NE(slurp(metrics).find("records"), std::string::npos);

  // A model trained on stats words cannot read scene-graph knowledge.
  kbvqa_data_args wrong{q.c_str(), gt.c_str(), nullptr, split.c_str(), answers.c_str(), nullptr};
  EXPECT_EQ(kbvqa_eval(cfg_, &wrong, ckpt.c_str(), nullptr, &summary), KBVQA_ERR_CONSISTENCY);

  char* listing = nullptr;
  ASSERT_EQ(kbvqa_inspect_kb(kb.c_str(), "img00001", &listing), KBVQA_OK) << kbvqa_last_error();
  take(listing);
  ASSERT_EQ(kbvqa_inspect_kb(gt.c_str(), "img00001", &listing), KBVQA_OK) << kbvqa_last_error();
  EXPECT_NE(take(listing).find("object_label"), std::string::npos);
  EXPECT_EQ(kbvqa_inspect_kb(kb.c_str(), "img99999", &listing), KBVQA_ERR_NOT_FOUND);
  EXPECT_NE(std::string(kbvqa_last_error()).find("image not found"), std::string::npos);
}

TEST_F(CApi, DetectedNeedsNoiseSeed) {
  make_world();
  const std::string s = path("world/scenes.jsonl");
  const std::string out = path("det.jsonl");
  kbvqa_build_args det{KBVQA_MODE_DETECTED, KBVQA_PHASE_TRAIN, nullptr, s.c_str(), out.c_str()};
  char* summary = nullptr;
  EXPECT_EQ(kbvqa_build_kb(cfg_, &det, &summary), KBVQA_ERR_USAGE);
  set("noise.seed", "3");
  EXPECT_EQ(kbvqa_build_kb(cfg_, &det, &summary), KBVQA_OK) << kbvqa_last_error();
  take(summary);
}

TEST_F(CApi, CorruptAndMissingInputs) {
  const std::string bad = path("bad.jsonl");
  std::ofstream(bad) << "{\"image_id\": \"img1\", \"tokens\": [";
  char* listing = nullptr;
  EXPECT_EQ(kbvqa_inspect_kb(bad.c_str(), "img1", &listing), KBVQA_ERR_CORRUPT);
  EXPECT_NE(std::string(kbvqa_last_error()).find("byte offset"), std::string::npos);
  EXPECT_EQ(kbvqa_inspect_kb(path("missing.jsonl").c_str(), "img1", &listing), KBVQA_ERR_IO);
}

TEST_F(CApi, EvalRejectsMismatchedAnswers) {
  make_world();
  const std::string q = path("world/questions.jsonl");
  const std::string kb = path("stats_kb.jsonl");
  char* summary = nullptr;
  kbvqa_build_args stats{KBVQA_MODE_STATS, KBVQA_PHASE_TRAIN, q.c_str(), nullptr, kb.c_str()};
  ASSERT_EQ(kbvqa_build_kb(cfg_, &stats, &summary), KBVQA_OK);
  take(summary);
  const std::string ckpt = path("model.json");
  kbvqa_data_args data{q.c_str(), nullptr, kb.c_str(), nullptr, nullptr, "all"};
  ASSERT_EQ(kbvqa_train(cfg_, &data, ckpt.c_str(), &summary), KBVQA_OK) << kbvqa_last_error();
  take(summary);
  const std::string answers = path("answers.txt");
  std::ofstream(answers) << "no\nyes\n";
  data.answers = answers.c_str();
  EXPECT_EQ(kbvqa_eval(cfg_, &data, ckpt.c_str(), nullptr, &summary), KBVQA_ERR_CONSISTENCY);
}

TEST_F(CApi, LogCallbackReceivesProgress) {
  std::vector<std::string> lines;
  kbvqa_set_log([](const char* line, void* user) {
    static_cast<std::vector<std::string>*>(user)->push_back(line);
  }, &lines);
  make_world();
  const std::string q = path("world/questions.jsonl");
  const std::string kb = path("stats_kb.jsonl");
  char* summary = nullptr;
  kbvqa_build_args stats{KBVQA_MODE_STATS, KBVQA_PHASE_TRAIN, q.c_str(), nullptr, kb.c_str()};
  ASSERT_EQ(kbvqa_build_kb(cfg_, &stats, &summary), KBVQA_OK);
  take(summary);
  kbvqa_data_args data{q.c_str(), nullptr, kb.c_str(), nullptr, nullptr, "all"};
  ASSERT_EQ(kbvqa_train(cfg_, &data, path("m.json").c_str(), &summary), KBVQA_OK);
  take(summary);
  kbvqa_set_log(nullptr, nullptr);
  bool saw_epoch = false;
  for (const std::string& l : lines) saw_epoch = saw_epoch || l.find("epoch") != std::string::npos;
  EXPECT_TRUE(saw_epoch);
}

}  // namespace

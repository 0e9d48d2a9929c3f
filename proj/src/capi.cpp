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

#include "kbvqa/kbvqa.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <new>
#include <set>
#include <sstream>

#include "common.hpp"
#include "config.hpp"
#include "harness.hpp"
#include "knowledge.hpp"
#include "stats_kb.hpp"
#include "world.hpp"

struct kbvqa_config {
  nlohmann::json doc = nlohmann::json::object();
};

namespace {

using nlohmann::json;
using namespace kbvqa;
namespace fs = std::filesystem;

thread_local std::string g_last_error;

std::mutex g_log_mutex;
kbvqa_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

void log_line(const std::string& line) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  if (g_log_fn != nullptr) g_log_fn(line.c_str(), g_log_user);
}

kbvqa_status status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kContract:
      return KBVQA_ERR_USAGE;
    case ErrorKind::kIo:
      return KBVQA_ERR_IO;
    case ErrorKind::kConsistency:
    case ErrorKind::kDimension:
    case ErrorKind::kShape:
      return KBVQA_ERR_CONSISTENCY;
    case ErrorKind::kNotFound:
      return KBVQA_ERR_NOT_FOUND;
    case ErrorKind::kParse:
    case ErrorKind::kSchema:
    case ErrorKind::kDuplicateKey:
    case ErrorKind::kReference:
    case ErrorKind::kCorrupt:
      return KBVQA_ERR_CORRUPT;
    case ErrorKind::kNonFinite:
      return KBVQA_ERR_INTERNAL;
  }
  return KBVQA_ERR_INTERNAL;
}

template <typename Fn>
kbvqa_status guard(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return KBVQA_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    g_last_error = e.what();
    return KBVQA_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return KBVQA_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return KBVQA_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void hand_out(char** out, const std::string& s) {
  if (out != nullptr) *out = dup_string(s);
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw Error(ErrorKind::kContract, std::string(what) + " must not be null");
}

bool given(const char* s) { return s != nullptr && *s != '\0'; }

RunConfig resolve(const kbvqa_config* config) {
  require(config, "config");
  return config_from_json(config->doc);
}

// Runs `fn`, prefixing any library error with the file it concerns.
template <typename Fn>
auto with_source(const std::string& path, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, path + ": cannot open for reading");
  return in;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in = open_input(path);
  return with_source(path, [&] { return parse_questions(in); });
}

SceneGraphMap load_scenes(const std::string& path) {
  std::ifstream in = open_input(path);
  return with_source(path, [&] { return parse_scene_graphs(in); });
}

StatsKnowledgeBase load_stats_kb(const std::string& path) {
  std::ifstream in = open_input(path);
  return with_source(path, [&] { return parse_stats_kb(in); });
}

std::vector<std::string> load_answers(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<std::string> answers;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string a(trim(line));
    if (a.empty()) continue;
    if (!seen.insert(a).second) {
      throw Error(ErrorKind::kCorrupt,
                  path + ": line " + std::to_string(line_no) + ": duplicate answer '" + a + "'");
    }
    answers.push_back(a);
  }
  return answers;
}

std::string serialize_answers(const std::vector<std::string>& answers) {
  std::string out;
  for (const std::string& a : answers) out += a + "\n";
  return out;
}

void load_split(const std::string& path, std::vector<std::string>& train,
                std::vector<std::string>& val) {
  const std::string text = read_file(path);
  with_source(path, [&] { parse_split(text, train, val); });
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorKind::kIo, dir + ": cannot create output directory" +
                                    (ec ? ": " + ec.message() : std::string()));
  }
}

std::vector<std::string> corpus_answers(const Corpus& corpus) {
  std::set<std::string> s;
  for (const QuestionRecord& q : corpus.questions()) s.insert(q.answer);
  return {s.begin(), s.end()};
}

// Question ids selected by `subset` ("train", "val", "all"); without a split
// every question is selected.
std::vector<std::string> select_ids(const Corpus& corpus, const kbvqa_data_args& data,
                                    const char* default_subset) {
  std::string subset = given(data.subset) ? data.subset : "";
  if (!given(data.split)) {
    if (!subset.empty() && subset != "all") {
      throw Error(ErrorKind::kConfig, "--subset " + subset + " needs --split");
    }
    std::vector<std::string> ids;
    for (const QuestionRecord& q : corpus.questions()) ids.push_back(q.question_id);
    return ids;
  }
  if (subset.empty()) subset = default_subset;
  std::vector<std::string> train, val;
  load_split(data.split, train, val);
  if (subset == "train") return train;
  if (subset == "val") return val;
  if (subset == "all") {
    train.insert(train.end(), val.begin(), val.end());
    return train;
  }
  throw Error(ErrorKind::kConfig, "subset: expected train, val or all, got '" + subset + "'");
}

// Knowledge for training or evaluation, checked against the embedding table.
KnowledgeMap load_knowledge_input(const kbvqa_data_args& data, const Corpus& corpus,
                                  const EmbeddingTable& table, Phase phase) {
  if (given(data.knowledge) == given(data.stats_kb)) {
    throw Error(ErrorKind::kConfig, "exactly one of --knowledge and --stats-kb is required");
  }
  KnowledgeMap out;
  if (given(data.stats_kb)) {
    StatsKnowledgeBase kb = load_stats_kb(data.stats_kb);
    for (const auto& [id, idx] : corpus.by_image()) {
      out.emplace(id, assemble_stats(kb, id, table, phase));
    }
    return out;
  }
  const std::string path = data.knowledge;
  std::vector<ImageKnowledge> images = with_source(path, [&] { return read_knowledge(path); });
  for (ImageKnowledge& img : images) {
    for (const KnowledgeStream& s : img.streams) {
      if (s.vectors.rows() > 0 && s.vectors.cols() != table.dim()) {
        throw Error(ErrorKind::kConsistency,
                    "knowledge file " + path + " has vectors of dimension " +
                        std::to_string(s.vectors.cols()) +
                        " but the embedding table (embedding.dim) has dimension " +
                        std::to_string(table.dim()));
      }
    }
    std::string id = img.image_id;
    out.emplace(std::move(id), std::move(img));
  }
  return out;
}

std::vector<StreamKind> present_kinds(const KnowledgeMap& knowledge) {
  std::set<StreamKind> kinds;
  for (const auto& [id, img] : knowledge) {
    for (const KnowledgeStream& s : img.streams) kinds.insert(s.kind);
  }
  return {kinds.begin(), kinds.end()};
}

std::string data_source(const kbvqa_data_args& data) {
  return given(data.knowledge) ? std::string(data.knowledge) : std::string(data.stats_kb);
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

std::string inspect_stats(const StatsKnowledgeBase& kb, const std::string& image_id) {
  auto it = kb.per_image.find(image_id);
  if (it == kb.per_image.end()) throw Error(ErrorKind::kNotFound, "image not found: " + image_id);
  std::string out = "image " + image_id + " (statistical words): " +
                    std::to_string(it->second.size()) + " tokens\n";
  for (const StatsEntry& e : it->second) {
    out += "  " + e.token + "\tcount " + std::to_string(e.count) + "\n";
  }
  return out;
}

std::string inspect_knowledge(const std::vector<ImageKnowledge>& images,
                              const std::string& image_id) {
  for (const ImageKnowledge& img : images) {
    if (img.image_id != image_id) continue;
    std::string out = "image " + image_id + " (" + phase_name(img.phase) + " phase): " +
                      std::to_string(img.streams.size()) + " streams\n";
    for (const KnowledgeStream& s : img.streams) {
      out += "  " + std::string(stream_kind_name(s.kind)) + ": " +
             std::to_string(s.labels.size()) + " items\n";
      for (const std::string& l : s.labels) out += "    " + l + "\n";
    }
    return out;
  }
  throw Error(ErrorKind::kNotFound, "image not found: " + image_id);
}

World load_world(const std::string& dir) {
  World w;
  const fs::path root(dir);
  w.corpus = load_corpus((root / "questions.jsonl").string());
  w.scenes = load_scenes((root / "scenes.jsonl").string());
  w.answers = load_answers((root / "answers.txt").string());
  load_split((root / "split.json").string(), w.train_ids, w.val_ids);
  return w;
}

}  // namespace

extern "C" {

const char* kbvqa_version(void) { return "1.0.0"; }

const char* kbvqa_last_error(void) { return g_last_error.c_str(); }

void kbvqa_free_string(char* s) { std::free(s); }

void kbvqa_set_log(kbvqa_log_fn fn, void* user) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  g_log_fn = fn;
  g_log_user = user;
}

kbvqa_status kbvqa_config_create(kbvqa_config** out) {
  return guard([&] {
    require(out, "out");
    *out = nullptr;
    auto cfg = std::make_unique<kbvqa_config>();
    config_from_json(cfg->doc);
    *out = cfg.release();
  });
}

kbvqa_status kbvqa_config_load(const char* path, kbvqa_config** out) {
  return guard([&] {
    require(out, "out");
    *out = nullptr;
    auto cfg = std::make_unique<kbvqa_config>();
    if (given(path)) cfg->doc = load_config_document(path);
    with_source(given(path) ? path : "defaults", [&] { return config_from_json(cfg->doc); });
    *out = cfg.release();
  });
}

kbvqa_status kbvqa_config_set(kbvqa_config* config, const char* key, const char* value) {
  return guard([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    json doc = config->doc;
    set_config_value(doc, key, value);
    config_from_json(doc);
    config->doc = std::move(doc);
  });
}

kbvqa_status kbvqa_config_dump(const kbvqa_config* config, char** out_json) {
  return guard([&] {
    require(out_json, "out_json");
    hand_out(out_json, config_to_json(resolve(config)).dump(2) + "\n");
  });
}

void kbvqa_config_free(kbvqa_config* config) { delete config; }

kbvqa_status kbvqa_gen_world(const kbvqa_config* config, const char* out_dir, char** summary) {
  return guard([&] {
    const RunConfig c = resolve(config);
    if (!given(out_dir)) throw Error(ErrorKind::kConfig, "an output directory is required");
    const World w = generate_world(c.world);
    const Lexicon lexicon = config_lexicon(c);
    const double recurrence = salient_recurrence(w, c.stats_threshold, lexicon);
    if (!w.corpus.questions().empty() && recurrence < 0.9) {
      log_line("warning: only " + fixed(100.0 * recurrence, 1) +
               "% of images repeat their main object more than stats.threshold=" +
               std::to_string(c.stats_threshold) +
               " times; raise world.questions_per_image or lower the threshold");
    }
    ensure_dir(out_dir);
    const fs::path root(out_dir);
    write_files_atomic({{root / "questions.jsonl", serialize_questions(w.corpus)},
                        {root / "scenes.jsonl", serialize_scene_graphs(w.scenes)},
                        {root / "answers.txt", serialize_answers(w.answers)},
                        {root / "split.json", serialize_split(w)}});
    hand_out(summary, "wrote " + std::to_string(w.corpus.questions().size()) + " questions over " +
                          std::to_string(w.scenes.size()) + " images (" +
                          std::to_string(w.answers.size()) + " answers) to " + out_dir);
  });
}

kbvqa_status kbvqa_build_kb(const kbvqa_config* config, const kbvqa_build_args* args,
                            char** summary) {
  return guard([&] {
    require(args, "args");
    const RunConfig c = resolve(config);
    if (!given(args->out)) throw Error(ErrorKind::kConfig, "an output path is required");
    const Lexicon lexicon = config_lexicon(c);
    if (args->mode == KBVQA_MODE_STATS) {
      if (!given(args->questions)) {
        throw Error(ErrorKind::kConfig, "stats mode needs a questions file");
      }
      const Corpus corpus = load_corpus(args->questions);
      const StatsKnowledgeBase kb = build_stats_kb(corpus, config_stats(c), lexicon);
      std::size_t nonempty = 0;
      for (const auto& [id, entries] : kb.per_image) nonempty += entries.empty() ? 0 : 1;
      write_file_atomic(args->out, serialize_stats_kb(kb));
      hand_out(summary, "stats KB: " + std::to_string(nonempty) + " of " +
                            std::to_string(kb.per_image.size()) +
                            " images keep at least one token; wrote " + args->out);
      return;
    }
    if (args->mode != KBVQA_MODE_GROUNDTRUTH && args->mode != KBVQA_MODE_DETECTED) {
      throw Error(ErrorKind::kConfig, "unknown feature mode");
    }
    if (args->phase != KBVQA_PHASE_TRAIN && args->phase != KBVQA_PHASE_TEST) {
      throw Error(ErrorKind::kConfig, "unknown phase");
    }
    if (!given(args->scenes)) {
      throw Error(ErrorKind::kConfig, "groundtruth and detected modes need a scenes file");
    }
    if (args->mode == KBVQA_MODE_DETECTED && !c.noise_seed) {
      throw Error(ErrorKind::kConfig, "detected mode needs an explicit noise seed (noise.seed)");
    }
    const SceneGraphMap scenes = load_scenes(args->scenes);
    const EmbeddingTable table = config_embeddings(c);
    KnowledgeSettings settings;
    settings.noise = config_noise(c);
    settings.region = c.region;
    const FeatureMode mode =
        args->mode == KBVQA_MODE_DETECTED ? FeatureMode::kDetected : FeatureMode::kGroundTruth;
    const Phase phase = args->phase == KBVQA_PHASE_TEST ? Phase::kTest : Phase::kTrain;
    KnowledgeMap km = build_knowledge(mode, phase, scenes, Corpus(), nullptr, lexicon, table,
                                      settings);
    std::vector<ImageKnowledge> images;
    for (auto& [id, img] : km) images.push_back(std::move(img));
    write_knowledge(args->out, images);
    hand_out(summary, std::string(feature_mode_name(mode)) + " knowledge (" + phase_name(phase) +
                          " phase) for " + std::to_string(images.size()) + " images; wrote " +
                          args->out);
  });
}

kbvqa_status kbvqa_train(const kbvqa_config* config, const kbvqa_data_args* data,
                         const char* checkpoint_out, char** summary) {
  return guard([&] {
    require(data, "data");
    const RunConfig c = resolve(config);
    if (!given(data->questions)) throw Error(ErrorKind::kConfig, "a questions file is required");
    if (!given(checkpoint_out)) throw Error(ErrorKind::kConfig, "a checkpoint path is required");
    const Corpus corpus = load_corpus(data->questions);
    const std::vector<std::string> ids = select_ids(corpus, *data, "train");
    const std::vector<std::string> answers =
        given(data->answers) ? load_answers(data->answers) : corpus_answers(corpus);
    const EmbeddingTable table = config_embeddings(c);
    const KnowledgeMap km = load_knowledge_input(*data, corpus, table, Phase::kTrain);
    const std::vector<StreamKind> kinds = present_kinds(km);
    if (kinds.empty()) {
      throw Error(ErrorKind::kConsistency, data_source(*data) + " provides no knowledge streams");
    }
    std::vector<Example> examples;
    try {
      examples = make_examples(corpus, ids, km, table, answers);
    } catch (const Error& e) {
      const std::string source = given(data->answers) ? data->answers : "the questions file";
      throw Error(e.kind(), std::string(e.what()) + " (questions " + data->questions +
                                ", answers from " + source + ")");
    }
    HyperParams hp = c.model;
    hp.word_dim = table.dim();
    hp.knowledge_dim = table.dim();
    FusionModel model = init_model(kinds, answers, hp, c.shared_encoder);
    const TrainResult result = train(model, examples, c.train, [](int epoch, double loss) {
      log_line("epoch " + std::to_string(epoch) + " loss " + fixed(loss, 6));
    });
    write_file_atomic(checkpoint_out, serialize_checkpoint(model, config_to_json(c)));
    std::string s = "trained on " + std::to_string(examples.size()) + " questions for " +
                    std::to_string(result.epoch_loss.size()) + " epochs";
    if (!result.epoch_loss.empty()) s += ", final loss " + fixed(result.epoch_loss.back(), 6);
    hand_out(summary, s + "; wrote " + checkpoint_out);
  });
}

kbvqa_status kbvqa_eval(const kbvqa_config* config, const kbvqa_data_args* data,
                        const char* checkpoint, const char* metrics_out, char** summary) {
  return guard([&] {
    require(data, "data");
    const RunConfig c = resolve(config);
    if (!given(data->questions)) throw Error(ErrorKind::kConfig, "a questions file is required");
    if (!given(checkpoint)) throw Error(ErrorKind::kConfig, "a checkpoint is required");
    const std::string ckpt_text = read_file(checkpoint);
    const FusionModel model =
        with_source(checkpoint, [&] { return parse_checkpoint(ckpt_text); });
    if (given(data->answers) && load_answers(data->answers) != model.answer_vocab) {
      throw Error(ErrorKind::kConsistency, std::string("answer vocabulary of ") + data->answers +
                                               " differs from that of checkpoint " + checkpoint);
    }
    const EmbeddingTable table = config_embeddings(c);
    if (table.dim() != model.hp.word_dim || table.dim() != model.hp.knowledge_dim) {
      throw Error(ErrorKind::kConsistency,
                  std::string("checkpoint ") + checkpoint + " expects dimension " +
                      std::to_string(model.hp.word_dim) +
                      " but the embedding table (embedding.dim) has dimension " +
                      std::to_string(table.dim()));
    }
    const Corpus corpus = load_corpus(data->questions);
    const std::vector<std::string> ids = select_ids(corpus, *data, "val");
    const KnowledgeMap km = load_knowledge_input(*data, corpus, table, Phase::kTest);
    bool overlap = false;
    for (StreamKind k : present_kinds(km)) {
      for (StreamKind m : model.kinds) overlap = overlap || k == m;
    }
    if (!overlap) {
      throw Error(ErrorKind::kConsistency, data_source(*data) +
                                               " provides none of the streams read by checkpoint " +
                                               checkpoint);
    }
    std::vector<Example> examples;
    try {
      examples = make_examples(corpus, ids, km, table, model.answer_vocab);
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(e.what()) + " (questions " + data->questions +
                                ", checkpoint " + checkpoint + ")");
    }
    const EvalResult r = evaluate(model, examples);
    if (given(metrics_out)) {
      json records = json::array();
      for (const EvalRecord& rec : r.records) {
        records.push_back(
            {{"question_id", rec.question_id}, {"predicted", rec.predicted}, {"gold", rec.gold}});
      }
      json metrics = {{"accuracy", r.accuracy},
                      {"correct", r.correct},
                      {"n", r.n},
                      {"records", std::move(records)}};
      write_file_atomic(metrics_out, metrics.dump(2) + "\n");
    }
    hand_out(summary, "accuracy " + fixed(r.accuracy, 4) + " (" + std::to_string(r.correct) +
                          "/" + std::to_string(r.n) + ")");
  });
}

kbvqa_status kbvqa_ablate(const kbvqa_config* config, const char* world_dir,
                          const char* out_dir, char** summary) {
  return guard([&] {
    const RunConfig c = resolve(config);
    if (!given(out_dir)) throw Error(ErrorKind::kConfig, "an output directory is required");
    ensure_dir(out_dir);
    const World w = given(world_dir) ? load_world(world_dir) : generate_world(c.world);
    const Lexicon lexicon = config_lexicon(c);
    const EmbeddingTable table = config_embeddings(c);
    const AblationReport report =
        run_ablation(w, lexicon, table, config_ablation(c), [](const std::string& line) {
          log_line(line);
        });
    const fs::path root(out_dir);
    write_files_atomic({{root / "report.json", report_to_json(report).dump(2) + "\n"},
                        {root / "report.md", report_markdown(report)}});
    std::string s;
    for (FeatureMode m : report.modes) {
      auto [mean, sd] = report.summary(m, "val");
      s += std::string(feature_mode_name(m)) + " val " + fixed(100.0 * mean, 2) + " +- " +
           fixed(100.0 * sd, 2) + "; ";
    }
    hand_out(summary, s + "wrote " + (root / "report.md").string());
  });
}

kbvqa_status kbvqa_inspect_kb(const char* kb_path, const char* image_id, char** listing) {
  return guard([&] {
    if (!given(kb_path)) throw Error(ErrorKind::kConfig, "a KB path is required");
    if (!given(image_id)) throw Error(ErrorKind::kConfig, "an image id is required");
    const std::string text = read_file(kb_path);
    const std::string first_line = text.substr(0, text.find('\n'));
    std::istringstream in(text);
    if (first_line.find("\"streams\"") != std::string::npos) {
      auto images = with_source(kb_path, [&] { return parse_knowledge(in); });
      hand_out(listing, inspect_knowledge(images, image_id));
    } else {
      auto kb = with_source(kb_path, [&] { return parse_stats_kb(in); });
      hand_out(listing, inspect_stats(kb, image_id));
    }
  });
}

}  // extern "C"

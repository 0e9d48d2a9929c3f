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

#include "harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "common.hpp"

namespace kbvqa {
namespace {

using nlohmann::json;

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
  return buf;
}

}  // namespace

std::vector<StreamKind> branch_kinds(FeatureMode mode, bool stats_with_region) {
  if (mode == FeatureMode::kStats) {
    if (stats_with_region) return {StreamKind::kStatsWord, StreamKind::kRegion};
    return {StreamKind::kStatsWord};
  }
  return {StreamKind::kRegion, StreamKind::kObjectLabel, StreamKind::kAttribute,
          StreamKind::kRelationship};
}

SceneVocabulary scene_vocabulary(const SceneGraphMap& scenes) {
  std::set<std::string> names, attributes;
  for (const auto& [id, graph] : scenes) {
    for (const SceneObject& o : graph.objects) {
      names.insert(o.name);
      attributes.insert(o.attributes.begin(), o.attributes.end());
    }
  }
  return {{names.begin(), names.end()}, {attributes.begin(), attributes.end()}};
}

KnowledgeMap build_knowledge(FeatureMode mode, Phase phase, const SceneGraphMap& scenes,
                             const Corpus& corpus, const StatsKnowledgeBase* kb,
                             const Lexicon& lexicon, const EmbeddingTable& table,
                             const KnowledgeSettings& settings) {
  KnowledgeMap out;
  if (mode == FeatureMode::kStats) {
    if (kb == nullptr) throw Error(ErrorKind::kContract, "stats mode needs a statistics KB");
    std::set<std::string> ids;
    for (const auto& [id, idx] : corpus.by_image()) ids.insert(id);
    for (const auto& [id, entries] : kb->per_image) ids.insert(id);
    for (const std::string& id : ids) {
      const SceneGraph* graph = nullptr;
      if (settings.stats_with_region) {
        auto it = scenes.find(id);
        if (it != scenes.end()) graph = &it->second;
      }
      out.emplace(id, assemble_stats(*kb, id, table, phase, graph, &lexicon, settings.region));
    }
    return out;
  }
  SceneVocabulary vocab;
  if (mode == FeatureMode::kDetected) {
    vocab = scene_vocabulary(scenes);
    if (vocab.names.empty()) vocab.names.push_back("object");
  }
  for (const auto& [id, graph] : scenes) {
    if (mode == FeatureMode::kGroundTruth) {
      out.emplace(id, assemble_groundtruth(graph, lexicon, table, phase, settings.region));
    } else {
      out.emplace(id, assemble_detected(graph, settings.noise, lexicon, table, phase,
                                        vocab.names, vocab.attributes, settings.region));
    }
  }
  return out;
}

Eigen::MatrixXd embed_question(const std::string& text, const EmbeddingTable& table) {
  const std::vector<std::string> tokens = tokenize(text);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(tokens.size()), table.dim());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (const Eigen::VectorXd* v = table.find(tokens[i])) {
      m.row(static_cast<Eigen::Index>(i)) = v->transpose();
    }
  }
  return m;
}

std::vector<Example> make_examples(const Corpus& corpus, const std::vector<std::string>& ids,
                                   const KnowledgeMap& knowledge, const EmbeddingTable& table,
                                   const std::vector<std::string>& answers) {
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < corpus.questions().size(); ++i) {
    by_id.emplace(corpus.questions()[i].question_id, i);
  }
  std::map<std::string, std::size_t> answer_index;
  for (std::size_t i = 0; i < answers.size(); ++i) answer_index.emplace(answers[i], i);

  std::vector<Example> out;
  out.reserve(ids.size());
  for (const std::string& id : ids) {
    auto q = by_id.find(id);
    if (q == by_id.end()) throw Error(ErrorKind::kNotFound, "question '" + id + "' not found");
    const QuestionRecord& rec = corpus.questions()[q->second];
    auto a = answer_index.find(rec.answer);
    if (a == answer_index.end()) {
      throw Error(ErrorKind::kConsistency, "answer '" + rec.answer + "' of question '" + id +
                                               "' is not in the answer vocabulary");
    }
    Example ex;
    ex.question_id = id;
    ex.answer = a->second;
    ex.tokens = embed_question(rec.text, table);
    if (auto k = knowledge.find(rec.image_id); k != knowledge.end()) {
      for (const KnowledgeStream& s : k->second.streams) {
        if (s.vectors.rows() > 0 && s.vectors.cols() != table.dim()) {
          throw Error(ErrorKind::kConsistency,
                      "knowledge for image '" + rec.image_id + "' has dimension " +
                          std::to_string(s.vectors.cols()) + " but the embedding table has " +
                          std::to_string(table.dim()));
        }
      }
      ex.knowledge = &k->second;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

EvalResult evaluate(const FusionModel& model, const std::vector<Example>& examples) {
  if (examples.empty()) throw Error(ErrorKind::kContract, "evaluate needs at least one example");
  EvalResult result;
  result.n = examples.size();
  result.records.reserve(examples.size());
  for (const Example& ex : examples) {
    const std::size_t guess = predict(forward(model, ex));
    if (guess == ex.answer) ++result.correct;
    result.records.push_back(
        {ex.question_id, model.answer_vocab[guess], model.answer_vocab[ex.answer]});
  }
  result.accuracy = static_cast<double>(result.correct) / static_cast<double>(result.n);
  return result;
}

std::pair<double, double> AblationReport::summary(FeatureMode mode,
                                                  const std::string& split) const {
  std::vector<double> acc;
  for (const AblationRow& r : rows) {
    if (r.mode == mode && r.split == split) acc.push_back(r.accuracy);
  }
  if (acc.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double a : acc) mean += a;
  mean /= static_cast<double>(acc.size());
  double var = 0.0;
  for (double a : acc) var += (a - mean) * (a - mean);
  const double sd = acc.size() > 1 ? std::sqrt(var / static_cast<double>(acc.size() - 1)) : 0.0;
  return {mean, sd};
}

AblationReport run_ablation(const World& world, const Lexicon& lexicon,
                            const EmbeddingTable& table, const AblationSettings& settings,
                            const ProgressFn& progress) {
  if (settings.modes.empty() || settings.seeds.empty()) {
    throw Error(ErrorKind::kConfig, "ablation needs at least one mode and one seed");
  }
  if (world.train_ids.empty() || world.val_ids.empty()) {
    throw Error(ErrorKind::kConfig, "ablation needs nonempty train and val splits");
  }
  validate(settings.train);
  StatsKnowledgeBase kb = build_stats_kb(world.corpus, settings.knowledge.stats, lexicon);

  struct ModeData {
    KnowledgeMap train_kn, test_kn;
    std::vector<Example> train, val;
  };
  std::vector<ModeData> data(settings.modes.size());
  for (std::size_t m = 0; m < settings.modes.size(); ++m) {
    ModeData& d = data[m];
    d.train_kn = build_knowledge(settings.modes[m], Phase::kTrain, world.scenes, world.corpus,
                                 &kb, lexicon, table, settings.knowledge);
    d.test_kn = build_knowledge(settings.modes[m], Phase::kTest, world.scenes, world.corpus, &kb,
                                lexicon, table, settings.knowledge);
    d.train = make_examples(world.corpus, world.train_ids, d.train_kn, table, world.answers);
    d.val = make_examples(world.corpus, world.val_ids, d.test_kn, table, world.answers);
  }

  struct Job {
    std::size_t mode;
    std::size_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t m = 0; m < settings.modes.size(); ++m) {
    for (std::size_t s = 0; s < settings.seeds.size(); ++s) jobs.push_back({m, s});
  }
  std::vector<std::array<AblationRow, 2>> results(jobs.size());
  std::mutex log_mutex;
  auto log = [&](const std::string& line) {
    if (!progress) return;
    std::lock_guard<std::mutex> lock(log_mutex);
    progress(line);
  };

  auto run_job = [&](std::size_t j) {
    const Job& job = jobs[j];
    const FeatureMode mode = settings.modes[job.mode];
    const std::uint64_t seed = settings.seeds[job.seed];
    HyperParams hp = settings.hp;
    hp.seed = seed;
    hp.word_dim = table.dim();
    hp.knowledge_dim = table.dim();
    TrainConfig tc = settings.train;
    tc.seed = seed;
    FusionModel model = init_model(branch_kinds(mode, settings.knowledge.stats_with_region),
                                   world.answers, hp, settings.shared_encoder);
    const std::string tag = std::string(feature_mode_name(mode)) + " seed " +
                            std::to_string(seed);
    train(model, data[job.mode].train, tc, [&](int epoch, double mean_loss) {
      log(tag + " epoch " + std::to_string(epoch) + " loss " + format_double(mean_loss));
    });
    const EvalResult tr = evaluate(model, data[job.mode].train);
    const EvalResult va = evaluate(model, data[job.mode].val);
    results[j][0] = {mode, seed, "train", tr.correct, tr.n, tr.accuracy};
    results[j][1] = {mode, seed, "val", va.correct, va.n, va.accuracy};
    log(tag + " val accuracy " + percent(va.accuracy));
  };

  const std::size_t workers =
      std::min<std::size_t>(jobs.size(), static_cast<std::size_t>(std::max(1, settings.jobs)));
  if (workers <= 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) run_job(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t j = next++; j < jobs.size(); j = next++) run_job(j);
        } catch (...) {
          errors[w] = std::current_exception();
          next = jobs.size();
        }
      });
    }
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  AblationReport report;
  report.modes = settings.modes;
  report.seeds = settings.seeds;
  for (const auto& pair : results) {
    report.rows.push_back(pair[0]);
    report.rows.push_back(pair[1]);
  }
  return report;
}

json report_to_json(const AblationReport& report) {
  json rows = json::array();
  for (const AblationRow& r : report.rows) {
    rows.push_back({{"mode", feature_mode_name(r.mode)},
                    {"seed", r.seed},
                    {"split", r.split},
                    {"accuracy", r.accuracy},
                    {"correct", r.correct},
                    {"n", r.n}});
  }
  json summary = json::array();
  for (FeatureMode m : report.modes) {
    for (const char* split : {"train", "val"}) {
      auto [mean, sd] = report.summary(m, split);
      summary.push_back(
          {{"mode", feature_mode_name(m)}, {"split", split}, {"mean", mean}, {"stdev", sd}});
    }
  }
  std::vector<std::string> modes;
  for (FeatureMode m : report.modes) modes.emplace_back(feature_mode_name(m));
  return {{"modes", modes}, {"seeds", report.seeds}, {"rows", rows}, {"summary", summary}};
}

AblationReport report_from_json(const json& j) {
  try {
    AblationReport report;
    for (const json& m : j.at("modes")) report.modes.push_back(parse_feature_mode(m.get<std::string>()));
    report.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    for (const json& r : j.at("rows")) {
      report.rows.push_back({parse_feature_mode(r.at("mode").get<std::string>()),
                             r.at("seed").get<std::uint64_t>(), r.at("split").get<std::string>(),
                             r.at("correct").get<std::size_t>(), r.at("n").get<std::size_t>(),
                             r.at("accuracy").get<double>()});
    }
    return report;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kCorrupt, std::string("report: ") + e.what());
  }
}

std::string report_markdown(const AblationReport& report) {
  std::string seeds;
  for (std::uint64_t s : report.seeds) seeds += (seeds.empty() ? "" : ", ") + std::to_string(s);
  std::string out = "# Ablation: knowledge source\n\nSeeds: " + seeds + "\n\n";
  out += "| Features | Train Acc. | Val Acc. |\n|---|---|---|\n";
  for (FeatureMode m : report.modes) {
    auto [tm, ts] = report.summary(m, "train");
    auto [vm, vs] = report.summary(m, "val");
    out += "| " + std::string(feature_mode_name(m)) + " | " + percent(tm) + " ± " + percent(ts) +
           " | " + percent(vm) + " ± " + percent(vs) + " |\n";
  }
  out += "\n| Features | Seed | Split | Correct | N | Acc. |\n|---|---|---|---|---|---|\n";
  for (const AblationRow& r : report.rows) {
    out += "| " + std::string(feature_mode_name(r.mode)) + " | " + std::to_string(r.seed) +
           " | " + r.split + " | " + std::to_string(r.correct) + " | " + std::to_string(r.n) +
           " | " + percent(r.accuracy) + " |\n";
  }
  return out;
}

}  // namespace kbvqa

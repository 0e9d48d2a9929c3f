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

// Command-line front end. Talks to the library only through kbvqa.h.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kbvqa/kbvqa.h"

namespace {

using nlohmann::json;

// A flag that overrides one config key when given on the command line.
struct Binding {
  CLI::Option* option = nullptr;
  std::string key;
  std::string value;
  bool quote = false;  // pass as a JSON string
  bool list = false;   // comma-separated list of integers
};

struct Command {
  CLI::App* app = nullptr;
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::unique_ptr<Binding>> bindings;
};

class Defaults {
 public:
  Defaults() {
    kbvqa_config* c = nullptr;
    char* text = nullptr;
    if (kbvqa_config_create(&c) == KBVQA_OK && kbvqa_config_dump(c, &text) == KBVQA_OK) {
      doc_ = json::parse(text);
    }
    kbvqa_free_string(text);
    kbvqa_config_free(c);
  }

  std::string of(const std::string& dotted) const {
    const json* node = &doc_;
    std::size_t start = 0;
    while (node->is_object()) {
      const std::size_t dot = dotted.find('.', start);
      auto it = node->find(dotted.substr(start, dot - start));
      if (it == node->end()) return "";
      node = &*it;
      if (dot == std::string::npos) return node->is_string() ? node->get<std::string>() : node->dump();
      start = dot + 1;
    }
    return "";
  }

 private:
  json doc_ = json::object();
};

void bind(Command& cmd, const Defaults& defaults, const std::string& flag, const std::string& key,
          const std::string& help, bool quote = false, bool list = false) {
  auto b = std::make_unique<Binding>();
  b->key = key;
  b->quote = quote;
  b->list = list;
  b->option = cmd.app->add_option(flag, b->value, help + " [config " + key + "]")
                  ->default_str(defaults.of(key));
  cmd.bindings.push_back(std::move(b));
}

Command& add_command(std::vector<std::unique_ptr<Command>>& commands, CLI::App& app,
                     const std::string& name, const std::string& description) {
  auto cmd = std::make_unique<Command>();
  cmd->app = app.add_subcommand(name, description);
  cmd->app->add_option("--config", cmd->config_path, "Run configuration (JSON)");
  cmd->app->add_option("--set", cmd->sets, "Override a config key: KEY=JSON_VALUE (repeatable)");
  commands.push_back(std::move(cmd));
  return *commands.back();
}

int fail(kbvqa_status status) {
  std::cerr << "error: " << kbvqa_last_error() << "\n";
  return static_cast<int>(status);
}

std::string as_json_list(const std::string& csv) {
  std::string out = "[";
  std::size_t start = 0;
  while (start <= csv.size()) {
    std::size_t comma = csv.find(',', start);
    if (comma == std::string::npos) comma = csv.size();
    if (out.size() > 1) out += ",";
    out += csv.substr(start, comma - start);
    start = comma + 1;
  }
  return out + "]";
}

// Config file, then --set pairs, then dedicated flags.
int load_config(const Command& cmd, kbvqa_config** out) {
  kbvqa_status s = kbvqa_config_load(cmd.config_path.c_str(), out);
  if (s != KBVQA_OK) return fail(s);
  for (const std::string& kv : cmd.sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "error: --set expects KEY=VALUE, got '" << kv << "'\n";
      return KBVQA_ERR_USAGE;
    }
    s = kbvqa_config_set(*out, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (s != KBVQA_OK) return fail(s);
  }
  for (const auto& b : cmd.bindings) {
    if (b->option->count() == 0) continue;
    std::string value = b->value;
    if (b->quote) value = json(value).dump();
    if (b->list) value = as_json_list(value);
    s = kbvqa_config_set(*out, b->key.c_str(), value.c_str());
    if (s != KBVQA_OK) return fail(s);
  }
  return KBVQA_OK;
}

int finish(kbvqa_status status, char* summary) {
  if (status != KBVQA_OK) return fail(status);
  if (summary != nullptr) std::cout << summary << "\n";
  kbvqa_free_string(summary);
  return 0;
}

void log_to_stderr(const char* line, void*) { std::cerr << line << "\n"; }

const char* or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-base visual question answering toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kbvqa_version()));
  Defaults defaults;
  std::vector<std::unique_ptr<Command>> commands;

  Command& gen = add_command(commands, app, "gen-world", "Generate a synthetic world");
  std::string gen_out;
  gen.app->add_option("--out", gen_out, "Output directory")->required();
  bind(gen, defaults, "--n-images", "world.n_images", "Number of images");
  bind(gen, defaults, "--questions-per-image", "world.questions_per_image",
       "Questions generated per image");
  bind(gen, defaults, "--seed", "world.seed", "World seed");

  Command& build = add_command(commands, app, "build-kb", "Build a knowledge base");
  std::string mode, phase = "train", b_questions, b_scenes, b_out, noise_seed;
  build.app->add_option("--mode", mode, "Feature mode")
      ->required()
      ->check(CLI::IsMember({"stats", "groundtruth", "detected"}));
  build.app->add_option("--phase", phase, "train or test (test adds hypernyms)")
      ->check(CLI::IsMember({"train", "test"}))
      ->capture_default_str();
  build.app->add_option("--questions", b_questions, "questions.jsonl (stats mode)");
  build.app->add_option("--scenes", b_scenes, "scenes.jsonl (groundtruth and detected modes)");
  build.app->add_option("--out", b_out, "Output file")->required();
  build.app->add_option("--noise-seed", noise_seed,
                        "Detection noise seed; required in detected mode [config noise.seed]");
  bind(build, defaults, "--threshold", "stats.threshold", "Keep tokens counted more often");
  bind(build, defaults, "--p-drop", "noise.p_drop", "Detection drop probability");
  bind(build, defaults, "--p-swap", "noise.p_swap", "Detection swap probability");

  struct DataFlags {
    std::string questions, knowledge, stats_kb, split, answers, subset;
  };
  auto add_data_flags = [](Command& cmd, DataFlags& f, const char* default_subset) {
    cmd.app->add_option("--questions", f.questions, "questions.jsonl")->required();
    auto* k = cmd.app->add_option("--knowledge", f.knowledge, "knowledge.jsonl");
    auto* s = cmd.app->add_option("--stats-kb", f.stats_kb, "stats_kb.jsonl");
    k->excludes(s);
    cmd.app->add_option("--split", f.split, "split.json");
    cmd.app->add_option("--answers", f.answers, "answers.txt");
    cmd.app->add_option("--subset", f.subset,
                        std::string("Questions to use with --split: train, val or all"))
        ->check(CLI::IsMember({"train", "val", "all"}))
        ->default_str(default_subset);
  };

  Command& trn = add_command(commands, app, "train", "Train a fused model");
  DataFlags train_data;
  std::string ckpt_out;
  add_data_flags(trn, train_data, "train");
  trn.app->add_option("--out", ckpt_out, "Checkpoint path")->required();
  bind(trn, defaults, "--epochs", "train.epochs", "Training epochs");
  bind(trn, defaults, "--lr", "train.learning_rate", "Learning rate");
  bind(trn, defaults, "--batch-size", "train.batch_size", "Mini-batch size");
  bind(trn, defaults, "--seed", "train.seed", "Data-order seed");
  bind(trn, defaults, "--model-seed", "model.seed", "Initialization seed");
  bind(trn, defaults, "-d,--dim", "model.d", "Hidden size");
  bind(trn, defaults, "-p,--steps", "model.p", "Reasoning steps");

  Command& ev = add_command(commands, app, "eval", "Evaluate a checkpoint");
  DataFlags eval_data;
  std::string ckpt_in, metrics_out;
  add_data_flags(ev, eval_data, "val");
  ev.app->add_option("--checkpoint", ckpt_in, "Checkpoint to evaluate")->required();
  ev.app->add_option("--out", metrics_out, "Metrics JSON with per-question records");

  Command& abl = add_command(commands, app, "ablate", "Run the knowledge-source ablation");
  std::string world_dir, abl_out;
  abl.app->add_option("--world", world_dir, "World directory (default: generate from config)");
  abl.app->add_option("--out", abl_out, "Report directory")->required();
  bind(abl, defaults, "--seeds", "ablation.seeds", "Comma-separated run seeds", false, true);
  bind(abl, defaults, "--epochs", "train.epochs", "Training epochs");
  bind(abl, defaults, "--jobs", "jobs", "Parallel (mode, seed) runs");

  Command& insp = add_command(commands, app, "inspect-kb", "List the facts of one image");
  std::string kb_path, image_id;
  insp.app->add_option("kb", kb_path, "stats_kb.jsonl or knowledge.jsonl")->required();
  insp.app->add_option("image", image_id, "Image id")->required();

  Command& cfg = add_command(commands, app, "config", "Print the resolved configuration");
  bool dump_defaults = false;
  cfg.app->add_flag("--dump-defaults", dump_defaults, "Print the built-in defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : KBVQA_ERR_USAGE;
  }

  kbvqa_set_log(log_to_stderr, nullptr);
  Command* active = nullptr;
  for (auto& c : commands) {
    if (c->app->parsed()) active = c.get();
  }
  kbvqa_config* config = nullptr;
  if (active != &insp) {
    if (active == &cfg && dump_defaults) {
      const kbvqa_status s = kbvqa_config_create(&config);
      if (s != KBVQA_OK) return fail(s);
    } else if (int rc = load_config(*active, &config); rc != 0) {
      kbvqa_config_free(config);
      return rc;
    }
  }
  std::unique_ptr<kbvqa_config, void (*)(kbvqa_config*)> holder(config, kbvqa_config_free);

  char* summary = nullptr;
  kbvqa_status status = KBVQA_OK;
  if (active == &gen) {
    status = kbvqa_gen_world(config, gen_out.c_str(), &summary);
  } else if (active == &build) {
    if (!noise_seed.empty()) {
      status = kbvqa_config_set(config, "noise.seed", noise_seed.c_str());
      if (status != KBVQA_OK) return fail(status);
    }
    kbvqa_build_args args{};
    args.mode = mode == "stats"         ? KBVQA_MODE_STATS
                : mode == "groundtruth" ? KBVQA_MODE_GROUNDTRUTH
                                        : KBVQA_MODE_DETECTED;
    args.phase = phase == "test" ? KBVQA_PHASE_TEST : KBVQA_PHASE_TRAIN;
    if (args.mode == KBVQA_MODE_DETECTED && noise_seed.empty()) {
      std::cerr << "error: detected mode requires --noise-seed\n";
      return KBVQA_ERR_USAGE;
    }
    args.questions = or_null(b_questions);
    args.scenes = or_null(b_scenes);
    args.out = b_out.c_str();
    status = kbvqa_build_kb(config, &args, &summary);
  } else if (active == &trn || active == &ev) {
    const DataFlags& f = active == &trn ? train_data : eval_data;
    kbvqa_data_args data{};
    data.questions = or_null(f.questions);
    data.knowledge = or_null(f.knowledge);
    data.stats_kb = or_null(f.stats_kb);
    data.split = or_null(f.split);
    data.answers = or_null(f.answers);
    data.subset = or_null(f.subset);
    status = active == &trn
                 ? kbvqa_train(config, &data, ckpt_out.c_str(), &summary)
                 : kbvqa_eval(config, &data, ckpt_in.c_str(), or_null(metrics_out), &summary);
  } else if (active == &abl) {
    status = kbvqa_ablate(config, or_null(world_dir), abl_out.c_str(), &summary);
  } else if (active == &insp) {
    status = kbvqa_inspect_kb(kb_path.c_str(), image_id.c_str(), &summary);
    if (status == KBVQA_OK) {
      std::cout << summary;
      kbvqa_free_string(summary);
      return 0;
    }
  } else if (active == &cfg) {
    status = kbvqa_config_dump(config, &summary);
    if (status == KBVQA_OK) {
      std::cout << summary;
      kbvqa_free_string(summary);
      return 0;
    }
  }
  return finish(status, summary);
}

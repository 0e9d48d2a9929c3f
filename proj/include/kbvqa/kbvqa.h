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

/* C interface to the kbvqa library.
 *
 * Every function returns a kbvqa_status. On failure a description of the
 * most recent error on the calling thread is available from
 * kbvqa_last_error(). Strings handed out through `char**` parameters are
 * owned by the caller and released with kbvqa_free_string().
 */
#ifndef KBVQA_KBVQA_H_
#define KBVQA_KBVQA_H_

#include <stddef.h>
#include <stdint.h>

#if defined(KBVQA_BUILDING)
#define KBVQA_API __attribute__((visibility("default")))
#else
#define KBVQA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as process exit codes for the command-line tool. */
typedef enum kbvqa_status {
  KBVQA_OK = 0,
  KBVQA_ERR_INTERNAL = 1,
  KBVQA_ERR_USAGE = 2,       /* bad arguments or configuration */
  KBVQA_ERR_IO = 3,          /* unreadable input, unwritable output */
  KBVQA_ERR_CONSISTENCY = 4, /* inputs disagree (vocabulary, dimension) */
  KBVQA_ERR_NOT_FOUND = 5,
  KBVQA_ERR_CORRUPT = 6      /* malformed data file */
} kbvqa_status;

typedef enum kbvqa_mode {
  KBVQA_MODE_GROUNDTRUTH = 0,
  KBVQA_MODE_STATS = 1,
  KBVQA_MODE_DETECTED = 2
} kbvqa_mode;

typedef enum kbvqa_phase { KBVQA_PHASE_TRAIN = 0, KBVQA_PHASE_TEST = 1 } kbvqa_phase;

KBVQA_API const char* kbvqa_version(void);
KBVQA_API const char* kbvqa_last_error(void);
KBVQA_API void kbvqa_free_string(char* s);

/* Progress lines (epoch losses, warnings). Pass NULL to silence. */
typedef void (*kbvqa_log_fn)(const char* line, void* user);
KBVQA_API void kbvqa_set_log(kbvqa_log_fn fn, void* user);

/* Run configuration: one JSON document with a section per module. */
typedef struct kbvqa_config kbvqa_config;

/* Built-in defaults; the top-level seed comes from KBVQA_SEED when set. */
KBVQA_API kbvqa_status kbvqa_config_create(kbvqa_config** out);
/* Defaults overlaid with the file at `path` (NULL or "" for none). */
KBVQA_API kbvqa_status kbvqa_config_load(const char* path, kbvqa_config** out);
/* `key` is dotted ("train.epochs"); `value` is JSON, or a bare string. */
KBVQA_API kbvqa_status kbvqa_config_set(kbvqa_config* config, const char* key,
                                        const char* value);
/* Fully resolved configuration as pretty-printed JSON. */
KBVQA_API kbvqa_status kbvqa_config_dump(const kbvqa_config* config, char** out_json);
KBVQA_API void kbvqa_config_free(kbvqa_config* config);

/* Writes questions.jsonl, scenes.jsonl, answers.txt and split.json into
 * `out_dir`. Either all four files appear or none do. */
KBVQA_API kbvqa_status kbvqa_gen_world(const kbvqa_config* config, const char* out_dir,
                                       char** summary);

/* Stats mode reads `questions` and writes stats_kb.jsonl; the other modes
 * read `scenes` and write knowledge.jsonl. Detected mode requires the
 * config's noise.seed to be set. */
typedef struct kbvqa_build_args {
  kbvqa_mode mode;
  kbvqa_phase phase;
  const char* questions;
  const char* scenes;
  const char* out;
} kbvqa_build_args;
KBVQA_API kbvqa_status kbvqa_build_kb(const kbvqa_config* config, const kbvqa_build_args* args,
                                      char** summary);

/* Inputs shared by training and evaluation. Exactly one of `knowledge`
 * (knowledge.jsonl) and `stats_kb` (stats_kb.jsonl) must be set. `split`,
 * `answers` and `subset` ("train", "val" or "all") are optional. */
typedef struct kbvqa_data_args {
  const char* questions;
  const char* knowledge;
  const char* stats_kb;
  const char* split;
  const char* answers;
  const char* subset;
} kbvqa_data_args;

KBVQA_API kbvqa_status kbvqa_train(const kbvqa_config* config, const kbvqa_data_args* data,
                                   const char* checkpoint_out, char** summary);
/* `metrics_out` (optional) receives accuracy and per-question records. */
KBVQA_API kbvqa_status kbvqa_eval(const kbvqa_config* config, const kbvqa_data_args* data,
                                  const char* checkpoint, const char* metrics_out,
                                  char** summary);

/* Runs every (mode, seed) of the config's ablation on the world stored in
 * `world_dir`, or on a freshly generated one when it is NULL. Writes
 * report.json and report.md into `out_dir`. */
KBVQA_API kbvqa_status kbvqa_ablate(const kbvqa_config* config, const char* world_dir,
                                    const char* out_dir, char** summary);

/* Human-readable facts of one image from a stats_kb.jsonl or knowledge.jsonl
 * file. */
KBVQA_API kbvqa_status kbvqa_inspect_kb(const char* kb_path, const char* image_id,
                                        char** listing);

#ifdef __cplusplus
}
#endif

#endif /* KBVQA_KBVQA_H_ */

// Copyright 2026 The safelab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

/* C interface to safelab. Objects are opaque handles owned by the caller and
 * released with the matching *_free function. Every fallible call returns a
 * safelab_status; on failure safelab_last_error() describes the problem for
 * the calling thread. Strings returned through char** are released with
 * safelab_string_free. */

#ifndef SAFELAB_H
#define SAFELAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SAFELAB_API __declspec(dllexport)
#else
#define SAFELAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum safelab_status {
  SAFELAB_OK = 0,
  SAFELAB_INVALID_INPUT = 1,
  SAFELAB_NUMERICAL_FAILURE = 2,
  SAFELAB_GENERATION_FAILURE = 3,
  SAFELAB_INVALID_STATE = 4,
  SAFELAB_DATA_INTEGRITY = 5,
  SAFELAB_SEPARATION = 6,
  SAFELAB_COLLINEARITY = 7,
  SAFELAB_NOT_FOUND = 8,
  SAFELAB_CONFLICT = 9,
  SAFELAB_IO = 10,
  SAFELAB_INTERNAL = 99
} safelab_status;

SAFELAB_API const char* safelab_version(void);
SAFELAB_API const char* safelab_status_name(safelab_status status);
/* Message of the last failed call on this thread; "" after success. */
SAFELAB_API const char* safelab_last_error(void);
SAFELAB_API void safelab_string_free(char* s);

/* ---- task configuration ---- */

typedef struct safelab_config safelab_config;

SAFELAB_API safelab_status safelab_config_default(int experiment, safelab_config** out);
/* Flat "key = value" file; unknown keys are rejected. */
SAFELAB_API safelab_status safelab_config_load(const char* path, safelab_config** out);
SAFELAB_API int safelab_config_experiment(const safelab_config* config);
SAFELAB_API size_t safelab_config_grid_size(const safelab_config* config);
SAFELAB_API void safelab_config_free(safelab_config* config);

/* ---- GP model over the configuration's grid ---- */

typedef struct safelab_model safelab_model;

SAFELAB_API safelab_status safelab_model_create(const safelab_config* config, double noise_var,
                                                safelab_model** out);
SAFELAB_API safelab_status safelab_model_observe(safelab_model* model, size_t index, double y);
/* Writes n = grid size entries to each non-null array. */
SAFELAB_API safelab_status safelab_model_posterior(const safelab_model* model, double* mean, double* sd,
                                                   size_t n);
/* Set features as a JSON object with per-point arrays. expand_samples = 0
 * skips p_expand. */
SAFELAB_API safelab_status safelab_model_features(const safelab_model* model, double j_min, double beta,
                                                  int expand_samples, uint64_t seed, char** json_out);
SAFELAB_API void safelab_model_free(safelab_model* model);

/* ---- simulation campaigns ---- */

typedef struct safelab_simulate_options {
  const char* agents;  /* comma-separated: safeopt, tree1, tree2, random */
  int runs;
  uint64_t seed;
  double beta;         /* <= 0 keeps each agent's default */
  int expand_samples;
  int record_features; /* 0 writes records without feature snapshots */
  int threads;         /* 0 = hardware concurrency */
} safelab_simulate_options;

SAFELAB_API void safelab_simulate_options_init(safelab_simulate_options* options);
/* Writes records.jsonl, summary.csv and summary.txt into out_dir (created
 * when missing). summary_text may be null. */
SAFELAB_API safelab_status safelab_simulate(const safelab_config* config, const safelab_simulate_options* options,
                                            const char* out_dir, char** summary_text);

/* ---- analyses ---- */

typedef struct safelab_analyze_options {
  const char* analysis; /* logistic, tree, distance or all */
  int subject_dummies;
  int tree_depth;       /* 1 or 2 */
} safelab_analyze_options;

SAFELAB_API void safelab_analyze_options_init(safelab_analyze_options* options);
/* config may be null: the grid is then taken from the records' experiment.
 * Writes <analysis>.csv and report.txt into out_dir when it is non-null. */
SAFELAB_API safelab_status safelab_analyze(const char* records_path, const safelab_config* config,
                                           const safelab_analyze_options* options, const char* out_dir,
                                           char** report_text);

/* ---- session server ---- */

typedef struct safelab_server safelab_server;

typedef struct safelab_server_options {
  const char* log_path;         /* null or "" disables persistence */
  const char* static_dir;       /* null or "" serves no static files */
  const safelab_config* config; /* null = defaults; otherwise used for its experiment */
  uint64_t seed;
  int expand_samples;
} safelab_server_options;

SAFELAB_API void safelab_server_options_init(safelab_server_options* options);
SAFELAB_API safelab_status safelab_server_create(const safelab_server_options* options, safelab_server** out);
/* port 0 picks a free port; bound_port may be null. */
SAFELAB_API safelab_status safelab_server_bind(safelab_server* server, const char* host, int port,
                                               int* bound_port);
/* Blocks until safelab_server_stop is called from another thread. */
SAFELAB_API safelab_status safelab_server_run(safelab_server* server);
SAFELAB_API void safelab_server_stop(safelab_server* server);
SAFELAB_API void safelab_server_free(safelab_server* server);

#ifdef __cplusplus
}
#endif

#endif /* SAFELAB_H */

// Copyright 2026 The plantune Authors.
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

/* C interface to the plantune tuner. Every function returns a pt_status;
 * on failure pt_last_error() describes the most recent error on the calling
 * thread. Sessions are opaque and must be released with pt_session_close. */

#ifndef PLANTUNE_PLANTUNE_H_
#define PLANTUNE_PLANTUNE_H_

#include <stdint.h>

#if defined(_WIN32)
#define PT_API __declspec(dllexport)
#else
#define PT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as the CLI's process exit codes. */
typedef enum pt_status {
  PT_OK = 0,
  PT_ERR_INTERNAL = 1,
  PT_ERR_USAGE = 2,
  PT_ERR_CONFIG = 3,
  PT_ERR_IO = 4,
  PT_ERR_ENGINE = 5,
  PT_ERR_NUMERIC = 6,
  PT_ERR_LOOKUP = 7,
  PT_ERR_DIMENSION = 8
} pt_status;

typedef enum pt_log_level {
  PT_LOG_DEBUG = 0,
  PT_LOG_INFO = 1,
  PT_LOG_WARN = 2,
  PT_LOG_ERROR = 3,
  PT_LOG_OFF = 4
} pt_log_level;

typedef struct pt_session pt_session;

PT_API const char* pt_version(void);
PT_API const char* pt_status_name(pt_status status);
PT_API const char* pt_last_error(void);
PT_API pt_status pt_set_log_level(pt_log_level level);

PT_API pt_status pt_session_open(const char* config_path, pt_session** out);
PT_API void pt_session_close(pt_session* session);

PT_API pt_status pt_session_set_seed(pt_session* session, uint64_t seed);
PT_API pt_status pt_session_set_output_dir(pt_session* session, const char* dir);
/* Comma-separated query ids; NULL or "all" selects every scenario query. */
PT_API pt_status pt_session_set_queries(pt_session* session, const char* queries);
PT_API pt_status pt_session_set_budget_evaluations(pt_session* session, uint64_t evaluations);

PT_API pt_status pt_session_tune(pt_session* session);
/* out_path may be NULL to write warmstart.jsonl / correlation.json into the
 * output directory. */
PT_API pt_status pt_session_warmstart(pt_session* session, const char* out_path);
PT_API pt_status pt_session_correlate(pt_session* session, const char* out_path);

/* JSON summary of the last successful command; owned by the session. */
PT_API const char* pt_session_summary(const pt_session* session);

/* predictions_path and out_dir may be NULL. The summary is written to a
 * thread-local buffer that stays valid until the next call on this thread. */
PT_API pt_status pt_report(const char* history_path, const char* predictions_path, const char* out_dir,
                           const char** summary_json);

#ifdef __cplusplus
}
#endif

#endif /* PLANTUNE_PLANTUNE_H_ */

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

#include "plantune/plantune.h"

#include <exception>
#include <memory>
#include <new>
#include <string>

#include "plantune/error.hpp"
#include "plantune/log.hpp"
#include "plantune/session.hpp"

struct pt_session {
  std::unique_ptr<plantune::Session> impl;
  std::string summary;
};

namespace {

thread_local std::string g_last_error;
thread_local std::string g_report_summary;

pt_status StatusOf(plantune::ErrorKind kind) {
  using plantune::ErrorKind;
  switch (kind) {
    case ErrorKind::kDimension: return PT_ERR_DIMENSION;
    case ErrorKind::kNumeric: return PT_ERR_NUMERIC;
    case ErrorKind::kUsage: return PT_ERR_USAGE;
    case ErrorKind::kConfig: return PT_ERR_CONFIG;
    case ErrorKind::kIo: return PT_ERR_IO;
    case ErrorKind::kLookup: return PT_ERR_LOOKUP;
    case ErrorKind::kEngine: return PT_ERR_ENGINE;
  }
  return PT_ERR_INTERNAL;
}

template <typename F>
pt_status Guard(F&& body) {
  try {
    body();
    g_last_error.clear();
    return PT_OK;
  } catch (const plantune::Error& e) {
    g_last_error = e.what();
    return StatusOf(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return PT_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PT_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return PT_ERR_INTERNAL;
  }
}

pt_status Missing(const char* what) {
  g_last_error = std::string(what) + " is null";
  return PT_ERR_USAGE;
}

}  // namespace

extern "C" {

const char* pt_version(void) { return "0.1.0"; }

const char* pt_status_name(pt_status status) {
  switch (status) {
    case PT_OK: return "ok";
    case PT_ERR_INTERNAL: return "internal";
    case PT_ERR_USAGE: return "usage";
    case PT_ERR_CONFIG: return "config";
    case PT_ERR_IO: return "io";
    case PT_ERR_ENGINE: return "engine";
    case PT_ERR_NUMERIC: return "numeric";
    case PT_ERR_LOOKUP: return "lookup";
    case PT_ERR_DIMENSION: return "dimension";
  }
  return "unknown";
}

const char* pt_last_error(void) { return g_last_error.c_str(); }

pt_status pt_set_log_level(pt_log_level level) {
  if (level < PT_LOG_DEBUG || level > PT_LOG_OFF) {
    g_last_error = "invalid log level";
    return PT_ERR_USAGE;
  }
  plantune::log::SetLevel(static_cast<plantune::log::Level>(level));
  return PT_OK;
}

pt_status pt_session_open(const char* config_path, pt_session** out) {
  if (config_path == nullptr) return Missing("config_path");
  if (out == nullptr) return Missing("out");
  *out = nullptr;
  return Guard([&] {
    auto s = std::make_unique<pt_session>();
    s->impl = std::make_unique<plantune::Session>(plantune::SessionConfig::Load(config_path));
    *out = s.release();
  });
}

void pt_session_close(pt_session* session) { delete session; }

pt_status pt_session_set_seed(pt_session* session, uint64_t seed) {
  if (session == nullptr) return Missing("session");
  return Guard([&] { session->impl->mutable_config().Reseed(seed); });
}

pt_status pt_session_set_output_dir(pt_session* session, const char* dir) {
  if (session == nullptr) return Missing("session");
  if (dir == nullptr || *dir == '\0') return Missing("dir");
  return Guard([&] { session->impl->mutable_config().output_dir = dir; });
}

pt_status pt_session_set_queries(pt_session* session, const char* queries) {
  if (session == nullptr) return Missing("session");
  return Guard([&] {
    plantune::SessionConfig& c = session->impl->mutable_config();
    const std::vector<std::string> previous = c.queries;
    const std::string text = queries == nullptr ? "all" : queries;
    c.queries = text == "all" ? std::vector<std::string>{} : plantune::SplitList(text);
    try {
      session->impl->TargetQueries();
    } catch (...) {
      c.queries = previous;
      throw;
    }
  });
}

pt_status pt_session_set_budget_evaluations(pt_session* session, uint64_t evaluations) {
  if (session == nullptr) return Missing("session");
  return Guard([&] { session->impl->mutable_config().tuner.budget.max_evaluations = evaluations; });
}

pt_status pt_session_tune(pt_session* session) {
  if (session == nullptr) return Missing("session");
  return Guard([&] { session->summary = session->impl->Tune().dump(); });
}

pt_status pt_session_warmstart(pt_session* session, const char* out_path) {
  if (session == nullptr) return Missing("session");
  return Guard([&] { session->summary = session->impl->Warmstart(out_path ? out_path : "").dump(); });
}

pt_status pt_session_correlate(pt_session* session, const char* out_path) {
  if (session == nullptr) return Missing("session");
  return Guard([&] { session->summary = session->impl->Correlate(out_path ? out_path : "").dump(); });
}

const char* pt_session_summary(const pt_session* session) {
  return session == nullptr ? "" : session->summary.c_str();
}

pt_status pt_report(const char* history_path, const char* predictions_path, const char* out_dir,
                    const char** summary_json) {
  if (history_path == nullptr) return Missing("history_path");
  return Guard([&] {
    g_report_summary =
        plantune::ReportCommand(history_path, predictions_path ? predictions_path : "", out_dir ? out_dir : "").dump();
    if (summary_json != nullptr) *summary_json = g_report_summary.c_str();
  });
}

}  // extern "C"

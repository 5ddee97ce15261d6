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

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "plantune/plantune.h"

namespace {

constexpr const char* kExitCodes =
    "Exit codes:\n"
    "  0  success\n"
    "  1  internal error\n"
    "  2  usage error (bad flags or arguments)\n"
    "  3  configuration error (bad config, missing scenario or knob file)\n"
    "  4  I/O error (unreadable input, unwritable output)\n"
    "  5  engine error\n"
    "  6  numeric error\n"
    "  7  lookup error (unknown query or knob)\n"
    "  8  dimension error\n";

struct SessionFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string query;
  std::optional<std::uint64_t> budget_evals;
};

int Report(pt_status status) {
  if (status != PT_OK) std::fprintf(stderr, "plantune: %s error: %s\n", pt_status_name(status), pt_last_error());
  return static_cast<int>(status);
}

void AddSessionFlags(CLI::App* cmd, SessionFlags& f, bool budget) {
  cmd->add_option("--config", f.config, "Session configuration file")->required();
  cmd->add_option("--seed", f.seed, "Override the configured seed");
  cmd->add_option("--out", f.out, "Override the output directory");
  cmd->add_option("--query", f.query, "Comma-separated query ids (default: config 'queries')");
  if (budget) cmd->add_option("--budget-evals", f.budget_evals, "Override budget.max_evaluations");
}

template <typename Command>
int RunSession(const SessionFlags& f, Command&& command) {
  pt_session* session = nullptr;
  pt_status st = pt_session_open(f.config.c_str(), &session);
  if (st != PT_OK) return Report(st);
  if (st == PT_OK && f.seed) st = pt_session_set_seed(session, *f.seed);
  if (st == PT_OK && !f.out.empty()) st = pt_session_set_output_dir(session, f.out.c_str());
  if (st == PT_OK && !f.query.empty()) st = pt_session_set_queries(session, f.query.c_str());
  if (st == PT_OK && f.budget_evals) st = pt_session_set_budget_evaluations(session, *f.budget_evals);
  if (st == PT_OK) st = command(session);
  if (st == PT_OK) std::printf("%s\n", pt_session_summary(session));
  pt_session_close(session);
  return Report(st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plantune: query-level knob tuner for analytical query engines"};
  app.footer(kExitCodes);
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

  SessionFlags tune_flags, warm_flags, corr_flags;
  CLI::App* tune = app.add_subcommand("tune", "Run warm start, correlation and the tuning loop");
  AddSessionFlags(tune, tune_flags, true);

  CLI::App* warm = app.add_subcommand("warmstart", "Collect warm-start samples only (warmstart.jsonl)");
  AddSessionFlags(warm, warm_flags, false);

  CLI::App* corr = app.add_subcommand("correlate", "Build the knob and node-type correlation matrix");
  AddSessionFlags(corr, corr_flags, false);

  std::string history, predictions, report_out;
  CLI::App* report = app.add_subcommand("report", "Summarize a tuning history into report.json and report.csv");
  report->add_option("history", history, "history.jsonl to summarize")->required();
  report->add_option("--predictions", predictions, "Predictions log (default: predictions.jsonl next to history)");
  report->add_option("--out", report_out, "Output directory (default: the history's directory)");

  for (CLI::App* sub : {tune, warm, corr, report}) {
    sub->add_flag("-v,--verbose", verbose, "Log progress to stderr");
    sub->footer(kExitCodes);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : static_cast<int>(PT_ERR_USAGE);
  }

  pt_set_log_level(verbose ? PT_LOG_INFO : PT_LOG_WARN);

  if (*tune) return RunSession(tune_flags, [](pt_session* s) { return pt_session_tune(s); });
  if (*warm) return RunSession(warm_flags, [](pt_session* s) { return pt_session_warmstart(s, nullptr); });
  if (*corr) return RunSession(corr_flags, [](pt_session* s) { return pt_session_correlate(s, nullptr); });
  const char* summary = nullptr;
  const pt_status st = pt_report(history.c_str(), predictions.empty() ? nullptr : predictions.c_str(),
                                 report_out.empty() ? nullptr : report_out.c_str(), &summary);
  if (st == PT_OK) std::printf("%s\n", summary);
  return Report(st);
}

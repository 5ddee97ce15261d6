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

#include "plantune/session.hpp"

#include <charconv>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "plantune/error.hpp"
#include "plantune/io.hpp"
#include "plantune/log.hpp"

namespace plantune {

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t ParseUint(const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument("expected a non-negative integer");
  return out;
}

double ParseDouble(const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("expected a number");
  }
  if (used != v.size() || !std::isfinite(out)) throw std::invalid_argument("expected a finite number");
  return out;
}

bool ParseBool(const std::string& v) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw std::invalid_argument("expected true or false");
}

bool IsNone(const std::string& v) { return v == "none" || v == "off"; }

using Setter = std::function<void(SessionConfig&, const std::string&)>;

const std::map<std::string, Setter>& Setters() {
  static const std::map<std::string, Setter> setters = {
      {"scenario", [](SessionConfig& c, const std::string& v) { c.scenario_path = v; }},
      {"knobs", [](SessionConfig& c, const std::string& v) { c.knobs_path = v; }},
      {"output_dir", [](SessionConfig& c, const std::string& v) { c.output_dir = v; }},
      {"seed", [](SessionConfig& c, const std::string& v) { c.Reseed(ParseUint(v)); }},
      {"queries",
       [](SessionConfig& c, const std::string& v) { c.queries = v == "all" ? std::vector<std::string>{} : SplitList(v); }},
      {"engine.noise_sigma", [](SessionConfig& c, const std::string& v) { c.noise_sigma = ParseDouble(v); }},
      {"budget.max_evaluations",
       [](SessionConfig& c, const std::string& v) {
         c.tuner.budget.max_evaluations = IsNone(v) ? std::nullopt : std::optional<std::size_t>(ParseUint(v));
       }},
      {"budget.max_duration_s",
       [](SessionConfig& c, const std::string& v) {
         c.tuner.budget.max_duration_s = IsNone(v) ? std::nullopt : std::optional<double>(ParseDouble(v));
       }},
      {"candidates.uniform", [](SessionConfig& c, const std::string& v) { c.tuner.uniform_candidates = ParseUint(v); }},
      {"candidates.local", [](SessionConfig& c, const std::string& v) { c.tuner.local_candidates = ParseUint(v); }},
      {"candidates.radius", [](SessionConfig& c, const std::string& v) { c.tuner.local_radius = ParseDouble(v); }},
      {"model.dim",
       [](SessionConfig& c, const std::string& v) {
         c.tuner.model.encoder.dim = ParseUint(v);
         c.tuner.model.predictor.input_dim = c.tuner.model.encoder.dim;
       }},
      {"model.spectral_k", [](SessionConfig& c, const std::string& v) { c.tuner.model.encoder.spectral_k = ParseUint(v); }},
      {"model.latent_dim", [](SessionConfig& c, const std::string& v) { c.tuner.model.predictor.latent_dim = ParseUint(v); }},
      {"model.hidden_dim", [](SessionConfig& c, const std::string& v) { c.tuner.model.predictor.hidden_dim = ParseUint(v); }},
      {"model.samples", [](SessionConfig& c, const std::string& v) { c.tuner.model.predictor.samples = ParseUint(v); }},
      {"model.lr", [](SessionConfig& c, const std::string& v) { c.tuner.model.adam.lr = ParseDouble(v); }},
      {"model.epochs", [](SessionConfig& c, const std::string& v) { c.tuner.initial_epochs = ParseUint(v); }},
      {"model.refit_steps", [](SessionConfig& c, const std::string& v) { c.tuner.refit_steps = ParseUint(v); }},
      {"model.max_batch", [](SessionConfig& c, const std::string& v) { c.tuner.model.max_batch = ParseUint(v); }},
      {"warmstart.samples", [](SessionConfig& c, const std::string& v) { c.tuner.warmstart_samples = ParseUint(v); }},
      {"warmstart.particles", [](SessionConfig& c, const std::string& v) { c.tuner.pso.particles = ParseUint(v); }},
      {"warmstart.inertia", [](SessionConfig& c, const std::string& v) { c.tuner.pso.inertia = ParseDouble(v); }},
      {"warmstart.c1", [](SessionConfig& c, const std::string& v) { c.tuner.pso.c1 = ParseDouble(v); }},
      {"warmstart.c2", [](SessionConfig& c, const std::string& v) { c.tuner.pso.c2 = ParseDouble(v); }},
      {"warmstart.initial_velocity",
       [](SessionConfig& c, const std::string& v) { c.tuner.pso.initial_velocity = ParseDouble(v); }},
      {"warmstart.concurrent", [](SessionConfig& c, const std::string& v) { c.tuner.pso.concurrent = ParseBool(v); }},
      {"correlation.epsilon",
       [](SessionConfig& c, const std::string& v) { c.tuner.correlation.epsilon_fraction = ParseDouble(v); }},
      {"correlation.permutations",
       [](SessionConfig& c, const std::string& v) { c.tuner.correlation.shapley.permutations = ParseUint(v); }},
      {"correlation.exact", [](SessionConfig& c, const std::string& v) { c.tuner.correlation.shapley.exact = ParseBool(v); }},
      {"correlation.max_points",
       [](SessionConfig& c, const std::string& v) { c.tuner.correlation.shapley.max_points = ParseUint(v); }},
      {"correlation.max_background",
       [](SessionConfig& c, const std::string& v) { c.tuner.correlation.shapley.max_background = ParseUint(v); }},
      {"correlation.lambda", [](SessionConfig& c, const std::string& v) { c.tuner.correlation.ridge.lambda = ParseDouble(v); }},
      {"correlation.degree", [](SessionConfig& c, const std::string& v) { c.tuner.correlation.ridge.degree = ParseUint(v); }},
      {"correlation.alpha", [](SessionConfig& c, const std::string& v) { c.tuner.correlation.selection_alpha = ParseDouble(v); }},
  };
  return setters;
}

void CheckRanges(const SessionConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) Fail(ErrorKind::kConfig, what);
  };
  const TunerOptions& t = c.tuner;
  require(t.model.encoder.dim > 0, "model.dim must be >= 1");
  require(t.model.predictor.latent_dim > 0, "model.latent_dim must be >= 1");
  require(t.model.predictor.hidden_dim > 0, "model.hidden_dim must be >= 1");
  require(t.model.predictor.samples > 0, "model.samples must be >= 1");
  require(t.model.adam.lr > 0.0, "model.lr must be > 0");
  require(t.model.max_batch >= 4, "model.max_batch must be >= 4");
  require(t.warmstart_samples > 0, "warmstart.samples must be >= 1");
  require(t.pso.particles > 0, "warmstart.particles must be >= 1");
  require(t.pso.initial_velocity >= 0.0, "warmstart.initial_velocity must be >= 0");
  require(t.correlation.epsilon_fraction >= 0.0, "correlation.epsilon must be >= 0");
  require(t.correlation.shapley.permutations > 0, "correlation.permutations must be >= 1");
  require(t.correlation.ridge.lambda >= 0.0, "correlation.lambda must be >= 0");
  require(t.correlation.ridge.degree > 0, "correlation.degree must be >= 1");
  require(t.correlation.selection_alpha >= 0.0 && t.correlation.selection_alpha < 1.0,
          "correlation.alpha must lie in [0, 1)");
  require(t.local_radius >= 0.0, "candidates.radius must be >= 0");
  require(t.uniform_candidates + t.local_candidates > 0, "candidate pool is empty");
  require(!c.noise_sigma || *c.noise_sigma >= 0.0, "engine.noise_sigma must be >= 0");
  t.budget.Validate();
}

std::string Join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void SessionConfig::Reseed(std::uint64_t new_seed) {
  seed = new_seed;
  tuner.seed = new_seed;
  tuner.model.seed = new_seed;
}

SessionConfig SessionConfig::Parse(const std::string& text, const std::string& source_path) {
  SessionConfig c;
  c.source_path = source_path;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  const std::string where = source_path.empty() ? "config" : source_path;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = Trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    const std::string at = where + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) Fail(ErrorKind::kConfig, at + "expected 'key = value'");
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    const auto it = Setters().find(key);
    if (it == Setters().end()) Fail(ErrorKind::kConfig, at + "unknown key '" + key + "'");
    if (!seen.insert(key).second) Fail(ErrorKind::kConfig, at + "duplicate key '" + key + "'");
    if (value.empty()) Fail(ErrorKind::kConfig, at + "empty value for '" + key + "'");
    try {
      it->second(c, value);
    } catch (const std::invalid_argument& e) {
      Fail(ErrorKind::kConfig, at + key + ": " + e.what());
    }
  }
  if (c.scenario_path.empty()) Fail(ErrorKind::kConfig, where + ": missing required key 'scenario'");
  c.scenario_path = io::ResolveRelative(source_path, c.scenario_path);
  if (c.knobs_path) c.knobs_path = io::ResolveRelative(source_path, *c.knobs_path);
  c.output_dir = io::ResolveRelative(source_path, c.output_dir);
  if (!io::Exists(c.scenario_path)) Fail(ErrorKind::kConfig, "scenario file not found: " + c.scenario_path);
  if (c.knobs_path && !io::Exists(*c.knobs_path)) Fail(ErrorKind::kConfig, "knob file not found: " + *c.knobs_path);
  CheckRanges(c);
  return c;
}

SessionConfig SessionConfig::Load(const std::string& path) {
  if (!io::Exists(path)) Fail(ErrorKind::kConfig, "config file not found: " + path);
  return Parse(io::ReadFile(path), path);
}

nlohmann::json SessionConfig::ToJson() const {
  nlohmann::json j;
  j["scenario"] = scenario_path;
  j["knobs"] = knobs_path ? nlohmann::json(*knobs_path) : nlohmann::json(nullptr);
  j["output_dir"] = output_dir;
  j["seed"] = seed;
  j["queries"] = queries;
  j["budget.max_evaluations"] =
      tuner.budget.max_evaluations ? nlohmann::json(*tuner.budget.max_evaluations) : nlohmann::json(nullptr);
  j["budget.max_duration_s"] =
      tuner.budget.max_duration_s ? nlohmann::json(*tuner.budget.max_duration_s) : nlohmann::json(nullptr);
  j["warmstart.samples"] = tuner.warmstart_samples;
  j["warmstart.particles"] = tuner.pso.particles;
  j["model.epochs"] = tuner.initial_epochs;
  return j;
}

Session::Session(SessionConfig config) : config_(std::move(config)) {
  try {
    scenario_ = Scenario::Load(config_.scenario_path);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kIo) Fail(ErrorKind::kConfig, e.what());
    throw;
  }
  if (config_.knobs_path) {
    KnobSpace space = KnobSpace::Load(*config_.knobs_path);
    if (space.Names() != scenario_.knobs.Names()) {
      Fail(ErrorKind::kConfig, "knob file " + *config_.knobs_path + " does not match the scenario's knobs");
    }
    scenario_.knobs = std::move(space);
  }
  if (config_.noise_sigma) scenario_.noise_sigma = *config_.noise_sigma;
  scenario_.Validate();
  TargetQueries();
}

std::vector<std::string> Session::TargetQueries() const {
  std::vector<std::string> all;
  for (const QueryPlan& p : scenario_.plans) all.push_back(p.query_id);
  if (config_.queries.empty()) return all;
  const std::set<std::string> known(all.begin(), all.end());
  std::set<std::string> seen;
  for (const std::string& q : config_.queries) {
    if (!known.count(q)) Fail(ErrorKind::kConfig, "unknown query '" + q + "'");
    if (!seen.insert(q).second) Fail(ErrorKind::kConfig, "query '" + q + "' listed twice");
  }
  return config_.queries;
}

TuneArtifacts Session::ArtifactPaths() const {
  const std::string& d = config_.output_dir;
  return {Join(d, "history.jsonl"), Join(d, "best.json"),   Join(d, "correlation.json"), Join(d, "model.json"),
          Join(d, "report.json"),   Join(d, "report.csv"),  Join(d, "predictions.jsonl"), Join(d, "loss.csv")};
}

nlohmann::json BestConfigurationsJson(const TuningHistory& history, const std::vector<std::string>& queries) {
  nlohmann::json out = nlohmann::json::array();
  for (const std::string& q : queries) {
    nlohmann::json e;
    e["query_id"] = q;
    const auto best = history.Best(q);
    e["theta"] = best ? nlohmann::json(std::vector<double>(best->theta.values().begin(), best->theta.values().end())) : nlohmann::json(nullptr);
    e["latency_s"] = best ? nlohmann::json(best->latency_s) : nlohmann::json(nullptr);
    e["evaluations_used"] = history.IndicesOf(q).size();
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

nlohmann::json CorrelationDocument(const TuningResult& r, const Scenario& scenario) {
  nlohmann::json j = r.correlation.ToJson();
  j["importance"] = r.importance.ToJson();
  if (!scenario.truth.empty()) {
    const MatrixScore s = ScoreAgainstTruth(r.correlation, scenario);
    j["ground_truth_score"] = {{"precision", s.precision},
                               {"recall", s.recall},
                               {"true_positives", s.true_positives},
                               {"predicted", s.predicted},
                               {"actual", s.actual}};
  }
  return j;
}

}  // namespace

nlohmann::json Session::Tune() {
  const SimulatedEngine engine(scenario_, config_.seed);
  const std::vector<std::string> queries = TargetQueries();
  Tuner tuner(engine, queries, config_.tuner);
  TuningResult r = tuner.Run();
  io::EnsureDirectory(config_.output_dir);
  const TuneArtifacts a = ArtifactPaths();
  r.history.Save(a.history);
  io::WriteFileAtomic(a.best, BestConfigurationsJson(r.history, queries).dump(2) + "\n");
  io::WriteFileAtomic(a.correlation, CorrelationDocument(r, scenario_).dump(2) + "\n");
  tuner.model().SaveCheckpoint(a.model);
  io::WriteFileAtomic(a.predictions, PredictionsToJsonl(r.predictions));
  WriteLossCsv(a.losses, r.losses);
  const Report report = BuildReport(r.history, r.predictions, 0);
  io::WriteFileAtomic(a.report, report.ToJson().dump(2) + "\n");
  io::WriteFileAtomic(a.report_csv, report.ToCsv());
  log::Info("tuning finished: " + std::to_string(r.history.size()) + " observations");
  return {{"command", "tune"},
          {"queries", queries.size()},
          {"observations", r.history.size()},
          {"engine_calls", r.engine_calls},
          {"passes", r.passes},
          {"failures", report.failures},
          {"avg", report.ToJson()["avg"]},
          {"p95", report.ToJson()["p95"]},
          {"output_dir", config_.output_dir}};
}

nlohmann::json Session::Warmstart(const std::string& out_path) {
  const SimulatedEngine engine(scenario_, config_.seed);
  Tuner tuner(engine, TargetQueries(), config_.tuner);
  tuner.Warmstart();
  const TuningHistory& h = tuner.result().history;
  std::string path = out_path;
  if (path.empty()) {
    io::EnsureDirectory(config_.output_dir);
    path = Join(config_.output_dir, "warmstart.jsonl");
  }
  h.Save(path);
  return {{"command", "warmstart"}, {"samples", h.size()}, {"failures", h.Failures()}, {"path", path}};
}

nlohmann::json Session::Correlate(const std::string& out_path) {
  const SimulatedEngine engine(scenario_, config_.seed);
  Tuner tuner(engine, TargetQueries(), config_.tuner);
  tuner.Warmstart();
  tuner.Correlate();
  const nlohmann::json doc = CorrelationDocument(tuner.result(), scenario_);
  std::string path = out_path;
  if (path.empty()) {
    io::EnsureDirectory(config_.output_dir);
    path = Join(config_.output_dir, "correlation.json");
  }
  io::WriteFileAtomic(path, doc.dump(2) + "\n");
  nlohmann::json summary = {{"command", "correlate"},
                            {"samples", tuner.result().history.size()},
                            {"node_types", doc["node_types"].size()},
                            {"knobs", doc["knobs"].size()},
                            {"path", path}};
  if (doc.contains("ground_truth_score")) {
    summary["precision"] = doc["ground_truth_score"]["precision"];
    summary["recall"] = doc["ground_truth_score"]["recall"];
  }
  return summary;
}

nlohmann::json ReportCommand(const std::string& history_path, const std::string& predictions_path,
                             const std::string& out_dir) {
  std::size_t skipped = 0;
  const TuningHistory history = TuningHistory::Load(history_path, &skipped);
  std::string pred_path = predictions_path;
  if (pred_path.empty()) {
    const std::string sibling = io::ResolveRelative(history_path, "predictions.jsonl");
    if (io::Exists(sibling)) pred_path = sibling;
  }
  std::vector<PredictionRecord> predictions;
  if (!pred_path.empty()) predictions = LoadPredictions(pred_path, &skipped);
  const Report report = BuildReport(history, predictions, skipped);
  std::string dir = out_dir;
  if (dir.empty()) dir = std::filesystem::path(history_path).parent_path().string();
  if (dir.empty()) dir = ".";
  io::EnsureDirectory(dir);
  const std::string json_path = Join(dir, "report.json");
  const std::string csv_path = Join(dir, "report.csv");
  const nlohmann::json j = report.ToJson();
  io::WriteFileAtomic(json_path, j.dump(2) + "\n");
  io::WriteFileAtomic(csv_path, report.ToCsv());
  return {{"command", "report"},
          {"observations", history.size()},
          {"skipped_lines", skipped},
          {"failures", report.failures},
          {"avg", j["avg"]},
          {"p95", j["p95"]},
          {"q_error_rows", report.q_errors.size()},
          {"report", json_path},
          {"csv", csv_path}};
}

}  // namespace plantune

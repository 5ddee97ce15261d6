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

#ifndef PLANTUNE_TUNER_HPP_
#define PLANTUNE_TUNER_HPP_

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "plantune/correlation.hpp"
#include "plantune/engine.hpp"
#include "plantune/model.hpp"
#include "plantune/warmstart.hpp"

namespace plantune {

enum class Source { kWarmstart, kBo, kRandom };
const char* SourceName(Source s);

struct Observation {
  std::string query_id;
  Configuration theta;
  double latency_s = 0.0;
  int status = 0;
  std::size_t iteration = 0;
  Source source = Source::kBo;
  double timestamp = 0.0;  // cumulative simulated engine seconds

  friend bool operator==(const Observation&, const Observation&) = default;
};

// Fields exactly {query_id, theta, latency_s, status, iteration, source,
// timestamp}. Parsing throws kConfig on any schema violation.
nlohmann::json ObservationToJson(const Observation& o);
Observation ObservationFromJson(const nlohmann::json& j);

class TuningHistory {
 public:
  void Append(Observation o);
  const std::vector<Observation>& all() const { return observations_; }
  std::size_t size() const { return observations_.size(); }
  std::vector<std::size_t> IndicesOf(const std::string& query_id) const;
  std::vector<std::string> QueryIds() const;  // order of first appearance
  std::size_t Failures() const;

  // Minimum-latency successful observation; ties keep the earliest.
  std::optional<Observation> Best(const std::string& query_id) const;

  std::string ToJsonl() const;
  // Lenient parse: lines that fail to parse or validate are counted in
  // *skipped and ignored. With skipped == nullptr the first bad line throws.
  static TuningHistory FromJsonl(const std::string& text, std::size_t* skipped = nullptr);
  void Save(const std::string& path) const;
  static TuningHistory Load(const std::string& path, std::size_t* skipped = nullptr);

 private:
  std::vector<Observation> observations_;
  std::map<std::string, std::vector<std::size_t>> by_query_;
};

struct PredictionRecord {
  std::string query_id;
  std::size_t iteration = 0;
  double predicted_latency_s = 0.0;  // exp of the predicted log-latency mean
  double predicted_std = 0.0;        // log units
  double fail_prob = 0.0;
  double actual_latency_s = 0.0;
  int status = 0;
};

nlohmann::json PredictionToJson(const PredictionRecord& p);
PredictionRecord PredictionFromJson(const nlohmann::json& j);

double StandardNormalCdf(double x);
double StandardNormalPdf(double x);

// Expected improvement for minimization in log-latency space times the
// predicted success probability. Without an incumbent the improvement term
// becomes -perf_mean.
double Eic(const Prediction& pred, std::optional<double> f_star);

struct ScoredCandidate {
  Configuration theta;
  Prediction prediction;
  double score = 0.0;
};

// Highest score; ties prefer lower fail_prob, then the lexicographically
// smaller configuration.
std::size_t SelectCandidate(std::span<const ScoredCandidate> candidates);

struct TuningBudget {
  std::optional<std::size_t> max_evaluations = 300;  // BO evaluations, warm start excluded
  std::optional<double> max_duration_s;              // wall clock
  void Validate() const;
};

using CandidateSampler = std::function<std::vector<Configuration>(
    const std::string& query_id, const std::optional<Observation>& incumbent, Rng& rng)>;

struct TunerOptions {
  std::size_t warmstart_samples = 20;
  PsoOptions pso;
  CorrelationOptions correlation;
  ModelOptions model;
  std::size_t initial_epochs = 200;
  std::size_t refit_steps = 50;
  std::size_t uniform_candidates = 192;
  std::size_t local_candidates = 64;
  double local_radius = 0.1;
  TuningBudget budget;
  std::uint64_t seed = 0;
  CandidateSampler sampler;  // replaces the built-in candidate pool when set
};

struct TuningResult {
  TuningHistory history;
  std::vector<PredictionRecord> predictions;
  CorrelationMatrix correlation;
  ImportanceReport importance;
  std::vector<double> losses;  // initial fit followed by every refit
  std::uint64_t engine_calls = 0;
  std::size_t passes = 0;
};

class Tuner {
 public:
  Tuner(const EngineInterface& engine, std::vector<std::string> queries, TunerOptions options);

  const TunerOptions& options() const { return options_; }
  const std::vector<std::string>& queries() const { return queries_; }
  TuningResult& result() { return result_; }
  TunerModel& model() { return *model_; }

  // Algorithm stages; Run() calls them in order.
  void Warmstart();
  void Correlate();
  void FitInitial();
  Observation BoIteration(const std::string& query_id, std::size_t iteration);
  void Refit();

  TuningResult Run();

  std::vector<Configuration> DefaultCandidates(const std::optional<Observation>& incumbent, Rng& rng) const;

 private:
  Observation Record(const std::string& query_id, const Configuration& theta, const ExecutionResult& r,
                     std::size_t iteration, Source source);
  void RebuildContext();

  const EngineInterface& engine_;
  std::vector<std::string> queries_;
  TunerOptions options_;
  std::vector<QueryPlan> plans_;
  std::vector<AnalyzedRun> warm_runs_;
  std::unique_ptr<TunerModel> model_;
  std::vector<LabeledSample> context_;
  Matrix context_x_;
  TuningResult result_;
  std::uint64_t next_call_id_ = 0;
  double clock_s_ = 0.0;
};

std::vector<LabeledSample> ToLabeled(const TuningHistory& history);

}  // namespace plantune

#endif  // PLANTUNE_TUNER_HPP_

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

#include "plantune/tuner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "plantune/error.hpp"
#include "plantune/io.hpp"
#include "plantune/log.hpp"

namespace plantune {

namespace {

constexpr std::uint64_t kWarmstartStream = 0x5757000;
constexpr std::uint64_t kFitStream = 0xF1700000;
constexpr std::uint64_t kCandidateStream = 0xCA4D0000;
constexpr std::uint64_t kCorrelationStream = 0xC022;

template <typename T>
T Require(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) Fail(ErrorKind::kConfig, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    Fail(ErrorKind::kConfig, std::string("field '") + key + "' has the wrong type");
  }
}

Source ParseSource(const std::string& s) {
  if (s == "warmstart") return Source::kWarmstart;
  if (s == "bo") return Source::kBo;
  if (s == "random") return Source::kRandom;
  Fail(ErrorKind::kConfig, "unknown source '" + s + "'");
}

Matrix AppendRows(const Matrix& a, const Matrix& b) {
  if (a.rows() == 0) return b;
  std::vector<double> data = a.values();
  data.insert(data.end(), b.values().begin(), b.values().end());
  return Matrix(a.rows() + b.rows(), a.cols(), std::move(data));
}

}  // namespace

const char* SourceName(Source s) {
  switch (s) {
    case Source::kWarmstart: return "warmstart";
    case Source::kBo: return "bo";
    case Source::kRandom: return "random";
  }
  return "unknown";
}

nlohmann::json ObservationToJson(const Observation& o) {
  return {{"query_id", o.query_id}, {"theta", o.theta.vector()}, {"latency_s", o.latency_s},
          {"status", o.status},     {"iteration", o.iteration},  {"source", SourceName(o.source)},
          {"timestamp", o.timestamp}};
}

Observation ObservationFromJson(const nlohmann::json& j) {
  if (!j.is_object()) Fail(ErrorKind::kConfig, "observation must be a JSON object");
  if (j.size() != 7) Fail(ErrorKind::kConfig, "observation must have exactly 7 fields");
  Observation o;
  o.query_id = Require<std::string>(j, "query_id");
  const auto theta = Require<std::vector<double>>(j, "theta");
  for (double v : theta) {
    if (!(v >= 0.0 && v <= 1.0)) Fail(ErrorKind::kConfig, "theta entries must lie in [0, 1]");
  }
  o.theta = Configuration(theta);
  o.latency_s = Require<double>(j, "latency_s");
  o.status = Require<int>(j, "status");
  o.iteration = Require<std::size_t>(j, "iteration");
  o.source = ParseSource(Require<std::string>(j, "source"));
  o.timestamp = Require<double>(j, "timestamp");
  if (o.status != 0 && o.status != 1) Fail(ErrorKind::kConfig, "status must be 0 or 1");
  if (o.status == 1 && o.latency_s != kFailureLatencySeconds) {
    Fail(ErrorKind::kConfig, "failed observation must carry the failure latency sentinel");
  }
  if (o.status == 0 && !(o.latency_s > 0.0 && std::isfinite(o.latency_s))) {
    Fail(ErrorKind::kConfig, "latency_s must be positive");
  }
  return o;
}

void TuningHistory::Append(Observation o) {
  if (o.status == 1 && o.latency_s != kFailureLatencySeconds) {
    Fail(ErrorKind::kUsage, "failed observation must carry the failure latency sentinel");
  }
  by_query_[o.query_id].push_back(observations_.size());
  observations_.push_back(std::move(o));
}

std::vector<std::size_t> TuningHistory::IndicesOf(const std::string& query_id) const {
  auto it = by_query_.find(query_id);
  return it == by_query_.end() ? std::vector<std::size_t>{} : it->second;
}

std::vector<std::string> TuningHistory::QueryIds() const {
  std::vector<std::string> ids;
  for (const Observation& o : observations_) {
    if (std::find(ids.begin(), ids.end(), o.query_id) == ids.end()) ids.push_back(o.query_id);
  }
  return ids;
}

std::size_t TuningHistory::Failures() const {
  return static_cast<std::size_t>(
      std::count_if(observations_.begin(), observations_.end(), [](const Observation& o) { return o.status != 0; }));
}

std::optional<Observation> TuningHistory::Best(const std::string& query_id) const {
  std::optional<Observation> best;
  for (std::size_t i : IndicesOf(query_id)) {
    const Observation& o = observations_[i];
    if (o.status == 0 && (!best || o.latency_s < best->latency_s)) best = o;
  }
  return best;
}

std::string TuningHistory::ToJsonl() const {
  std::string out;
  for (const Observation& o : observations_) out += ObservationToJson(o).dump() + "\n";
  return out;
}

TuningHistory TuningHistory::FromJsonl(const std::string& text, std::size_t* skipped) {
  TuningHistory h;
  if (skipped) *skipped = 0;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      h.Append(ObservationFromJson(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      if (!skipped) Fail(ErrorKind::kConfig, "history line " + std::to_string(number) + ": " + e.what());
      ++*skipped;
    }
  }
  return h;
}

void TuningHistory::Save(const std::string& path) const { io::WriteFileAtomic(path, ToJsonl()); }

TuningHistory TuningHistory::Load(const std::string& path, std::size_t* skipped) {
  return FromJsonl(io::ReadFile(path), skipped);
}

nlohmann::json PredictionToJson(const PredictionRecord& p) {
  return {{"query_id", p.query_id},
          {"iteration", p.iteration},
          {"predicted_latency_s", p.predicted_latency_s},
          {"predicted_std", p.predicted_std},
          {"fail_prob", p.fail_prob},
          {"actual_latency_s", p.actual_latency_s},
          {"status", p.status}};
}

PredictionRecord PredictionFromJson(const nlohmann::json& j) {
  PredictionRecord p;
  p.query_id = Require<std::string>(j, "query_id");
  p.iteration = Require<std::size_t>(j, "iteration");
  p.predicted_latency_s = Require<double>(j, "predicted_latency_s");
  p.predicted_std = Require<double>(j, "predicted_std");
  p.fail_prob = Require<double>(j, "fail_prob");
  p.actual_latency_s = Require<double>(j, "actual_latency_s");
  p.status = Require<int>(j, "status");
  if (!(p.predicted_latency_s > 0.0) || !(p.actual_latency_s > 0.0)) {
    Fail(ErrorKind::kConfig, "prediction latencies must be positive");
  }
  return p;
}

double StandardNormalCdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double StandardNormalPdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double Eic(const Prediction& pred, std::optional<double> f_star) {
  if (!(pred.perf_std > 0.0)) Fail(ErrorKind::kUsage, "eic: predictive stddev must be positive");
  if (!(pred.fail_prob >= 0.0 && pred.fail_prob <= 1.0)) Fail(ErrorKind::kUsage, "eic: fail_prob outside [0, 1]");
  const double success = 1.0 - pred.fail_prob;
  if (!f_star) return success * -pred.perf_mean;
  if (!std::isfinite(*f_star)) Fail(ErrorKind::kUsage, "eic: incumbent must be finite");
  const double gamma = (*f_star - pred.perf_mean) / pred.perf_std;
  const double ei = pred.perf_std * (gamma * StandardNormalCdf(gamma) + StandardNormalPdf(gamma));
  return success * ei;
}

std::size_t SelectCandidate(std::span<const ScoredCandidate> candidates) {
  if (candidates.empty()) Fail(ErrorKind::kUsage, "no candidates to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const ScoredCandidate& c = candidates[i];
    const ScoredCandidate& b = candidates[best];
    if (c.score != b.score) {
      if (c.score > b.score) best = i;
    } else if (c.prediction.fail_prob != b.prediction.fail_prob) {
      if (c.prediction.fail_prob < b.prediction.fail_prob) best = i;
    } else if (c.theta < b.theta) {
      best = i;
    }
  }
  return best;
}

void TuningBudget::Validate() const {
  if (!max_evaluations && !max_duration_s) Fail(ErrorKind::kConfig, "budget needs max_evaluations or max_duration_s");
  if (max_duration_s && !(*max_duration_s > 0.0)) Fail(ErrorKind::kConfig, "budget.max_duration_s must be > 0");
}

std::vector<LabeledSample> ToLabeled(const TuningHistory& history) {
  std::vector<LabeledSample> out;
  out.reserve(history.size());
  for (const Observation& o : history.all()) out.push_back({o.query_id, o.theta, o.latency_s, o.status != 0});
  return out;
}

Tuner::Tuner(const EngineInterface& engine, std::vector<std::string> queries, TunerOptions options)
    : engine_(engine), queries_(std::move(queries)), options_(std::move(options)) {
  options_.budget.Validate();
  if (queries_.empty()) Fail(ErrorKind::kConfig, "no target queries");
  if (options_.warmstart_samples == 0) Fail(ErrorKind::kConfig, "warmstart.samples must be >= 1");
  if (options_.uniform_candidates + options_.local_candidates == 0 && !options_.sampler) {
    Fail(ErrorKind::kConfig, "candidate pool is empty");
  }
  for (const std::string& q : queries_) plans_.push_back(engine_.Plan(q));
}

Observation Tuner::Record(const std::string& query_id, const Configuration& theta, const ExecutionResult& r,
                          std::size_t iteration, Source source) {
  clock_s_ += r.latency_s;
  Observation o{query_id, theta, r.latency_s, r.status, iteration, source, clock_s_};
  result_.history.Append(o);
  return o;
}

void Tuner::Warmstart() {
  const std::size_t n = engine_.knob_space().size();
  for (std::size_t qi = 0; qi < queries_.size(); ++qi) {
    Swarm swarm = InitSwarm(n, options_.pso, Rng::Derive(options_.seed, kWarmstartStream + qi));
    WarmstartRun run = RunWarmstart(queries_[qi], options_.warmstart_samples, engine_, swarm, next_call_id_, true, true);
    const std::size_t per_step = options_.pso.particles;
    for (std::size_t i = 0; i < run.samples.size(); ++i) {
      const WarmSample& s = run.samples[i];
      Record(queries_[qi], s.theta, s.result, i / per_step + 1, Source::kWarmstart);
      warm_runs_.push_back({queries_[qi], s.theta, s.result});
    }
    if (run.error) Fail(ErrorKind::kEngine, "warm start of " + queries_[qi] + " aborted: " + *run.error);
  }
}

void Tuner::Correlate() {
  TimingCollection timings = TimingsFromRuns(plans_, engine_.knob_space().Names(), warm_runs_);
  CorrelationOptions co = options_.correlation;
  co.seed = Rng::Mix(options_.seed ^ kCorrelationStream);
  result_.importance = ComputeImportance(timings, co);
  result_.correlation = BuildMatrix(result_.importance, co.epsilon_fraction);
}

void Tuner::RebuildContext() {
  context_ = ToLabeled(result_.history);
  context_x_ = model_->Encode(context_);
}

void Tuner::FitInitial() {
  ModelOptions mo = options_.model;
  mo.seed = options_.seed;
  model_ = std::make_unique<TunerModel>(plans_, engine_.knob_space().size(), mo);
  model_->SetCorrelation(result_.correlation);
  Rng rng = Rng::Derive(options_.seed, kFitStream);
  const FitReport fit = model_->Fit(ToLabeled(result_.history), options_.initial_epochs, rng);
  result_.losses.insert(result_.losses.end(), fit.losses.begin(), fit.losses.end());
  RebuildContext();
}

void Tuner::Refit() {
  Rng rng = Rng::Derive(options_.seed, kFitStream + 1 + result_.passes);
  const FitReport fit = model_->Fit(ToLabeled(result_.history), options_.refit_steps, rng);
  result_.losses.insert(result_.losses.end(), fit.losses.begin(), fit.losses.end());
  RebuildContext();
}

std::vector<Configuration> Tuner::DefaultCandidates(const std::optional<Observation>& incumbent, Rng& rng) const {
  const KnobSpace& space = engine_.knob_space();
  std::vector<Configuration> out;
  const std::size_t local = incumbent ? options_.local_candidates : 0;
  const std::size_t uniform = options_.uniform_candidates + options_.local_candidates - local;
  for (Configuration& c : SampleUniform(space.size(), uniform, rng)) out.push_back(space.Snap(c));
  for (std::size_t i = 0; i < local; ++i) out.push_back(space.Snap(Perturb(incumbent->theta, options_.local_radius, rng)));
  return out;
}

Observation Tuner::BoIteration(const std::string& query_id, std::size_t iteration) {
  if (!model_) Fail(ErrorKind::kUsage, "bo iteration before the model is fitted");
  const std::optional<Observation> incumbent = result_.history.Best(query_id);
  Rng rng = Rng::Derive(options_.seed, kCandidateStream + next_call_id_);
  std::vector<Configuration> pool =
      options_.sampler ? options_.sampler(query_id, incumbent, rng) : DefaultCandidates(incumbent, rng);
  if (pool.empty()) Fail(ErrorKind::kUsage, "candidate pool is empty");

  const Matrix x = model_->Encode(query_id, pool);
  const LatentNoise noise = model_->DrawNoise(rng);
  const std::vector<Prediction> preds = model_->Predict(context_, context_x_, x, noise);
  const std::optional<double> f_star =
      incumbent ? std::optional<double>(std::log(incumbent->latency_s)) : std::nullopt;
  std::vector<ScoredCandidate> scored(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) scored[i] = {pool[i], preds[i], Eic(preds[i], f_star)};
  const ScoredCandidate& pick = scored[SelectCandidate(scored)];

  const ExecutionResult r =
      engine_.Execute(query_id, engine_.knob_space().Denormalize(pick.theta), next_call_id_++);
  const Observation o = Record(query_id, pick.theta, r, iteration, Source::kBo);
  result_.predictions.push_back({query_id, iteration, std::exp(pick.prediction.perf_mean), pick.prediction.perf_std,
                                 pick.prediction.fail_prob, r.latency_s, r.status});

  const LabeledSample added{query_id, pick.theta, r.latency_s, r.status != 0};
  context_.push_back(added);
  context_x_ = AppendRows(context_x_, model_->Encode(std::span<const LabeledSample>(&added, 1)));
  return o;
}

TuningResult Tuner::Run() {
  const auto start = std::chrono::steady_clock::now();
  auto out_of_time = [&] {
    if (!options_.budget.max_duration_s) return false;
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    return elapsed.count() >= *options_.budget.max_duration_s;
  };
  Warmstart();
  Correlate();
  FitInitial();
  std::size_t evaluations = 0;
  auto exhausted = [&] {
    return (options_.budget.max_evaluations && evaluations >= *options_.budget.max_evaluations) || out_of_time();
  };
  while (!exhausted()) {
    const std::size_t pass = result_.passes + 1;
    bool complete = true;
    for (const std::string& q : queries_) {
      if (exhausted()) {
        complete = false;
        break;
      }
      BoIteration(q, pass);
      ++evaluations;
    }
    log::Info("pass " + std::to_string(pass) + " done, " + std::to_string(evaluations) + " evaluations");
    if (!complete) break;
    ++result_.passes;
    if (!exhausted()) Refit();
  }
  result_.engine_calls = next_call_id_;
  return result_;
}

}  // namespace plantune

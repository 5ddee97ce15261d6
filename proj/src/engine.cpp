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

#include "plantune/engine.hpp"

#include <cmath>

#include "plantune/error.hpp"
#include "plantune/io.hpp"
#include "plantune/rng.hpp"

namespace plantune {

namespace {

const nlohmann::json& Field(const nlohmann::json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) {
    Fail(ErrorKind::kConfig, "scenario: missing field '" + (path.empty() ? key : path + "." + key) + "'");
  }
  return j.at(key);
}

std::size_t KnobIndex(const KnobSpace& space, const nlohmann::json& j, const std::string& path) {
  const std::string name = Field(j, "knob", path).get<std::string>();
  auto idx = space.IndexOf(name);
  if (!idx) Fail(ErrorKind::kConfig, "scenario: " + path + ".knob names unknown knob '" + name + "'");
  return *idx;
}

}  // namespace

const char* FailureReasonName(FailureReason r) {
  switch (r) {
    case FailureReason::kNone: return "none";
    case FailureReason::kMemory: return "memory";
    case FailureReason::kParallelism: return "parallelism";
    case FailureReason::kResource: return "resource";
  }
  return "unknown";
}

std::size_t Scenario::TypeIndex(const std::string& op) const {
  for (std::size_t i = 0; i < node_types.size(); ++i) {
    if (node_types[i] == op) return i;
  }
  Fail(ErrorKind::kLookup, "scenario has no node type '" + op + "'");
}

std::size_t Scenario::QueryIndex(const std::string& query_id) const {
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (queries[i].query_id == query_id) return i;
  }
  Fail(ErrorKind::kLookup, "unknown query: " + query_id);
}

Scenario Scenario::FromJson(const nlohmann::json& j, const std::string& base_path) {
  Scenario s;
  s.name = Field(j, "name", "").get<std::string>();
  s.seed = Field(j, "seed", "").get<std::uint64_t>();
  s.noise_sigma = Field(j, "noise_sigma", "").get<double>();
  s.knobs = KnobSpace::FromJson(j);
  s.plans = LoadPlanCorpus(io::ResolveRelative(base_path, Field(j, "plans", "").get<std::string>()));
  s.node_types = Field(j, "node_types", "").get<std::vector<std::string>>();

  const auto& truth = Field(j, "ground_truth", "");
  if (!truth.is_array() || truth.size() != s.node_types.size()) {
    Fail(ErrorKind::kConfig, "scenario: ground_truth must have one row per node type");
  }
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (!truth[t].is_array() || truth[t].size() != s.knobs.size()) {
      Fail(ErrorKind::kConfig, "scenario: ground_truth[" + std::to_string(t) + "] must have one entry per knob");
    }
    for (const auto& cell : truth[t]) s.truth.push_back(cell.get<int>() != 0 ? 1 : 0);
  }

  const auto& effects = Field(j, "effects", "");
  if (!effects.is_array() || effects.size() != s.knobs.size()) {
    Fail(ErrorKind::kConfig, "scenario: effects must have one entry per knob");
  }
  for (std::size_t i = 0; i < effects.size(); ++i) {
    const std::string path = "effects[" + std::to_string(i) + "]";
    s.effects.push_back({Field(effects[i], "a", path).get<double>(), Field(effects[i], "b", path).get<double>()});
  }

  const auto& queries = Field(j, "queries", "");
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const std::string path = "queries[" + std::to_string(i) + "]";
    QueryProfile q;
    q.query_id = Field(queries[i], "query_id", path).get<std::string>();
    q.memory_demand = Field(queries[i], "memory_demand", path).get<double>();
    q.base_costs = Field(queries[i], "base_costs", path).get<std::vector<double>>();
    s.queries.push_back(std::move(q));
  }

  if (j.contains("failure_rules")) {
    const auto& rules = j.at("failure_rules");
    if (rules.contains("memory")) {
      s.memory_rule = MemoryRule{KnobIndex(s.knobs, rules["memory"], "failure_rules.memory")};
    }
    if (rules.contains("parallelism")) {
      const auto& r = rules["parallelism"];
      const std::string path = "failure_rules.parallelism";
      ParallelismRule p;
      p.knob = KnobIndex(s.knobs, r, path);
      const std::string mem = Field(r, "memory_knob", path).get<std::string>();
      auto mi = s.knobs.IndexOf(mem);
      if (!mi) Fail(ErrorKind::kConfig, "scenario: " + path + ".memory_knob names unknown knob '" + mem + "'");
      p.memory_knob = *mi;
      p.intercept = Field(r, "intercept", path).get<double>();
      p.slope = Field(r, "slope", path).get<double>();
      s.parallelism_rule = p;
    }
    if (rules.contains("halfspace")) {
      const auto& r = rules["halfspace"];
      const std::string path = "failure_rules.halfspace";
      s.halfspace_rule = HalfspaceRule{Field(r, "weights", path).get<std::vector<double>>(),
                                       Field(r, "threshold", path).get<double>()};
    }
  }
  s.Validate();
  return s;
}

Scenario Scenario::Load(const std::string& path) { return FromJson(io::ReadJson(path), path); }

void Scenario::Validate() const {
  if (!(noise_sigma >= 0.0)) Fail(ErrorKind::kConfig, "scenario: noise_sigma must be >= 0");
  if (plans.size() != queries.size()) Fail(ErrorKind::kConfig, "scenario: queries must align with the plan corpus");
  for (std::size_t i = 0; i < effects.size(); ++i) {
    const std::string path = "scenario: effects[" + std::to_string(i) + "]";
    if (!(effects[i].a > 0.0)) Fail(ErrorKind::kConfig, path + ".a must be > 0");
    if (!(effects[i].b >= 0.0 && effects[i].b <= 1.0)) Fail(ErrorKind::kConfig, path + ".b must lie in [0, 1]");
  }
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const std::string path = "scenario: queries[" + std::to_string(i) + "]";
    const QueryProfile& q = queries[i];
    if (q.query_id != plans[i].query_id) Fail(ErrorKind::kConfig, path + ".query_id does not match plan order");
    if (q.base_costs.size() != plans[i].nodes.size()) {
      Fail(ErrorKind::kConfig, path + ".base_costs needs one entry per plan node");
    }
    for (double c : q.base_costs) {
      if (!(c > 0.0) || !std::isfinite(c)) Fail(ErrorKind::kConfig, path + ".base_costs must be positive");
    }
    if (!(q.memory_demand >= 0.0 && q.memory_demand <= 1.0)) {
      Fail(ErrorKind::kConfig, path + ".memory_demand must lie in [0, 1]");
    }
    for (const PlanNode& n : plans[i].nodes) {
      bool known = false;
      for (const auto& t : node_types) known = known || t == n.op;
      if (!known) Fail(ErrorKind::kConfig, path + ": operator '" + n.op + "' is not a declared node type");
    }
  }
  if (parallelism_rule && parallelism_rule->slope < 0.0) {
    Fail(ErrorKind::kConfig, "scenario: failure_rules.parallelism.slope must be >= 0");
  }
  if (halfspace_rule && halfspace_rule->weights.size() != knobs.size()) {
    Fail(ErrorKind::kConfig, "scenario: failure_rules.halfspace.weights needs one entry per knob");
  }
  if (halfspace_rule && memory_rule && halfspace_rule->weights[memory_rule->knob] > 0.0) {
    Fail(ErrorKind::kConfig, "scenario: failure_rules.halfspace weight on the memory knob must be <= 0");
  }
}

SimulatedEngine::SimulatedEngine(Scenario scenario, std::uint64_t seed)
    : scenario_(std::move(scenario)), seed_(Rng::Mix(scenario_.seed) ^ seed) {
  for (const QueryPlan& plan : scenario_.plans) {
    std::vector<std::size_t> types;
    for (const PlanNode& n : plan.nodes) types.push_back(scenario_.TypeIndex(n.op));
    node_types_.push_back(std::move(types));
  }
}

std::vector<std::string> SimulatedEngine::QueryIds() const {
  std::vector<std::string> ids;
  for (const QueryProfile& q : scenario_.queries) ids.push_back(q.query_id);
  return ids;
}

QueryPlan SimulatedEngine::Plan(const std::string& query_id) const {
  return scenario_.plans[scenario_.QueryIndex(query_id)];
}

FailureReason SimulatedEngine::CheckFailure(std::size_t query, const Configuration& theta) const {
  if (scenario_.memory_rule && theta[scenario_.memory_rule->knob] < scenario_.queries[query].memory_demand) {
    return FailureReason::kMemory;
  }
  if (const auto& p = scenario_.parallelism_rule; p && theta[p->knob] > p->intercept + p->slope * theta[p->memory_knob]) {
    return FailureReason::kParallelism;
  }
  if (const auto& h = scenario_.halfspace_rule) {
    double dot = 0.0;
    for (std::size_t i = 0; i < h->weights.size(); ++i) dot += h->weights[i] * theta[i];
    if (dot > h->threshold) return FailureReason::kResource;
  }
  return FailureReason::kNone;
}

double SimulatedEngine::EffectFactor(std::size_t type, const Configuration& theta) const {
  double f = 1.0;
  for (std::size_t j = 0; j < scenario_.knobs.size(); ++j) {
    if (!scenario_.Truth(type, j)) continue;
    const double d = theta[j] - scenario_.effects[j].b;
    f *= 1.0 + scenario_.effects[j].a * d * d;
  }
  return f;
}

std::vector<double> SimulatedEngine::NodeTimes(std::size_t query, const Configuration& theta, bool with_noise,
                                               std::uint64_t call_id) const {
  const QueryProfile& q = scenario_.queries[query];
  Rng rng = Rng::Derive(seed_, Rng::Mix(call_id));
  std::vector<double> times(q.base_costs.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double noise = with_noise && scenario_.noise_sigma > 0.0 ? std::exp(scenario_.noise_sigma * rng.Normal()) : 1.0;
    times[i] = q.base_costs[i] * EffectFactor(node_types_[query][i], theta) * noise;
  }
  return times;
}

ExecutionResult SimulatedEngine::Run(const std::string& query_id, std::span<const double> raw_knobs,
                                     std::uint64_t call_id, bool analyze) const {
  const std::size_t query = scenario_.QueryIndex(query_id);
  const Configuration theta = scenario_.knobs.Normalize(raw_knobs);
  calls_.fetch_add(1);
  ExecutionResult r;
  r.reason = CheckFailure(query, theta);
  if (r.reason != FailureReason::kNone) {
    r.status = 1;
    r.latency_s = kFailureLatencySeconds;
    return r;
  }
  std::vector<double> times = NodeTimes(query, theta, true, call_id);
  for (double t : times) r.latency_s += t;
  if (analyze) r.node_times = std::move(times);
  return r;
}

ExecutionResult SimulatedEngine::Execute(const std::string& query_id, std::span<const double> raw_knobs,
                                         std::uint64_t call_id) const {
  return Run(query_id, raw_knobs, call_id, false);
}

ExecutionResult SimulatedEngine::ExecuteAnalyze(const std::string& query_id, std::span<const double> raw_knobs,
                                                std::uint64_t call_id) const {
  return Run(query_id, raw_knobs, call_id, true);
}

}  // namespace plantune

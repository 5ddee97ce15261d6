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

#ifndef PLANTUNE_ENGINE_HPP_
#define PLANTUNE_ENGINE_HPP_

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "plantune/knobs.hpp"
#include "plantune/plan.hpp"

namespace plantune {

inline constexpr double kFailureLatencySeconds = 100.0;

enum class FailureReason { kNone, kMemory, kParallelism, kResource };
const char* FailureReasonName(FailureReason r);

struct ExecutionResult {
  double latency_s = 0.0;
  int status = 0;  // 0 success, 1 failure
  FailureReason reason = FailureReason::kNone;
  std::vector<double> node_times;  // execute_analyze on success only, plan node order
};

class EngineInterface {
 public:
  virtual ~EngineInterface() = default;

  virtual const KnobSpace& knob_space() const = 0;
  virtual std::vector<std::string> QueryIds() const = 0;
  // Returns the plan without running the query.
  virtual QueryPlan Plan(const std::string& query_id) const = 0;
  // call_id selects the noise stream; equal ids give equal results.
  virtual ExecutionResult Execute(const std::string& query_id, std::span<const double> raw_knobs,
                                  std::uint64_t call_id) const = 0;
  virtual ExecutionResult ExecuteAnalyze(const std::string& query_id, std::span<const double> raw_knobs,
                                         std::uint64_t call_id) const = 0;
};

struct KnobEffect {
  double a = 1.0;  // curvature, > 0
  double b = 0.5;  // optimum in normalized units
};

struct QueryProfile {
  std::string query_id;
  double memory_demand = 0.0;       // normalized
  std::vector<double> base_costs;   // seconds, plan node order
};

struct MemoryRule {
  std::size_t knob = 0;
};

// Fails when theta[knob] > intercept + slope * theta[memory_knob].
struct ParallelismRule {
  std::size_t knob = 0;
  std::size_t memory_knob = 0;
  double intercept = 0.0;
  double slope = 0.0;
};

// Fails when weights . theta > threshold.
struct HalfspaceRule {
  std::vector<double> weights;
  double threshold = 0.0;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  double noise_sigma = 0.05;
  KnobSpace knobs;
  std::vector<QueryPlan> plans;
  std::vector<std::string> node_types;
  std::vector<std::uint8_t> truth;  // node_types x knobs, test-only ground truth
  std::vector<KnobEffect> effects;
  std::vector<QueryProfile> queries;  // aligned with plans
  std::optional<MemoryRule> memory_rule;
  std::optional<ParallelismRule> parallelism_rule;
  std::optional<HalfspaceRule> halfspace_rule;

  bool Truth(std::size_t type, std::size_t knob) const { return truth[type * knobs.size() + knob] != 0; }
  std::size_t TypeIndex(const std::string& op) const;
  std::size_t QueryIndex(const std::string& query_id) const;

  // Relative paths inside the document resolve against base_path.
  static Scenario FromJson(const nlohmann::json& j, const std::string& base_path);
  static Scenario Load(const std::string& path);
  void Validate() const;
};

class SimulatedEngine final : public EngineInterface {
 public:
  SimulatedEngine(Scenario scenario, std::uint64_t seed);

  const Scenario& scenario() const { return scenario_; }
  const KnobSpace& knob_space() const override { return scenario_.knobs; }
  std::vector<std::string> QueryIds() const override;
  QueryPlan Plan(const std::string& query_id) const override;
  ExecutionResult Execute(const std::string& query_id, std::span<const double> raw_knobs,
                          std::uint64_t call_id) const override;
  ExecutionResult ExecuteAnalyze(const std::string& query_id, std::span<const double> raw_knobs,
                                 std::uint64_t call_id) const override;

  // Deterministic parts of the model, in normalized knob units.
  FailureReason CheckFailure(std::size_t query, const Configuration& theta) const;
  double EffectFactor(std::size_t type, const Configuration& theta) const;
  std::vector<double> NodeTimes(std::size_t query, const Configuration& theta, bool with_noise,
                                std::uint64_t call_id) const;

  std::uint64_t calls() const { return calls_.load(); }

 private:
  ExecutionResult Run(const std::string& query_id, std::span<const double> raw_knobs, std::uint64_t call_id,
                      bool analyze) const;

  Scenario scenario_;
  std::uint64_t seed_;
  std::vector<std::vector<std::size_t>> node_types_;  // per query, per node
  mutable std::atomic<std::uint64_t> calls_{0};
};

}  // namespace plantune

#endif  // PLANTUNE_ENGINE_HPP_

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

#ifndef PLANTUNE_CORRELATION_HPP_
#define PLANTUNE_CORRELATION_HPP_

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "plantune/encoder.hpp"
#include "plantune/engine.hpp"

namespace plantune {

struct NodeTiming {
  std::size_t node_type = 0;
  std::size_t instance = 0;  // one id per (query, plan node)
  Configuration theta;
  double time_s = 0.0;
};

struct TimingCollection {
  std::vector<std::string> node_types;  // sorted operator names
  std::vector<std::string> knobs;
  std::vector<NodeTiming> triplets;
  std::size_t failed_runs = 0;
  std::optional<std::string> error;

  // Triplets partitioned by node type, in node_types order.
  std::vector<std::vector<NodeTiming>> ByType() const;
};

struct AnalyzedRun {
  std::string query_id;
  Configuration theta;
  ExecutionResult result;
};

// Builds triplets from runs that already carry per-node times. Failed runs
// are counted and skipped.
TimingCollection TimingsFromRuns(const std::vector<QueryPlan>& plans, const std::vector<std::string>& knobs,
                                 std::span<const AnalyzedRun> runs);
TimingCollection CollectTimings(const EngineInterface& engine, const std::vector<std::string>& queries,
                                std::span<const Configuration> samples, std::uint64_t& next_call_id);

struct RidgeOptions {
  double lambda = 1e-3;
  std::size_t degree = 2;  // per-knob polynomial features theta_j^1 .. theta_j^degree
  // Center features and targets within each instance (fixed effects)
  // instead of globally.
  bool instance_effects = false;
};

// Additive polynomial regressor t = c + sum_j sum_k w_jk s_j^k.
class RidgeModel {
 public:
  // Knobs with active[j] == 0 are left out and keep zero weights.
  static RidgeModel Fit(std::span<const NodeTiming> triplets, std::size_t knob_count, const RidgeOptions& options,
                        std::span<const std::uint8_t> active = {});

  double Predict(std::span<const double> theta) const;
  double intercept() const { return intercept_; }
  // Coefficient of theta_knob^power, power in [1, degree].
  double Weight(std::size_t knob, std::size_t power) const { return weights_[knob * degree_ + power - 1]; }
  double LinearWeight(std::size_t knob) const { return Weight(knob, 1); }
  std::size_t knob_count() const { return degree_ == 0 ? 0 : weights_.size() / degree_; }
  std::size_t degree() const { return degree_; }
  double residual_sum_squares() const { return rss_; }
  std::size_t feature_count() const { return features_; }

 private:
  double intercept_ = 0.0;
  double rss_ = 0.0;
  std::size_t features_ = 0;
  std::size_t degree_ = 1;
  std::vector<double> weights_;  // knob-major, degree_ per knob
};

using ValueFunction = std::function<double(std::span<const double>)>;

// Monte-Carlo Shapley values. Features switch from a background row to x in
// permutation order; permutations come in antithetic (forward, reversed)
// pairs sharing one background row, and rows are cycled in shuffled rounds.
std::vector<double> ShapleySampled(const ValueFunction& f, std::span<const double> x,
                                   const std::vector<std::vector<double>>& background, std::size_t permutations,
                                   Rng& rng);
// Enumerates all coalitions; the value of a coalition is the background
// mean of f with the coalition's features taken from x.
std::vector<double> ShapleyExact(const ValueFunction& f, std::span<const double> x,
                                 const std::vector<std::vector<double>>& background);

struct ShapleyOptions {
  std::size_t permutations = 2000;
  bool exact = false;
  std::size_t max_points = 32;
  std::size_t max_background = 200;
};

struct CorrelationOptions {
  RidgeOptions ridge;
  ShapleyOptions shapley;
  double epsilon_fraction = 0.01;  // of the node type's mean predicted time
  // Regress log(time) and explain exp(model) instead of the raw time.
  bool log_target = true;
  // Backward elimination before explaining: a knob is dropped while its
  // partial F statistic stays below -ln(alpha). Zero disables it.
  double selection_alpha = 1e-3;
  std::uint64_t seed = 0;
};

struct ImportanceReport {
  std::vector<std::string> node_types;
  std::vector<std::string> knobs;
  std::vector<std::vector<double>> importance;  // node type x knob, mean |phi|
  std::vector<double> mean_prediction;          // per node type
  std::vector<std::uint8_t> insufficient;       // fewer than 2n triplets
  std::vector<std::vector<std::uint8_t>> selected;  // knobs kept by elimination

  nlohmann::json ToJson() const;
};

// Drops knobs one at a time, weakest first, until every remaining knob is
// significant. groups is the number of instance means already removed from
// the targets.
std::vector<std::uint8_t> SelectKnobs(std::span<const NodeTiming> triplets, std::size_t knob_count,
                                      const RidgeOptions& options, double alpha, std::size_t groups);

ImportanceReport ComputeImportance(const TimingCollection& timings, const CorrelationOptions& options);
CorrelationMatrix BuildMatrix(const ImportanceReport& report, double epsilon_fraction);

struct MatrixScore {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t actual = 0;
};

// Compares against a scenario's ground truth, matching rows and columns by name.
MatrixScore ScoreAgainstTruth(const CorrelationMatrix& m, const Scenario& scenario);

}  // namespace plantune

#endif  // PLANTUNE_CORRELATION_HPP_

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

#ifndef PLANTUNE_REPORT_HPP_
#define PLANTUNE_REPORT_HPP_

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "plantune/tuner.hpp"

namespace plantune {

double QError(double actual, double predicted);

// Nearest-rank percentile (q in (0, 100]) of an unsorted sample.
double NearestRankPercentile(std::vector<double> values, double q);

struct QueryReport {
  std::string query_id;
  std::optional<double> best_latency_s;
  std::size_t evaluations = 0;
  std::size_t failures = 0;
};

struct QErrorRow {
  std::string query_id;
  std::size_t iteration = 0;
  double predicted_latency_s = 0.0;
  double actual_latency_s = 0.0;
  double q_error = 1.0;
};

struct Report {
  std::vector<QueryReport> queries;
  std::optional<double> avg_latency_s;
  std::optional<double> p95_latency_s;
  std::size_t evaluations = 0;
  std::size_t failures = 0;
  std::size_t skipped_lines = 0;
  std::vector<QErrorRow> q_errors;

  nlohmann::json ToJson() const;
  std::string ToCsv() const;
};

// Q-Error rows are produced only for predictions whose evaluation succeeded;
// a failed run carries the sentinel latency rather than a measurement.
Report BuildReport(const TuningHistory& history, const std::vector<PredictionRecord>& predictions,
                   std::size_t skipped_lines);

std::vector<PredictionRecord> LoadPredictions(const std::string& path, std::size_t* skipped);
std::string PredictionsToJsonl(const std::vector<PredictionRecord>& predictions);

std::string CsvField(const std::string& field);

}  // namespace plantune

#endif  // PLANTUNE_REPORT_HPP_

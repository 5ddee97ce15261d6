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

#include "plantune/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "plantune/error.hpp"
#include "plantune/io.hpp"

namespace plantune {

double QError(double actual, double predicted) {
  if (!(actual > 0.0) || !(predicted > 0.0)) Fail(ErrorKind::kNumeric, "q-error needs positive latencies");
  return std::max(actual / predicted, predicted / actual);
}

double NearestRankPercentile(std::vector<double> values, double q) {
  if (values.empty()) Fail(ErrorKind::kUsage, "percentile of an empty sample");
  if (!(q > 0.0 && q <= 100.0)) Fail(ErrorKind::kUsage, "percentile must lie in (0, 100]");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(values.size())));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

Report BuildReport(const TuningHistory& history, const std::vector<PredictionRecord>& predictions,
                   std::size_t skipped_lines) {
  Report r;
  r.skipped_lines = skipped_lines;
  r.evaluations = history.size();
  r.failures = history.Failures();
  std::vector<double> bests;
  for (const std::string& q : history.QueryIds()) {
    QueryReport qr;
    qr.query_id = q;
    for (std::size_t i : history.IndicesOf(q)) {
      ++qr.evaluations;
      if (history.all()[i].status != 0) ++qr.failures;
    }
    if (auto best = history.Best(q)) {
      qr.best_latency_s = best->latency_s;
      bests.push_back(best->latency_s);
    }
    r.queries.push_back(std::move(qr));
  }
  if (!bests.empty()) {
    r.avg_latency_s = std::accumulate(bests.begin(), bests.end(), 0.0) / static_cast<double>(bests.size());
    r.p95_latency_s = NearestRankPercentile(bests, 95.0);
  }
  for (const PredictionRecord& p : predictions) {
    if (p.status != 0 || !(p.actual_latency_s > 0.0) || !(p.predicted_latency_s > 0.0)) continue;
    r.q_errors.push_back({p.query_id, p.iteration, p.predicted_latency_s, p.actual_latency_s,
                          QError(p.actual_latency_s, p.predicted_latency_s)});
  }
  return r;
}

namespace {

nlohmann::json OptionalNumber(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string FormatNumber(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

nlohmann::json Report::ToJson() const {
  nlohmann::json j;
  j["avg"] = OptionalNumber(avg_latency_s);
  j["p95"] = OptionalNumber(p95_latency_s);
  j["failures"] = failures;
  j["evaluations"] = evaluations;
  j["skipped_lines"] = skipped_lines;
  nlohmann::json qs = nlohmann::json::array();
  for (const QueryReport& q : queries) {
    qs.push_back({{"query_id", q.query_id},
                  {"best_latency_s", OptionalNumber(q.best_latency_s)},
                  {"evaluations", q.evaluations},
                  {"failures", q.failures}});
  }
  j["queries"] = std::move(qs);
  nlohmann::json qe;
  qe["count"] = q_errors.size();
  if (q_errors.empty()) {
    qe["mean"] = nullptr;
    qe["median"] = nullptr;
    qe["p95"] = nullptr;
    qe["max"] = nullptr;
  } else {
    std::vector<double> v;
    for (const QErrorRow& row : q_errors) v.push_back(row.q_error);
    qe["mean"] = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    qe["median"] = NearestRankPercentile(v, 50.0);
    qe["p95"] = NearestRankPercentile(v, 95.0);
    qe["max"] = *std::max_element(v.begin(), v.end());
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const QErrorRow& row : q_errors) {
    rows.push_back({{"query_id", row.query_id},
                    {"iteration", row.iteration},
                    {"predicted_latency_s", row.predicted_latency_s},
                    {"actual_latency_s", row.actual_latency_s},
                    {"q_error", row.q_error}});
  }
  qe["rows"] = std::move(rows);
  j["q_error"] = std::move(qe);
  return j;
}

std::string CsvField(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string Report::ToCsv() const {
  std::ostringstream out;
  out << "query_id,best_latency_s,evaluations,failures\r\n";
  for (const QueryReport& q : queries) {
    out << CsvField(q.query_id) << ',' << (q.best_latency_s ? FormatNumber(*q.best_latency_s) : "") << ','
        << q.evaluations << ',' << q.failures << "\r\n";
  }
  return out.str();
}

std::vector<PredictionRecord> LoadPredictions(const std::string& path, std::size_t* skipped) {
  std::vector<PredictionRecord> out;
  for (const std::string& line : io::ReadLines(path)) {
    try {
      out.push_back(PredictionFromJson(nlohmann::json::parse(line)));
    } catch (const std::exception&) {
      if (skipped == nullptr) Fail(ErrorKind::kConfig, path + ": malformed prediction line");
      ++*skipped;
    }
  }
  return out;
}

std::string PredictionsToJsonl(const std::vector<PredictionRecord>& predictions) {
  std::string out;
  for (const PredictionRecord& p : predictions) out += PredictionToJson(p).dump() + "\n";
  return out;
}

}  // namespace plantune

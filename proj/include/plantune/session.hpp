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

#ifndef PLANTUNE_SESSION_HPP_
#define PLANTUNE_SESSION_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "plantune/engine.hpp"
#include "plantune/report.hpp"
#include "plantune/tuner.hpp"

namespace plantune {

// Session configuration file grammar, one entry per line:
//
//   # comment
//   key = value
//
// Blank lines and lines starting with '#' are ignored, keys are unique and
// must be known, and relative paths resolve against the file's directory.
// See README.md for the list of keys and their defaults.
struct SessionConfig {
  std::string source_path;
  std::string scenario_path;
  std::optional<std::string> knobs_path;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  std::vector<std::string> queries;  // empty means every scenario query
  std::optional<double> noise_sigma;
  TunerOptions tuner;

  static SessionConfig Parse(const std::string& text, const std::string& source_path);
  static SessionConfig Load(const std::string& path);
  // Applies seeds derived from `seed` to every stochastic component.
  void Reseed(std::uint64_t new_seed);
  nlohmann::json ToJson() const;
};

std::vector<std::string> SplitList(const std::string& text);

struct TuneArtifacts {
  std::string history;
  std::string best;
  std::string correlation;
  std::string model;
  std::string report;
  std::string report_csv;
  std::string predictions;
  std::string losses;
};

class Session {
 public:
  explicit Session(SessionConfig config);

  const SessionConfig& config() const { return config_; }
  SessionConfig& mutable_config() { return config_; }
  const Scenario& scenario() const { return scenario_; }

  // Each command rebuilds the engine from the current configuration and
  // returns a JSON summary of what it wrote.
  nlohmann::json Tune();
  nlohmann::json Warmstart(const std::string& out_path = "");
  nlohmann::json Correlate(const std::string& out_path = "");

  std::vector<std::string> TargetQueries() const;
  TuneArtifacts ArtifactPaths() const;

 private:
  SessionConfig config_;
  Scenario scenario_;
};

nlohmann::json BestConfigurationsJson(const TuningHistory& history, const std::vector<std::string>& queries);

// Reads a history (and, if present, the predictions log) and writes
// report.json and report.csv into out_dir.
nlohmann::json ReportCommand(const std::string& history_path, const std::string& predictions_path,
                             const std::string& out_dir);

}  // namespace plantune

#endif  // PLANTUNE_SESSION_HPP_

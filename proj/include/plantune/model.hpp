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

#ifndef PLANTUNE_MODEL_HPP_
#define PLANTUNE_MODEL_HPP_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "plantune/encoder.hpp"
#include "plantune/predictor.hpp"

namespace plantune {

struct Prediction {
  double perf_mean = 0.0;  // natural-log latency
  double perf_std = 1.0;   // in log units
  double fail_prob = 0.5;
};

// Log-latency standardization fitted on successful context latencies.
class TargetScaler {
 public:
  void Fit(std::span<const double> latencies);
  double Transform(double latency) const;
  double Inverse(double standardized) const;  // back to log-latency
  double mean() const { return mean_; }
  double stddev() const { return stddev_; }

 private:
  double mean_ = 0.0;
  double stddev_ = 1.0;
};

struct LabeledSample {
  std::string query_id;
  Configuration theta;
  double latency_s = 0.0;
  bool failed = false;
};

struct ModelOptions {
  EncoderOptions encoder;
  PredictorOptions predictor;
  AdamOptions adam;
  std::size_t max_batch = 256;
  std::uint64_t seed = 0;
};

struct FitReport {
  std::vector<double> losses;  // one entry per epoch
  bool skipped = false;
};

class TunerModel {
 public:
  TunerModel(const std::vector<QueryPlan>& corpus, std::size_t knob_count, ModelOptions options);

  const ModelOptions& options() const { return options_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const FeatureVocabulary& vocabulary() const { return vocab_; }
  const KnobPlanEncoder& encoder() const { return encoder_; }
  const DualTaskPredictor& predictor() const { return predictor_; }
  const PreparedPlan& plan(const std::string& query_id) const;

  void SetCorrelation(const CorrelationMatrix& correlation);

  // Each epoch draws at most max_batch samples, splits them 50/50 into
  // context and target sets and takes one Adam step on the loss.
  FitReport Fit(std::span<const LabeledSample> samples, std::size_t epochs, Rng& rng);

  // Joint encodings without gradient tracking, one row per item.
  Matrix Encode(std::span<const LabeledSample> items) const;
  Matrix Encode(const std::string& query_id, std::span<const Configuration> thetas) const;

  std::vector<Prediction> Predict(std::span<const LabeledSample> context, const Matrix& context_x,
                                  const Matrix& target_x, const LatentNoise& noise) const;
  std::vector<Prediction> Predict(std::span<const LabeledSample> context,
                                  std::span<const LabeledSample> targets, Rng& rng) const;

  LatentNoise DrawNoise(Rng& rng) const { return predictor_.DrawNoise(options_.predictor.samples, rng); }

  nlohmann::json CheckpointJson() const;
  void SaveCheckpoint(const std::string& path) const;
  // Restores parameters from a checkpoint written for the same corpus and
  // knob count.
  void LoadCheckpoint(const std::string& path);

 private:
  std::vector<EncodeItem> Items(std::span<const LabeledSample> samples) const;

  ModelOptions options_;
  FeatureVocabulary vocab_;
  std::map<std::string, QueryPlan> plans_;
  std::map<std::string, PreparedPlan> prepared_;
  KnobPlanEncoder encoder_;
  DualTaskPredictor predictor_;
  mutable ParamStore params_;
};

void WriteLossCsv(const std::string& path, std::span<const double> losses);

}  // namespace plantune

#endif  // PLANTUNE_MODEL_HPP_

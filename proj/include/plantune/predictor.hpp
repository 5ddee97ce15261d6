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

#ifndef PLANTUNE_PREDICTOR_HPP_
#define PLANTUNE_PREDICTOR_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "plantune/autodiff.hpp"
#include "plantune/params.hpp"
#include "plantune/rng.hpp"

namespace plantune {

enum class Task { kPerformance, kReliability };

struct PredictorOptions {
  std::size_t input_dim = 32;   // joint encoding width
  std::size_t latent_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t samples = 4;      // Monte-Carlo latent draws
};

// Diagonal Gaussian recorded on a tape; stddev is softplus-positive.
struct LatentGaussian {
  Var mean;
  Var stddev;
};

// Observation rows fed to the predictor. perf holds standardized log
// latencies and is ignored for failed rows.
struct TaskData {
  Var x;
  std::vector<double> perf;
  std::vector<std::uint8_t> failed;

  std::size_t size() const { return failed.size(); }
};

// Per-pair representations of one set, split by task. Failed rows are
// dropped from the performance task only.
struct Abstraction {
  std::vector<std::size_t> perf_rows;
  Var x_perf, r_perf, u_perf;  // invalid when perf_rows is empty
  Var x_rel, r_rel, u_rel;

  bool has_perf() const { return !perf_rows.empty(); }
};

struct LatentNoise {
  std::vector<Matrix> z, h_perf, h_rel;  // one 1 x latent_dim draw per sample
};

struct ElboTerms {
  double log_lik_perf = 0.0;
  double log_lik_rel = 0.0;
  double kl_h_perf = 0.0;
  double kl_h_rel = 0.0;
  double kl_z = 0.0;
};

// Predictive summary in standardized performance units.
struct RawPrediction {
  double perf_mean = 0.0;
  double perf_std = 1.0;
  double fail_prob = 0.5;
};

// Closed-form KL(q || p) between diagonal Gaussians, summed over dims (1 x 1).
Var KlDiagonal(const LatentGaussian& q, const LatentGaussian& p);
double KlDiagonal(std::span<const double> mu_q, std::span<const double> sd_q,
                  std::span<const double> mu_p, std::span<const double> sd_p);

// Dual-task neural process: per-task data abstractors, attentive
// deterministic paths, intra-task latents h_perf / h_rel, shared latent z,
// gated profile sharing, and regression / classification decoders.
// Parameters live under the "np." prefix.
class DualTaskPredictor {
 public:
  explicit DualTaskPredictor(PredictorOptions options);

  void Register(ParamStore& params, Rng& rng) const;
  const PredictorOptions& options() const { return options_; }

  Abstraction Abstract(ParamStore& params, const TaskData& data) const;

  // Cross-attention from targets onto the task's context rows (values are
  // the per-pair r). Falls back to a learned embedding without context.
  Var AggregateDeterministic(ParamStore& params, Task task, Var x_targets, const Abstraction& context,
                             ad::AttentionTrace* trace = nullptr) const;

  // Mean-pooled u over both tasks -> MLP -> (mean, stddev).
  LatentGaussian InferZ(ParamStore& params, const Abstraction& set) const;
  // [mean-pooled task u || z] -> MLP -> (mean, stddev).
  LatentGaussian InferH(ParamStore& params, Task task, const Abstraction& set, Var z) const;

  // p_o + tanh(p_c W1 + b1) * sigmoid(p_c W2 + b2).
  Var Gate(ParamStore& params, const std::string& name, Var p_o, Var p_c) const;

  // Performance: columns (mean, stddev). Reliability: one logit column.
  Var Decode(ParamStore& params, Task task, Var x_targets, Var r, Var h) const;

  LatentNoise DrawNoise(std::size_t samples, Rng& rng) const;

  // Negative variational lower bound divided by the number of targets.
  Var ElboLoss(ParamStore& params, const TaskData& context, const TaskData& targets,
               const LatentNoise& noise, ElboTerms* terms = nullptr) const;

  // Mixture over latent draws from the context-conditioned distributions.
  std::vector<RawPrediction> Predict(ParamStore& params, const TaskData& context, Var x_targets,
                                     const LatentNoise& noise) const;

 private:
  Var EmptyEmbedding(ParamStore& params, Tape& tape, const char* which) const;
  Var PooledU(ParamStore& params, Task task, const Abstraction& set, Tape& tape) const;

  PredictorOptions options_;
};

Var SampleLatent(const LatentGaussian& g, const Matrix& eps);

}  // namespace plantune

#endif  // PLANTUNE_PREDICTOR_HPP_

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

#include "plantune/predictor.hpp"

#include <cmath>

#include "plantune/error.hpp"
#include "plantune/layers.hpp"

namespace plantune {

namespace {

constexpr double kMinLatentStd = 1e-3;
constexpr double kMinOutputStd = 1e-2;
constexpr double kHalfLog2Pi = 0.91893853320467274178;

const char* TaskName(Task t) { return t == Task::kPerformance ? "perf" : "rel"; }

Matrix Column(std::span<const double> v) {
  return Matrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
}

LatentGaussian SplitGaussian(Var out, std::size_t dim) {
  return {ad::SliceCols(out, 0, dim), ad::AddScalar(ad::Softplus(ad::SliceCols(out, dim, dim)), kMinLatentStd)};
}

Var AddAll(const std::vector<Var>& terms) {
  Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = ad::Add(acc, terms[i]);
  return acc;
}

}  // namespace

Var SampleLatent(const LatentGaussian& g, const Matrix& eps) {
  Tape& t = *g.mean.tape();
  return ad::Add(g.mean, ad::Mul(g.stddev, t.Constant(eps)));
}

Var KlDiagonal(const LatentGaussian& q, const LatentGaussian& p) {
  // log sp - log sq + ((sq / sp)^2 + ((mq - mp) / sp)^2) / 2 - 1/2, clamped at
  // zero per dimension against rounding.
  const Var ratio = ad::Square(ad::Div(q.stddev, p.stddev));
  const Var shift = ad::Square(ad::Div(ad::Sub(q.mean, p.mean), p.stddev));
  const Var log_ratio = ad::Sub(ad::Log(p.stddev), ad::Log(q.stddev));
  const Var per_dim = ad::AddScalar(ad::Add(log_ratio, ad::Scale(ad::Add(ratio, shift), 0.5)), -0.5);
  return ad::Sum(ad::Relu(per_dim));
}

double KlDiagonal(std::span<const double> mu_q, std::span<const double> sd_q,
                  std::span<const double> mu_p, std::span<const double> sd_p) {
  double kl = 0.0;
  for (std::size_t i = 0; i < mu_q.size(); ++i) {
    const double dm = mu_q[i] - mu_p[i];
    const double r = sd_q[i] / sd_p[i], m = dm / sd_p[i];
    kl += std::max(std::log(sd_p[i]) - std::log(sd_q[i]) + 0.5 * (r * r + m * m) - 0.5, 0.0);
  }
  return kl;
}

DualTaskPredictor::DualTaskPredictor(PredictorOptions options) : options_(options) {
  if (options_.samples == 0) Fail(ErrorKind::kUsage, "predictor needs at least one latent sample");
}

void DualTaskPredictor::Register(ParamStore& p, Rng& rng) const {
  const std::size_t d = options_.input_dim, l = options_.latent_dim, h = options_.hidden_dim;
  for (Task t : {Task::kPerformance, Task::kReliability}) {
    const std::string n = TaskName(t);
    layers::RegisterMlp(p, "np.abs." + n + ".r", d + 1, h, l, rng);
    layers::RegisterMlp(p, "np.abs." + n + ".u", d + 1, h, l, rng);
    p.AddGlorot("np.agg." + n + ".wq", d, d, rng);
    p.AddGlorot("np.agg." + n + ".wk", d, d, rng);
    layers::RegisterMlp(p, "np.h." + n, 2 * l, h, 2 * l, rng);
    layers::RegisterLinear(p, "np.gate.r_" + n + ".tanh", l, l, rng);
    layers::RegisterLinear(p, "np.gate.r_" + n + ".sig", l, l, rng);
    layers::RegisterLinear(p, "np.gate.h_" + n + ".tanh", l, l, rng);
    layers::RegisterLinear(p, "np.gate.h_" + n + ".sig", l, l, rng);
    layers::RegisterMlp(p, "np.dec." + n, d + 2 * l, h, t == Task::kPerformance ? 2 : 1, rng);
  }
  p.AddZeros("np.empty.r_perf", 1, l);
  p.AddZeros("np.empty.u_perf", 1, l);
  layers::RegisterMlp(p, "np.z", l, h, 2 * l, rng);
}

Abstraction DualTaskPredictor::Abstract(ParamStore& p, const TaskData& data) const {
  if (data.x.rows() != data.size() || data.perf.size() != data.size()) {
    Fail(ErrorKind::kDimension, "task data rows do not match labels");
  }
  if (data.size() == 0) Fail(ErrorKind::kUsage, "abstract: empty observation set");
  Tape& t = *data.x.tape();
  Abstraction a;
  std::vector<double> rel(data.size()), perf;
  for (std::size_t i = 0; i < data.size(); ++i) {
    rel[i] = data.failed[i] ? 1.0 : 0.0;
    if (!data.failed[i]) {
      a.perf_rows.push_back(i);
      perf.push_back(data.perf[i]);
    }
  }
  a.x_rel = data.x;
  const Var in_rel = ad::ConcatCols({data.x, t.Constant(Column(rel))});
  a.r_rel = layers::Mlp(p, "np.abs.rel.r", in_rel);
  a.u_rel = layers::Mlp(p, "np.abs.rel.u", in_rel);
  if (a.has_perf()) {
    a.x_perf = a.perf_rows.size() == data.size() ? data.x : ad::GatherRows(data.x, a.perf_rows);
    const Var in_perf = ad::ConcatCols({a.x_perf, t.Constant(Column(perf))});
    a.r_perf = layers::Mlp(p, "np.abs.perf.r", in_perf);
    a.u_perf = layers::Mlp(p, "np.abs.perf.u", in_perf);
  }
  return a;
}

Var DualTaskPredictor::EmptyEmbedding(ParamStore& p, Tape& tape, const char* which) const {
  return tape.Param(p.Get(std::string("np.empty.") + which));
}

Var DualTaskPredictor::AggregateDeterministic(ParamStore& p, Task task, Var x_targets, const Abstraction& ctx,
                                              ad::AttentionTrace* trace) const {
  Tape& t = *x_targets.tape();
  const bool perf = task == Task::kPerformance;
  if (perf && !ctx.has_perf()) return ad::RepeatRows(EmptyEmbedding(p, t, "r_perf"), x_targets.rows());
  const Var xc = perf ? ctx.x_perf : ctx.x_rel;
  const Var values = perf ? ctx.r_perf : ctx.r_rel;
  const std::string n = TaskName(task);
  const Var q = ad::MatMul(x_targets, t.Param(p.Get("np.agg." + n + ".wq")));
  const Var k = ad::MatMul(xc, t.Param(p.Get("np.agg." + n + ".wk")));
  auto layout = std::make_shared<ad::AttentionLayout>();
  layout->groups.push_back({0, x_targets.rows(), 0, xc.rows(), {}});
  return ad::GroupedAttention(q, k, values, layout, trace);
}

Var DualTaskPredictor::PooledU(ParamStore& p, Task task, const Abstraction& set, Tape& tape) const {
  if (task == Task::kReliability) return ad::MeanRows(set.u_rel);
  if (!set.has_perf()) return EmptyEmbedding(p, tape, "u_perf");
  return ad::MeanRows(set.u_perf);
}

LatentGaussian DualTaskPredictor::InferZ(ParamStore& p, const Abstraction& set) const {
  const Var all_u = set.has_perf() ? ad::ConcatRows({set.u_perf, set.u_rel}) : set.u_rel;
  return SplitGaussian(layers::Mlp(p, "np.z", ad::MeanRows(all_u)), options_.latent_dim);
}

LatentGaussian DualTaskPredictor::InferH(ParamStore& p, Task task, const Abstraction& set, Var z) const {
  const Var in = ad::ConcatCols({PooledU(p, task, set, *z.tape()), z});
  return SplitGaussian(layers::Mlp(p, std::string("np.h.") + TaskName(task), in), options_.latent_dim);
}

Var DualTaskPredictor::Gate(ParamStore& p, const std::string& name, Var p_o, Var p_c) const {
  const Var amount = ad::Tanh(layers::Linear(p, name + ".tanh", p_c));
  const Var open = ad::Sigmoid(layers::Linear(p, name + ".sig", p_c));
  return ad::Add(p_o, ad::Mul(amount, open));
}

Var DualTaskPredictor::Decode(ParamStore& p, Task task, Var x_targets, Var r, Var h) const {
  const Var in = ad::ConcatCols({x_targets, r, ad::RepeatRows(h, x_targets.rows())});
  const Var out = layers::Mlp(p, std::string("np.dec.") + TaskName(task), in);
  if (task == Task::kReliability) return out;
  const Var sd = ad::AddScalar(ad::Softplus(ad::SliceCols(out, 1, 1)), kMinOutputStd);
  return ad::ConcatCols({ad::SliceCols(out, 0, 1), sd});
}

LatentNoise DualTaskPredictor::DrawNoise(std::size_t samples, Rng& rng) const {
  LatentNoise noise;
  auto draw = [&] {
    Matrix m(1, options_.latent_dim);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.Normal();
    return m;
  };
  for (std::size_t s = 0; s < samples; ++s) {
    noise.z.push_back(draw());
    noise.h_perf.push_back(draw());
    noise.h_rel.push_back(draw());
  }
  return noise;
}

Var DualTaskPredictor::ElboLoss(ParamStore& p, const TaskData& context, const TaskData& targets,
                                const LatentNoise& noise, ElboTerms* terms) const {
  if (targets.size() == 0) Fail(ErrorKind::kUsage, "elbo: empty target set");
  if (noise.z.empty()) Fail(ErrorKind::kUsage, "elbo: no latent samples");
  Tape& t = *targets.x.tape();
  const Abstraction c = Abstract(p, context);
  const Abstraction d = Abstract(p, targets);

  const Var r_perf = AggregateDeterministic(p, Task::kPerformance, targets.x, c);
  const Var r_rel = AggregateDeterministic(p, Task::kReliability, targets.x, c);
  const Var r_perf_c = Gate(p, "np.gate.r_perf", r_perf, r_rel);
  const Var r_rel_c = Gate(p, "np.gate.r_rel", r_rel, r_perf);

  const LatentGaussian qz_d = InferZ(p, d);
  const LatentGaussian qz_c = InferZ(p, c);
  const Var kl_z = KlDiagonal(qz_d, qz_c);

  std::vector<double> y_perf, y_rel(targets.size());
  for (std::size_t i : d.perf_rows) y_perf.push_back(targets.perf[i]);
  for (std::size_t i = 0; i < targets.size(); ++i) y_rel[i] = targets.failed[i] ? 1.0 : 0.0;
  const Var y_rel_v = t.Constant(Column(y_rel));

  std::vector<Var> per_sample;
  ElboTerms acc;
  const std::size_t samples = noise.z.size();
  for (std::size_t s = 0; s < samples; ++s) {
    const Var z = SampleLatent(qz_d, noise.z[s]);
    std::vector<Var> parts;
    for (Task task : {Task::kPerformance, Task::kReliability}) {
      const bool perf = task == Task::kPerformance;
      const LatentGaussian qh_d = InferH(p, task, d, z);
      const LatentGaussian qh_c = InferH(p, task, c, z);
      const Var h = SampleLatent(qh_d, perf ? noise.h_perf[s] : noise.h_rel[s]);
      const Var h_c = Gate(p, perf ? "np.gate.h_perf" : "np.gate.h_rel", h, z);
      const Var out = Decode(p, task, targets.x, perf ? r_perf_c : r_rel_c, h_c);
      const Var kl_h = KlDiagonal(qh_d, qh_c);
      Var ll;
      if (perf) {
        if (d.perf_rows.empty()) {
          ll = t.Constant(Matrix(1, 1));
        } else {
          const Var rows = d.perf_rows.size() == targets.size() ? out : ad::GatherRows(out, d.perf_rows);
          const Var mu = ad::SliceCols(rows, 0, 1);
          const Var sd = ad::SliceCols(rows, 1, 1);
          const Var diff = ad::Sub(mu, t.Constant(Column(y_perf)));
          const Var log_sd = ad::Log(sd);
          const Var quad = ad::Mul(ad::Square(diff), ad::Exp(ad::Scale(log_sd, -2.0)));
          ll = ad::Scale(ad::Sum(ad::AddScalar(ad::Add(log_sd, ad::Scale(quad, 0.5)), kHalfLog2Pi)), -1.0);
        }
        acc.log_lik_perf += ll.value()[0];
        acc.kl_h_perf += kl_h.value()[0];
      } else {
        // y * logit - softplus(logit)
        ll = ad::Sum(ad::Sub(ad::Mul(y_rel_v, out), ad::Softplus(out)));
        acc.log_lik_rel += ll.value()[0];
        acc.kl_h_rel += kl_h.value()[0];
      }
      parts.push_back(ad::Sub(ll, kl_h));
    }
    per_sample.push_back(AddAll(parts));
  }
  const double inv_s = 1.0 / static_cast<double>(samples);
  const Var elbo = ad::Sub(ad::Scale(AddAll(per_sample), inv_s), kl_z);
  if (terms) {
    terms->log_lik_perf = acc.log_lik_perf * inv_s;
    terms->log_lik_rel = acc.log_lik_rel * inv_s;
    terms->kl_h_perf = acc.kl_h_perf * inv_s;
    terms->kl_h_rel = acc.kl_h_rel * inv_s;
    terms->kl_z = kl_z.value()[0];
  }
  return ad::Scale(elbo, -1.0 / static_cast<double>(targets.size()));
}

std::vector<RawPrediction> DualTaskPredictor::Predict(ParamStore& p, const TaskData& context, Var x_targets,
                                                      const LatentNoise& noise) const {
  if (noise.z.empty()) Fail(ErrorKind::kUsage, "predict: no latent samples");
  const Abstraction c = Abstract(p, context);
  const Var r_perf = AggregateDeterministic(p, Task::kPerformance, x_targets, c);
  const Var r_rel = AggregateDeterministic(p, Task::kReliability, x_targets, c);
  const Var r_perf_c = Gate(p, "np.gate.r_perf", r_perf, r_rel);
  const Var r_rel_c = Gate(p, "np.gate.r_rel", r_rel, r_perf);
  const LatentGaussian qz = InferZ(p, c);

  const std::size_t n = x_targets.rows();
  const std::size_t samples = noise.z.size();
  std::vector<double> mean_sum(n, 0.0), second_sum(n, 0.0), prob_sum(n, 0.0);
  for (std::size_t s = 0; s < samples; ++s) {
    const Var z = SampleLatent(qz, noise.z[s]);
    const Var hf = SampleLatent(InferH(p, Task::kPerformance, c, z), noise.h_perf[s]);
    const Var hg = SampleLatent(InferH(p, Task::kReliability, c, z), noise.h_rel[s]);
    const Matrix& perf = Decode(p, Task::kPerformance, x_targets, r_perf_c, Gate(p, "np.gate.h_perf", hf, z)).value();
    const Matrix& rel = Decode(p, Task::kReliability, x_targets, r_rel_c, Gate(p, "np.gate.h_rel", hg, z)).value();
    for (std::size_t i = 0; i < n; ++i) {
      const double mu = perf(i, 0), sd = perf(i, 1);
      mean_sum[i] += mu;
      second_sum[i] += sd * sd + mu * mu;
      const double l = rel(i, 0);
      prob_sum[i] += l >= 0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l));
    }
  }
  std::vector<RawPrediction> out(n);
  const double inv = 1.0 / static_cast<double>(samples);
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = mean_sum[i] * inv;
    // Law of total variance over the mixture components.
    const double var = std::max(second_sum[i] * inv - mean * mean, kMinOutputStd * kMinOutputStd);
    out[i] = {mean, std::sqrt(var), std::clamp(prob_sum[i] * inv, 0.0, 1.0)};
  }
  return out;
}

}  // namespace plantune

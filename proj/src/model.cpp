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

#include "plantune/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "plantune/error.hpp"
#include "plantune/io.hpp"
#include "plantune/log.hpp"

namespace plantune {

namespace {

constexpr double kMinScale = 1e-6;

std::vector<std::size_t> Range(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> out(end - begin);
  std::iota(out.begin(), out.end(), begin);
  return out;
}

TaskData MakeTaskData(Var x, std::span<const LabeledSample> samples, const TargetScaler& scaler) {
  TaskData d;
  d.x = x;
  d.perf.reserve(samples.size());
  d.failed.reserve(samples.size());
  for (const LabeledSample& s : samples) {
    d.failed.push_back(s.failed ? 1 : 0);
    d.perf.push_back(s.failed ? 0.0 : scaler.Transform(s.latency_s));
  }
  return d;
}

TargetScaler FitScaler(std::span<const LabeledSample> samples) {
  std::vector<double> ok;
  for (const LabeledSample& s : samples) {
    if (!s.failed) ok.push_back(s.latency_s);
  }
  TargetScaler scaler;
  scaler.Fit(ok);
  return scaler;
}

}  // namespace

void TargetScaler::Fit(std::span<const double> latencies) {
  mean_ = 0.0;
  stddev_ = 1.0;
  if (latencies.empty()) return;
  double sum = 0.0;
  for (double l : latencies) {
    if (!(l > 0.0)) Fail(ErrorKind::kNumeric, "latency must be positive for log scaling");
    sum += std::log(l);
  }
  mean_ = sum / static_cast<double>(latencies.size());
  double ss = 0.0;
  for (double l : latencies) ss += (std::log(l) - mean_) * (std::log(l) - mean_);
  const double sd = std::sqrt(ss / static_cast<double>(latencies.size()));
  stddev_ = sd > kMinScale ? sd : 1.0;
}

double TargetScaler::Transform(double latency) const {
  if (!(latency > 0.0)) Fail(ErrorKind::kNumeric, "latency must be positive for log scaling");
  return (std::log(latency) - mean_) / stddev_;
}

double TargetScaler::Inverse(double standardized) const { return standardized * stddev_ + mean_; }

TunerModel::TunerModel(const std::vector<QueryPlan>& corpus, std::size_t knob_count, ModelOptions options)
    : options_(options),
      vocab_(FeatureVocabulary::Build(corpus)),
      encoder_(vocab_.Dimension() + 1 + options.encoder.spectral_k, knob_count, options.encoder),
      predictor_([&] {
        PredictorOptions p = options.predictor;
        p.input_dim = options.encoder.dim;
        return p;
      }()) {
  if (corpus.empty()) Fail(ErrorKind::kUsage, "model needs a nonempty plan corpus");
  for (const QueryPlan& plan : corpus) {
    if (!plans_.emplace(plan.query_id, plan).second) {
      Fail(ErrorKind::kConfig, "duplicate query id in corpus: " + plan.query_id);
    }
    prepared_.emplace(plan.query_id, PreparePlan(plan, vocab_, options_.encoder.spectral_k));
  }
  options_.predictor.input_dim = options_.encoder.dim;
  Rng rng = Rng::Derive(options_.seed, 0x1a17);
  encoder_.Register(params_, rng);
  predictor_.Register(params_, rng);
}

const PreparedPlan& TunerModel::plan(const std::string& query_id) const {
  auto it = prepared_.find(query_id);
  if (it == prepared_.end()) Fail(ErrorKind::kLookup, "unknown query: " + query_id);
  return it->second;
}

void TunerModel::SetCorrelation(const CorrelationMatrix& correlation) {
  for (auto& [id, prepared] : prepared_) AttachCorrelation(prepared, plans_.at(id), correlation);
}

std::vector<EncodeItem> TunerModel::Items(std::span<const LabeledSample> samples) const {
  std::vector<EncodeItem> items;
  items.reserve(samples.size());
  for (const LabeledSample& s : samples) items.push_back({&plan(s.query_id), s.theta});
  return items;
}

FitReport TunerModel::Fit(std::span<const LabeledSample> samples, std::size_t epochs, Rng& rng) {
  FitReport report;
  if (samples.size() < 4) {
    log::Info("fit skipped: " + std::to_string(samples.size()) + " observations, need at least 4");
    report.skipped = true;
    return report;
  }
  const TargetScaler scaler = FitScaler(samples);
  const std::size_t batch = std::min(samples.size(), std::max<std::size_t>(options_.max_batch, 4));
  std::vector<std::size_t> order = Range(0, samples.size());
  std::vector<LabeledSample> picked(batch);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = 0; i < batch; ++i) {
      std::swap(order[i], order[i + rng.Below(order.size() - i)]);
      picked[i] = samples[order[i]];
    }
    const std::size_t half = batch / 2;
    Tape tape;
    const Var x = encoder_.Encode(tape, params_, Items(picked));
    const std::span<const LabeledSample> all(picked);
    const TaskData context = MakeTaskData(ad::GatherRows(x, Range(0, half)), all.first(half), scaler);
    const TaskData targets = MakeTaskData(ad::GatherRows(x, Range(half, batch)), all.subspan(half), scaler);
    const LatentNoise noise = DrawNoise(rng);
    const Var loss = predictor_.ElboLoss(params_, context, targets, noise);
    tape.Backward(loss);
    params_.AdamStep(options_.adam);
    report.losses.push_back(loss.value()[0]);
  }
  return report;
}

Matrix TunerModel::Encode(std::span<const LabeledSample> items) const {
  if (items.empty()) return Matrix(0, encoder_.dim());
  Tape tape;
  return encoder_.Encode(tape, params_, Items(items)).value();
}

Matrix TunerModel::Encode(const std::string& query_id, std::span<const Configuration> thetas) const {
  if (thetas.empty()) return Matrix(0, encoder_.dim());
  const PreparedPlan& p = plan(query_id);
  std::vector<EncodeItem> items;
  items.reserve(thetas.size());
  for (const Configuration& t : thetas) items.push_back({&p, t});
  Tape tape;
  return encoder_.Encode(tape, params_, items).value();
}

std::vector<Prediction> TunerModel::Predict(std::span<const LabeledSample> context, const Matrix& context_x,
                                            const Matrix& target_x, const LatentNoise& noise) const {
  if (context.empty()) Fail(ErrorKind::kUsage, "predict: empty context");
  if (context_x.rows() != context.size()) Fail(ErrorKind::kDimension, "predict: context encodings do not match");
  if (target_x.rows() == 0) return {};
  const TargetScaler scaler = FitScaler(context);
  Tape tape;
  const TaskData data = MakeTaskData(tape.Constant(context_x), context, scaler);
  const auto raw = predictor_.Predict(params_, data, tape.Constant(target_x), noise);
  std::vector<Prediction> out;
  out.reserve(raw.size());
  for (const RawPrediction& r : raw) {
    out.push_back({scaler.Inverse(r.perf_mean), r.perf_std * scaler.stddev(), r.fail_prob});
  }
  return out;
}

std::vector<Prediction> TunerModel::Predict(std::span<const LabeledSample> context,
                                            std::span<const LabeledSample> targets, Rng& rng) const {
  const LatentNoise noise = DrawNoise(rng);
  return Predict(context, Encode(context), Encode(targets), noise);
}

nlohmann::json TunerModel::CheckpointJson() const {
  return {{"format", "plantune-model"},
          {"version", 1},
          {"encoder_dim", options_.encoder.dim},
          {"spectral_k", options_.encoder.spectral_k},
          {"latent_dim", options_.predictor.latent_dim},
          {"hidden_dim", options_.predictor.hidden_dim},
          {"knob_count", encoder_.knob_count()},
          {"vocabulary", vocab_.ToJson()},
          {"params", params_.ToJson()}};
}

void TunerModel::SaveCheckpoint(const std::string& path) const {
  io::WriteFileAtomic(path, CheckpointJson().dump() + "\n");
}

void TunerModel::LoadCheckpoint(const std::string& path) {
  const nlohmann::json j = io::ReadJson(path);
  if (j.value("format", "") != "plantune-model") Fail(ErrorKind::kConfig, path + ": not a model checkpoint");
  if (j.at("knob_count").get<std::size_t>() != encoder_.knob_count() ||
      j.at("encoder_dim").get<std::size_t>() != options_.encoder.dim ||
      j.at("vocabulary") != vocab_.ToJson()) {
    Fail(ErrorKind::kConfig, path + ": checkpoint does not match this corpus or knob space");
  }
  ParamStore loaded = ParamStore::FromJson(j.at("params"));
  if (loaded.size() != params_.size()) Fail(ErrorKind::kConfig, path + ": parameter layout mismatch");
  for (const auto& [name, p] : loaded.all()) {
    if (!params_.Contains(name) || !params_.Get(name).value.SameShape(p.value)) {
      Fail(ErrorKind::kConfig, path + ": parameter layout mismatch at " + name);
    }
  }
  params_ = std::move(loaded);
}

void WriteLossCsv(const std::string& path, std::span<const double> losses) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) out << i + 1 << ',' << losses[i] << '\n';
  io::WriteFileAtomic(path, out.str());
}

}  // namespace plantune

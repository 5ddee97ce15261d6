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

#include <gtest/gtest.h>

#include <cmath>

#include "plantune/engine.hpp"
#include "plantune/error.hpp"
#include "plantune/model.hpp"
#include "testkit.hpp"

namespace plantune {
namespace {

ModelOptions SmallModel(std::uint64_t seed) {
  ModelOptions o;
  o.encoder.dim = 8;
  o.encoder.spectral_k = 3;
  o.predictor.latent_dim = 6;
  o.predictor.hidden_dim = 8;
  o.predictor.samples = 2;
  o.adam.lr = 5e-3;
  o.max_batch = 16;
  o.seed = seed;
  return o;
}

std::vector<LabeledSample> Samples(const Scenario& s, std::size_t n, std::uint64_t seed) {
  SimulatedEngine engine(s, seed);
  Rng rng(seed);
  std::vector<LabeledSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(s.knobs.size());
    for (double& x : v) x = rng.Uniform();
    const Configuration theta(v);
    const std::string qid = s.queries[i % 3].query_id;
    const ExecutionResult r = engine.Execute(qid, s.knobs.Denormalize(theta), i);
    out.push_back({qid, theta, r.latency_s, r.status != 0});
  }
  return out;
}

TEST(TargetScaler, RoundTrip) {
  TargetScaler scaler;
  const std::vector<double> lat = {0.5, 3.0, 12.25, 0.01, 7.0};
  scaler.Fit(lat);
  double mean = 0.0;
  for (double l : lat) mean += scaler.Transform(l);
  EXPECT_NEAR(mean / 5.0, 0.0, 1e-12);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double l = std::exp(rng.Uniform(-8.0, 8.0));
    EXPECT_NEAR(std::exp(scaler.Inverse(scaler.Transform(l))), l, 1e-9 * l);
  }
  EXPECT_THROW(scaler.Transform(0.0), Error);
}

TEST(TargetScaler, DegenerateInputs) {
  TargetScaler scaler;
  scaler.Fit(std::vector<double>{});
  EXPECT_EQ(scaler.mean(), 0.0);
  EXPECT_EQ(scaler.stddev(), 1.0);
  scaler.Fit(std::vector<double>{4.0, 4.0});
  EXPECT_EQ(scaler.stddev(), 1.0);
  EXPECT_NEAR(scaler.mean(), std::log(4.0), 1e-15);
}

class ModelTest : public ::testing::Test {
 protected:
  Scenario scenario = Scenario::Load(testkit::DataPath("synth-small.json"));
  std::vector<QueryPlan> corpus{scenario.plans.begin(), scenario.plans.begin() + 3};
};

TEST_F(ModelTest, FitRecordsOneLossPerEpoch) {
  TunerModel model(corpus, 10, SmallModel(1));
  const auto samples = Samples(scenario, 24, 1);
  Rng rng(2);
  const FitReport report = model.Fit(samples, 7, rng);
  EXPECT_FALSE(report.skipped);
  EXPECT_EQ(report.losses.size(), 7u);
  for (double l : report.losses) EXPECT_TRUE(std::isfinite(l));
}

TEST_F(ModelTest, TooFewObservationsSkipTraining) {
  TunerModel model(corpus, 10, SmallModel(1));
  const nlohmann::json before = model.params().ToJson();
  const auto samples = Samples(scenario, 3, 1);
  Rng rng(2);
  const FitReport report = model.Fit(samples, 5, rng);
  EXPECT_TRUE(report.skipped);
  EXPECT_TRUE(report.losses.empty());
  EXPECT_EQ(model.params().ToJson(), before);
}

TEST_F(ModelTest, SameSeedSameParameters) {
  const auto samples = Samples(scenario, 20, 3);
  auto train = [&] {
    TunerModel model(corpus, 10, SmallModel(4));
    Rng rng(5);
    model.Fit(samples, 4, rng);
    return model.params().ToJson();
  };
  EXPECT_EQ(train(), train());
  TunerModel other(corpus, 10, SmallModel(6));
  EXPECT_NE(other.params().ToJson(), TunerModel(corpus, 10, SmallModel(4)).params().ToJson());
}

TEST_F(ModelTest, PredictionsAreInRange) {
  TunerModel model(corpus, 10, SmallModel(7));
  const auto samples = Samples(scenario, 30, 7);
  Rng rng(8);
  model.Fit(samples, 3, rng);
  const std::span<const LabeledSample> all(samples);
  const auto preds = model.Predict(all.first(20), all.subspan(20), rng);
  ASSERT_EQ(preds.size(), 10u);
  for (const Prediction& p : preds) {
    EXPECT_TRUE(std::isfinite(p.perf_mean));
    EXPECT_GT(p.perf_std, 0.0);
    EXPECT_GE(p.fail_prob, 0.0);
    EXPECT_LE(p.fail_prob, 1.0);
  }
  EXPECT_THROW(model.Predict({}, all.subspan(20), rng), Error);
}

TEST_F(ModelTest, CheckpointRestoresPredictions) {
  testkit::TempDir dir("model");
  const auto samples = Samples(scenario, 24, 9);
  TunerModel trained(corpus, 10, SmallModel(9));
  Rng rng(10);
  trained.Fit(samples, 3, rng);
  trained.SaveCheckpoint(dir.File("model.json"));

  TunerModel restored(corpus, 10, SmallModel(11));
  restored.LoadCheckpoint(dir.File("model.json"));
  const std::span<const LabeledSample> all(samples);
  Rng r1(12), r2(12);
  const auto a = trained.Predict(all.first(12), all.subspan(12), r1);
  const auto b = restored.Predict(all.first(12), all.subspan(12), r2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].perf_mean, b[i].perf_mean);
    EXPECT_EQ(a[i].fail_prob, b[i].fail_prob);
  }

  TunerModel wrong(corpus, 9, SmallModel(9));
  try {
    wrong.LoadCheckpoint(dir.File("model.json"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST_F(ModelTest, UnknownQueryIsLookupError) {
  TunerModel model(corpus, 10, SmallModel(1));
  try {
    model.plan("q20");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kLookup);
  }
}

TEST_F(ModelTest, LossCsvLayout) {
  testkit::TempDir dir("loss");
  WriteLossCsv(dir.File("loss.csv"), std::vector<double>{1.5, 0.25});
  EXPECT_EQ(testkit::ReadText(dir.File("loss.csv")), "epoch,loss\n1,1.5\n2,0.25\n");
}

}  // namespace
}  // namespace plantune

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

#include <algorithm>
#include <cmath>

#include "harness.hpp"
#include "plantune/correlation.hpp"
#include "plantune/error.hpp"
#include "testkit.hpp"

namespace plantune {
namespace {

std::vector<double> RandomPoint(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.Uniform();
  return v;
}

std::vector<NodeTiming> Synthetic(std::size_t count, std::size_t knobs, Rng& rng,
                                  const std::function<double(const std::vector<double>&)>& f) {
  std::vector<NodeTiming> out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::vector<double> s = RandomPoint(rng, knobs);
    out.push_back({0, 0, Configuration(s), f(s)});
  }
  return out;
}

RidgeOptions Linear(double lambda) {
  RidgeOptions o;
  o.degree = 1;
  o.lambda = lambda;
  return o;
}

TimingCollection SmallCollection(std::uint64_t seed, std::size_t samples) {
  const Scenario s = Scenario::Load(testkit::DataPath("synth-small.json"));
  SimulatedEngine engine(s, seed);
  Rng rng(seed);
  std::vector<Configuration> thetas;
  for (std::size_t i = 0; i < samples; ++i) {
    std::vector<double> v = RandomPoint(rng, 10);
    v[0] = 0.6 + 0.4 * v[0];  // stay clear of the memory failure region
    v[1] = 0.5 * v[1];
    thetas.push_back(s.knobs.Snap(Configuration(v)));
  }
  std::uint64_t next = 0;
  return CollectTimings(engine, {"q01", "q02", "q03", "q04"}, thetas, next);
}

TEST(Timings, OneTripletPerNodeAndSample) {
  const QueryPlan plan = testkit::ChainPlan(5, "c");
  std::vector<AnalyzedRun> runs;
  Rng rng(1);
  for (int i = 0; i < 10; ++i) {
    ExecutionResult r;
    r.node_times = {0.1, 0.2, 0.3, 0.4, 0.5};
    r.latency_s = 1.5;
    runs.push_back({"c", Configuration(RandomPoint(rng, 2)), r});
  }
  ExecutionResult failed;
  failed.status = 1;
  failed.latency_s = 100.0;
  runs.push_back({"c", Configuration({0.5, 0.5}), failed});
  const TimingCollection tc = TimingsFromRuns({plan}, {"a", "b"}, runs);
  EXPECT_EQ(tc.triplets.size(), 50u);
  EXPECT_EQ(tc.failed_runs, 1u);
  EXPECT_EQ(tc.node_types, (std::vector<std::string>{"Filter", "TableScan"}));
  const auto groups = tc.ByType();
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].size(), 40u);
  EXPECT_EQ(groups[1].size(), 10u);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (const NodeTiming& t : groups[g]) {
      EXPECT_EQ(t.node_type, g);
      EXPECT_GE(t.time_s, 0.0);
    }
}

TEST(Timings, CollectFromEngine) {
  const TimingCollection tc = SmallCollection(2, 6);
  EXPECT_FALSE(tc.error.has_value());
  std::size_t nodes = 0;
  const Scenario s = Scenario::Load(testkit::DataPath("synth-small.json"));
  for (std::size_t q = 0; q < 4; ++q) nodes += s.plans[q].nodes.size();
  EXPECT_EQ(tc.failed_runs, 0u);
  EXPECT_EQ(tc.triplets.size(), nodes * 6);
  for (const NodeTiming& t : tc.triplets) EXPECT_GT(t.time_s, 0.0);
}

TEST(Timings, EngineErrorKeepsPartialCollection) {
  const testkit::FunctionEngine engine(testkit::UnitKnobs(2), {"a", "b"}, [](const std::string& q, const Configuration&, std::uint64_t) {
    if (q == "b") Fail(ErrorKind::kEngine, "boom");
    ExecutionResult r;
    r.latency_s = 3.0;
    return r;
  });
  const std::vector<Configuration> thetas = {Configuration({0.1, 0.2}), Configuration({0.3, 0.4})};
  std::uint64_t next = 0;
  const TimingCollection tc = CollectTimings(engine, {"a", "b"}, thetas, next);
  ASSERT_TRUE(tc.error.has_value());
  EXPECT_EQ(tc.triplets.size(), 6u);
}

TEST(Ridge, PureNoiseGivesSmallWeights) {
  Rng rng(3);
  const auto rows = Synthetic(500, 4, rng, [&](const std::vector<double>&) { return 1.0 + 0.01 * rng.Normal(); });
  const RidgeModel m = RidgeModel::Fit(rows, 4, Linear(1e-3));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_LT(std::abs(m.LinearWeight(j)), 0.05);
}

TEST(Ridge, RecoversExactLinearWeight) {
  Rng rng(4);
  const auto rows = Synthetic(60, 3, rng, [](const std::vector<double>& s) { return 2.0 * s[0]; });
  const RidgeModel m = RidgeModel::Fit(rows, 3, Linear(1e-12));
  EXPECT_NEAR(m.LinearWeight(0), 2.0, 1e-6);
  EXPECT_NEAR(m.LinearWeight(1), 0.0, 1e-6);
  EXPECT_NEAR(m.intercept(), 0.0, 1e-6);
  EXPECT_NEAR(m.Predict(std::vector<double>{0.25, 0.9, 0.1}), 0.5, 1e-6);
}

TEST(Ridge, ConstantTargetGivesZeroWeights) {
  Rng rng(5);
  const auto rows = Synthetic(40, 3, rng, [](const std::vector<double>&) { return 4.5; });
  const RidgeModel m = RidgeModel::Fit(rows, 3, RidgeOptions{});
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t p = 1; p <= m.degree(); ++p) EXPECT_NEAR(m.Weight(j, p), 0.0, 1e-12);
  EXPECT_NEAR(m.intercept(), 4.5, 1e-12);
}

TEST(Ridge, QuadraticFeaturesFitAnInteriorOptimum) {
  Rng rng(6);
  const auto rows = Synthetic(80, 2, rng, [](const std::vector<double>& s) { return 1.0 + 3.0 * (s[1] - 0.4) * (s[1] - 0.4); });
  RidgeOptions o;
  o.lambda = 1e-12;
  const RidgeModel m = RidgeModel::Fit(rows, 2, o);
  EXPECT_NEAR(m.Weight(1, 2), 3.0, 1e-6);
  EXPECT_NEAR(m.Weight(1, 1), -2.4, 1e-6);
  EXPECT_NEAR(m.Weight(0, 1), 0.0, 1e-6);
}

TEST(Ridge, InactiveKnobsKeepZeroWeight) {
  Rng rng(7);
  const auto rows = Synthetic(50, 3, rng, [](const std::vector<double>& s) { return s[0] + s[2]; });
  const std::vector<std::uint8_t> active = {1, 1, 0};
  const RidgeModel m = RidgeModel::Fit(rows, 3, Linear(1e-9), active);
  EXPECT_EQ(m.LinearWeight(2), 0.0);
}

TEST(Selection, DropsIrrelevantKnobs) {
  Rng rng(8);
  const auto rows = Synthetic(300, 5, rng, [&](const std::vector<double>& s) {
    return 2.0 * (s[1] - 0.5) * (s[1] - 0.5) + 0.7 * s[3] + 0.01 * rng.Normal();
  });
  const auto kept = SelectKnobs(rows, 5, RidgeOptions{}, 1e-3, 1);
  EXPECT_EQ(kept, (std::vector<std::uint8_t>{0, 1, 0, 1, 0}));
}

TEST(Shapley, ExactMatchesIndependentOracle) {
  Rng rng(9);
  const auto f = [](std::span<const double> x) { return x[0] * x[1] + std::sin(x[2]) + x[3] * x[3] * x[4]; };
  std::vector<std::vector<double>> background;
  for (int i = 0; i < 7; ++i) background.push_back(RandomPoint(rng, 5));
  const std::vector<double> x = RandomPoint(rng, 5);
  const auto mine = ShapleyExact(f, x, background);
  const auto oracle = harness::ExactShapley([&](const std::vector<double>& v) { return f(v); }, x, background);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(mine[j], oracle[j], 1e-12);
}

TEST(Shapley, EfficiencyAxiom) {
  Rng rng(10);
  const auto f = [](std::span<const double> x) { return std::exp(x[0] - x[1]) + x[2] * x[3] - x[4] * x[5] * x[0]; };
  std::vector<std::vector<double>> background;
  for (int i = 0; i < 12; ++i) background.push_back(RandomPoint(rng, 6));
  for (int trial = 0; trial < 10; ++trial) {
    const std::vector<double> x = RandomPoint(rng, 6);
    const auto phi = ShapleyExact(f, x, background);
    double sum = 0.0, mean = 0.0;
    for (double p : phi) sum += p;
    for (const auto& b : background) mean += f(b);
    mean /= static_cast<double>(background.size());
    EXPECT_NEAR(sum, f(x) - mean, 1e-6);
  }
}

TEST(Shapley, DummyKnobGetsZero) {
  Rng rng(11);
  const auto f = [](std::span<const double> x) { return 3.0 * x[0] - 1.5 * x[2] + 0.0 * x[1]; };
  std::vector<std::vector<double>> background;
  for (int i = 0; i < 9; ++i) background.push_back(RandomPoint(rng, 3));
  const std::vector<double> x = RandomPoint(rng, 3);
  EXPECT_EQ(ShapleyExact(f, x, background)[1], 0.0);
  EXPECT_EQ(ShapleySampled(f, x, background, 500, rng)[1], 0.0);
}

TEST(Shapley, SampledMatchesExact) {
  for (std::size_t n : {3u, 6u, 10u}) {
    Rng rng(12 + n);
    const auto f = [](std::span<const double> x) {
      double v = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) v += (1.0 + 0.3 * static_cast<double>(i)) * (x[i] - 0.5) * (x[i] - 0.5);
      return std::exp(v);
    };
    std::vector<std::vector<double>> background;
    for (int i = 0; i < 15; ++i) background.push_back(RandomPoint(rng, n));
    const std::vector<double> x = RandomPoint(rng, n);
    const auto exact = ShapleyExact(f, x, background);
    const auto sampled = ShapleySampled(f, x, background, 2000, rng);
    for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(sampled[j], exact[j], 0.05) << "n=" << n << " j=" << j;
  }
}

TEST(Importance, InvariantToTripletOrder) {
  TimingCollection tc = SmallCollection(13, 30);
  CorrelationOptions o;
  o.shapley.permutations = 200;
  const ImportanceReport a = ComputeImportance(tc, o);
  Rng rng(14);
  for (std::size_t i = tc.triplets.size(); i > 1; --i) std::swap(tc.triplets[i - 1], tc.triplets[rng.Below(i)]);
  const ImportanceReport b = ComputeImportance(tc, o);
  EXPECT_EQ(a.importance, b.importance);
  EXPECT_EQ(a.mean_prediction, b.mean_prediction);
  for (const auto& row : a.importance)
    for (double v : row) EXPECT_GE(v, 0.0);
}

TEST(Importance, InsufficientTypesAreFullyCorrelated) {
  TimingCollection tc = SmallCollection(15, 1);
  const ImportanceReport r = ComputeImportance(tc, CorrelationOptions{});
  const CorrelationMatrix m = BuildMatrix(r, 0.01);
  for (std::size_t t = 0; t < r.node_types.size(); ++t) {
    EXPECT_EQ(r.insufficient[t], 1);
    for (std::size_t j = 0; j < 10; ++j) EXPECT_TRUE(m.At(t, j));
  }
}

TEST(BuildMatrix, ThresholdBehaviour) {
  ImportanceReport r;
  r.node_types = {"A", "B"};
  r.knobs = {"x", "y", "z"};
  r.importance = {{0.0, 0.2, 0.05}, {0.0, 0.0, 0.0}};
  r.mean_prediction = {2.0, 1.0};
  r.insufficient = {0, 0};
  const CorrelationMatrix zero = BuildMatrix(r, 0.0);
  EXPECT_FALSE(zero.At(0, 0));
  EXPECT_TRUE(zero.At(0, 1));
  EXPECT_TRUE(zero.At(0, 2));
  for (std::size_t j = 0; j < 3; ++j) EXPECT_FALSE(zero.At(1, j));
  const CorrelationMatrix mid = BuildMatrix(r, 0.05);  // threshold 0.1 for A
  EXPECT_TRUE(mid.At(0, 1));
  EXPECT_FALSE(mid.At(0, 2));
  EXPECT_THROW(BuildMatrix(r, -1.0), Error);
}

TEST(BuildMatrix, MonotoneInEpsilon) {
  const ImportanceReport r = ComputeImportance(SmallCollection(16, 30), [] {
    CorrelationOptions o;
    o.shapley.permutations = 200;
    return o;
  }());
  std::size_t previous = std::numeric_limits<std::size_t>::max();
  for (double eps : {0.0, 0.001, 0.01, 0.05, 0.1, 0.5, 1.0, 10.0}) {
    const CorrelationMatrix m = BuildMatrix(r, eps);
    EXPECT_LE(m.CountOnes(), previous);
    if (eps > 0.0) {
      const CorrelationMatrix looser = BuildMatrix(r, eps / 2.0);
      for (std::size_t t = 0; t < r.node_types.size(); ++t)
        for (std::size_t j = 0; j < r.knobs.size(); ++j)
          if (m.At(t, j)) { EXPECT_TRUE(looser.At(t, j)); }
    }
    previous = m.CountOnes();
  }
}

TEST(Score, PrecisionAndRecall) {
  const Scenario s = Scenario::Load(testkit::DataPath("synth-small.json"));
  CorrelationMatrix m(s.node_types, s.knobs.Names());
  for (std::size_t t = 0; t < s.node_types.size(); ++t)
    for (std::size_t j = 0; j < 10; ++j) m.Set(t, j, s.Truth(t, j));
  MatrixScore perfect = ScoreAgainstTruth(m, s);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  m.Set(0, 0, !s.Truth(0, 0));
  const MatrixScore off = ScoreAgainstTruth(m, s);
  EXPECT_TRUE(off.precision < 1.0 || off.recall < 1.0);
}

}  // namespace
}  // namespace plantune

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

#include "harness.hpp"
#include "plantune/error.hpp"
#include "plantune/layers.hpp"
#include "plantune/predictor.hpp"
#include "testkit.hpp"

namespace plantune {
namespace {

PredictorOptions SmallOptions() {
  PredictorOptions o;
  o.input_dim = 4;
  o.latent_dim = 5;
  o.hidden_dim = 6;
  o.samples = 2;
  return o;
}

struct Bench {
  DualTaskPredictor predictor{SmallOptions()};
  ParamStore params;
  explicit Bench(std::uint64_t seed) {
    Rng rng(seed);
    predictor.Register(params, rng);
  }
};

TEST(Abstract, FailedRowsLeavePerformanceSetOnly) {
  Bench s(1);
  Tape t;
  Rng rng(2);
  const TaskData data{t.Constant(testkit::RandomMatrix(3, 4, rng)), {0.1, 0.4, 0.0}, {0, 0, 1}};
  const Abstraction a = s.predictor.Abstract(s.params, data);
  EXPECT_EQ(a.perf_rows.size(), 2u);
  EXPECT_EQ(a.r_perf.rows(), 2u);
  EXPECT_EQ(a.r_rel.rows(), 3u);
  EXPECT_EQ(a.u_rel.rows(), 3u);
  EXPECT_EQ(a.r_rel.cols(), 5u);
  EXPECT_EQ(a.u_perf.cols(), 5u);

  const TaskData all_ok{data.x, data.perf, {0, 0, 0}};
  const Abstraction b = s.predictor.Abstract(s.params, all_ok);
  EXPECT_EQ(b.perf_rows.size(), 3u);
  EXPECT_EQ(b.x_rel.value(), a.x_rel.value());
}

TEST(Abstract, IdenticalPairsGiveIdenticalRows) {
  Bench s(3);
  Tape t;
  Matrix x(2, 4);
  for (std::size_t c = 0; c < 4; ++c) x(0, c) = x(1, c) = 0.25 * static_cast<double>(c);
  const Abstraction a = s.predictor.Abstract(s.params, {t.Constant(x), {0.7, 0.7}, {0, 0}});
  for (std::size_t c = 0; c < 5; ++c) {
    EXPECT_EQ(a.r_perf.value()(0, c), a.r_perf.value()(1, c));
    EXPECT_EQ(a.u_rel.value()(0, c), a.u_rel.value()(1, c));
  }
}

TEST(Abstract, EmptySetIsUsageError) {
  Bench s(4);
  Tape t;
  try {
    s.predictor.Abstract(s.params, {t.Constant(Matrix(0, 4)), {}, {}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUsage);
  }
}

TEST(Kl, ClosedFormValues) {
  const std::vector<double> zero(3, 0.0), one(3, 1.0);
  EXPECT_EQ(KlDiagonal(zero, one, zero, one), 0.0);
  EXPECT_NEAR(KlDiagonal(zero, one, one, one), 1.5, 1e-15);
  EXPECT_NEAR(KlDiagonal(std::vector<double>{0.0}, std::vector<double>{1.0}, std::vector<double>{0.0},
                         std::vector<double>{2.0}),
              std::log(2.0) + 0.125 - 0.5, 1e-15);
}

TEST(Kl, NonNegativeAndTapeAgrees) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> mq(4), sq(4), mp(4), sp(4);
    for (std::size_t i = 0; i < 4; ++i) {
      mq[i] = rng.Uniform(-3, 3);
      mp[i] = rng.Uniform(-3, 3);
      sq[i] = rng.Uniform(0.05, 4);
      sp[i] = rng.Uniform(0.05, 4);
    }
    const double kl = KlDiagonal(mq, sq, mp, sp);
    EXPECT_GE(kl, 0.0);
    Tape t;
    const LatentGaussian q{t.Constant(Matrix(1, 4, mq)), t.Constant(Matrix(1, 4, sq))};
    const LatentGaussian p{t.Constant(Matrix(1, 4, mp)), t.Constant(Matrix(1, 4, sp))};
    EXPECT_NEAR(KlDiagonal(q, p).value()[0], kl, 1e-12 * std::max(1.0, kl));
    EXPECT_NEAR(KlDiagonal(q, q).value()[0], 0.0, 1e-14);
  }
}

TEST(Aggregate, SingleContextReturnsItsRepresentation) {
  Bench s(6);
  Tape t;
  Rng rng(7);
  const Abstraction c = s.predictor.Abstract(s.params, {t.Constant(testkit::RandomMatrix(1, 4, rng)), {0.3}, {0}});
  const Var r = s.predictor.AggregateDeterministic(s.params, Task::kPerformance,
                                                   t.Constant(testkit::RandomMatrix(3, 4, rng)), c);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(r.value()(i, k), c.r_perf.value()(0, k), 1e-15);
}

TEST(Aggregate, DuplicateContextMatchesSingleCopy) {
  Bench s(8);
  Tape t;
  Rng rng(9);
  const Matrix x = testkit::RandomMatrix(1, 4, rng);
  Matrix x2(2, 4);
  for (std::size_t c = 0; c < 4; ++c) x2(0, c) = x2(1, c) = x(0, c);
  const Var targets = t.Constant(testkit::RandomMatrix(2, 4, rng));
  const Abstraction one = s.predictor.Abstract(s.params, {t.Constant(x), {0.5}, {1}});
  const Abstraction two = s.predictor.Abstract(s.params, {t.Constant(x2), {0.5, 0.5}, {1, 1}});
  const Matrix a = s.predictor.AggregateDeterministic(s.params, Task::kReliability, targets, one).value();
  const Matrix b = s.predictor.AggregateDeterministic(s.params, Task::kReliability, targets, two).value();
  EXPECT_LE(MaxAbsDiff(a, b), 1e-14);
}

TEST(Aggregate, MatchingContextGetsTheLargestWeight) {
  Bench s(10);
  Matrix eye(4, 4);
  for (std::size_t i = 0; i < 4; ++i) eye(i, i) = 4.0;
  s.params.Get("np.agg.rel.wq").value = eye;
  s.params.Get("np.agg.rel.wk").value = eye;
  Tape t;
  const Matrix xc(3, 4, {1, 0, 0, 0, -1, 0, 0, 0, 0, -1, 0, 0});
  const Matrix xd(1, 4, {1, 0, 0, 0});
  // Raw scores 16, -16 and 0 before any scaling.
  const Abstraction c = s.predictor.Abstract(s.params, {t.Constant(xc), {0, 0, 0}, {0, 1, 0}});
  ad::AttentionTrace trace;
  s.predictor.AggregateDeterministic(s.params, Task::kReliability, t.Constant(xd), c, &trace);
  const Matrix& w = trace.weights.at(0);
  EXPECT_GT(w(0, 0), w(0, 1));
  EXPECT_GT(w(0, 0), w(0, 2));
  EXPECT_GT(w(0, 0), 0.99);
}

TEST(Gate, ZeroWeightsPassThrough) {
  Bench s(11);
  for (const char* part : {".tanh.w", ".tanh.b", ".sig.w", ".sig.b"}) {
    Parameter& p = s.params.Get(std::string("np.gate.r_perf") + part);
    p.value = Matrix(p.value.rows(), p.value.cols());
  }
  Tape t;
  Rng rng(12);
  const Matrix po = testkit::RandomMatrix(3, 5, rng);
  const Matrix out =
      s.predictor.Gate(s.params, "np.gate.r_perf", t.Constant(po), t.Constant(testkit::RandomMatrix(3, 5, rng))).value();
  EXPECT_EQ(out, po);
}

TEST(Gate, SaturatedBiasesAddOne) {
  Bench s(13);
  for (const char* part : {".tanh.w", ".sig.w"}) {
    Parameter& p = s.params.Get(std::string("np.gate.h_rel") + part);
    p.value = Matrix(p.value.rows(), p.value.cols());
  }
  for (const char* part : {".tanh.b", ".sig.b"}) {
    Parameter& p = s.params.Get(std::string("np.gate.h_rel") + part);
    for (double& v : p.value.data()) v = 40.0;
  }
  Tape t;
  Rng rng(14);
  const Matrix po = testkit::RandomMatrix(2, 5, rng);
  const Matrix out =
      s.predictor.Gate(s.params, "np.gate.h_rel", t.Constant(po), t.Constant(testkit::RandomMatrix(2, 5, rng))).value();
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], po[i] + 1.0, 1e-12);
}

TEST(Gate, GradientMatchesFiniteDifferences) {
  ParamStore store;
  Rng rng(15);
  layers::RegisterLinear(store, "g.tanh", 5, 5, rng);
  layers::RegisterLinear(store, "g.sig", 5, 5, rng);
  for (const char* b : {"g.tanh.b", "g.sig.b"})
    for (double& v : store.Get(b).value.data()) v = rng.Uniform(-0.5, 0.5);
  DualTaskPredictor predictor(SmallOptions());
  const Matrix po = testkit::RandomMatrix(3, 5, rng);
  const Matrix pc = testkit::RandomMatrix(3, 5, rng);
  const Matrix w = testkit::RandomMatrix(3, 5, rng);
  auto loss = [&](Tape& t) {
    return ad::Sum(ad::Mul(predictor.Gate(store, "g", t.Constant(po), t.Constant(pc)), t.Constant(w)));
  };
  const auto results = testkit::CheckStoreGradient(store, loss, 1e-6, 1e-4, 0, 15);
  EXPECT_EQ(results.size(), 60u);
  EXPECT_TRUE(harness::AllPass(results)) << harness::MaxValue(results, 2);
}

TEST(Elbo, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u}) {
    testkit::ElboToy toy = testkit::MakeElboToy(seed);
    auto loss = [&](Tape& t) { return testkit::ElboLossOf(toy, toy.params, t); };
    const auto results = testkit::CheckStoreGradient(toy.params, loss, 1e-5, 1e-3, 0, seed);
    EXPECT_EQ(results.size(), toy.params.ScalarCount());
    EXPECT_TRUE(harness::AllPass(results)) << harness::MaxValue(results, 2);
  }
}

TEST(Elbo, SameSetsGiveZeroKl) {
  testkit::ElboToy toy = testkit::MakeElboToy(3);
  DualTaskPredictor predictor(toy.options);
  Tape t;
  const TaskData set{t.Constant(toy.context_x), toy.context_perf, toy.context_failed};
  ElboTerms terms;
  predictor.ElboLoss(toy.params, set, set, toy.noise, &terms);
  EXPECT_EQ(terms.kl_z, 0.0);
  EXPECT_EQ(terms.kl_h_perf, 0.0);
  EXPECT_EQ(terms.kl_h_rel, 0.0);
}

TEST(Elbo, ConfidentCorrectClassifierHasZeroBernoulliTerm) {
  testkit::ElboToy toy = testkit::MakeElboToy(4);
  Parameter& w = toy.params.Get("np.dec.rel.l2.w");
  w.value = Matrix(w.value.rows(), w.value.cols());
  toy.params.Get("np.dec.rel.l2.b").value(0, 0) = 60.0;
  toy.target_failed.assign(4, 1);
  Tape t;
  ElboTerms terms;
  testkit::ElboLossOf(toy, toy.params, t, &terms);
  EXPECT_LE(std::abs(terms.log_lik_rel), 1e-20);
  EXPECT_EQ(terms.log_lik_perf, 0.0);
}

TEST(Elbo, KlTermsAreNonNegative) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    testkit::ElboToy toy = testkit::MakeElboToy(seed);
    Tape t;
    ElboTerms terms;
    testkit::ElboLossOf(toy, toy.params, t, &terms);
    EXPECT_GE(terms.kl_z, 0.0);
    EXPECT_GE(terms.kl_h_perf, 0.0);
    EXPECT_GE(terms.kl_h_rel, 0.0);
  }
}

TEST(Elbo, EmptyTargetsIsUsageError) {
  testkit::ElboToy toy = testkit::MakeElboToy(5);
  DualTaskPredictor predictor(toy.options);
  Tape t;
  const TaskData context{t.Constant(toy.context_x), toy.context_perf, toy.context_failed};
  const TaskData empty{t.Constant(Matrix(0, toy.options.input_dim)), {}, {}};
  try {
    predictor.ElboLoss(toy.params, context, empty, toy.noise);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUsage);
  }
}

TEST(Predict, RangesAndDeterminism) {
  testkit::ElboToy toy = testkit::MakeElboToy(6);
  DualTaskPredictor predictor(toy.options);
  auto run = [&] {
    Tape t;
    const TaskData context{t.Constant(toy.context_x), toy.context_perf, toy.context_failed};
    return predictor.Predict(toy.params, context, t.Constant(toy.target_x), toy.noise);
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_GT(a[i].fail_prob, 0.0);
    EXPECT_LT(a[i].fail_prob, 1.0);
    EXPECT_GT(a[i].perf_std, 0.0);
    EXPECT_EQ(a[i].perf_mean, b[i].perf_mean);
    EXPECT_EQ(a[i].perf_std, b[i].perf_std);
    EXPECT_EQ(a[i].fail_prob, b[i].fail_prob);
  }
}

TEST(Predict, RepeatedZeroNoiseEqualsSingleDecode) {
  testkit::ElboToy toy = testkit::MakeElboToy(7);
  DualTaskPredictor predictor(toy.options);
  LatentNoise one, two;
  const Matrix zero(1, toy.options.latent_dim);
  one.z = one.h_perf = one.h_rel = {zero};
  two.z = two.h_perf = two.h_rel = {zero, zero};
  Tape t;
  const TaskData context{t.Constant(toy.context_x), toy.context_perf, toy.context_failed};
  const auto a = predictor.Predict(toy.params, context, t.Constant(toy.target_x), one);
  const auto b = predictor.Predict(toy.params, context, t.Constant(toy.target_x), two);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i].perf_mean, b[i].perf_mean, 1e-14);
    EXPECT_NEAR(a[i].perf_std, b[i].perf_std, 1e-7);
    EXPECT_NEAR(a[i].fail_prob, b[i].fail_prob, 1e-15);
  }
}

TEST(Predict, MixtureMomentsMatchPerSampleDecodes) {
  testkit::ElboToy toy = testkit::MakeElboToy(8);
  DualTaskPredictor predictor(toy.options);
  Tape t;
  const TaskData context{t.Constant(toy.context_x), toy.context_perf, toy.context_failed};
  const auto mixed = predictor.Predict(toy.params, context, t.Constant(toy.target_x), toy.noise);
  std::vector<RawPrediction> parts[2];
  for (std::size_t s = 0; s < 2; ++s) {
    LatentNoise single;
    single.z = {toy.noise.z[s]};
    single.h_perf = {toy.noise.h_perf[s]};
    single.h_rel = {toy.noise.h_rel[s]};
    parts[s] = predictor.Predict(toy.params, context, t.Constant(toy.target_x), single);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    const RawPrediction &p0 = parts[0][i], &p1 = parts[1][i];
    const double mean = 0.5 * (p0.perf_mean + p1.perf_mean);
    const double second = 0.5 * (p0.perf_std * p0.perf_std + p0.perf_mean * p0.perf_mean +
                                 p1.perf_std * p1.perf_std + p1.perf_mean * p1.perf_mean);
    EXPECT_NEAR(mixed[i].perf_mean, mean, 1e-12);
    EXPECT_NEAR(mixed[i].perf_std, std::sqrt(second - mean * mean), 1e-10);
    EXPECT_NEAR(mixed[i].fail_prob, 0.5 * (p0.fail_prob + p1.fail_prob), 1e-15);
  }
}

TEST(Predict, AllFailedContextUsesEmptyEmbedding) {
  testkit::ElboToy toy = testkit::MakeElboToy(9);
  DualTaskPredictor predictor(toy.options);
  Tape t;
  const TaskData context{t.Constant(toy.context_x), toy.context_perf, {1, 1, 1, 1}};
  const auto out = predictor.Predict(toy.params, context, t.Constant(toy.target_x), toy.noise);
  for (const auto& p : out) {
    EXPECT_TRUE(std::isfinite(p.perf_mean));
    EXPECT_GT(p.perf_std, 0.0);
  }
}

TEST(InferZ, ContextOrderDoesNotMatter) {
  Bench s(16);
  Rng rng(17);
  const Matrix x = testkit::RandomMatrix(4, 4, rng);
  Matrix rev(4, 4);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) rev(r, c) = x(3 - r, c);
  Tape t;
  const auto a = s.predictor.InferZ(s.params, s.predictor.Abstract(s.params, {t.Constant(x), {1, 2, 3, 4}, {0, 1, 0, 0}}));
  const auto b = s.predictor.InferZ(s.params, s.predictor.Abstract(s.params, {t.Constant(rev), {4, 3, 2, 1}, {0, 0, 1, 0}}));
  EXPECT_LE(MaxAbsDiff(a.mean.value(), b.mean.value()), 1e-14);
  EXPECT_LE(MaxAbsDiff(a.stddev.value(), b.stddev.value()), 1e-14);
  for (double v : a.stddev.value().data()) EXPECT_GT(v, 0.0);
}

}  // namespace
}  // namespace plantune

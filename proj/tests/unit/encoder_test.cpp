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

#include "harness.hpp"
#include "plantune/encoder.hpp"
#include "plantune/error.hpp"
#include "testkit.hpp"

namespace plantune {
namespace {

struct Fixture {
  QueryPlan plan;
  FeatureVocabulary vocab;
  PreparedPlan prepared;
  ParamStore params;
  std::unique_ptr<KnobPlanEncoder> encoder;

  Fixture(QueryPlan p, std::size_t knobs, std::uint64_t seed) : plan(std::move(p)) {
    vocab = FeatureVocabulary::Build({plan});
    prepared = PreparePlan(plan, vocab, 10);
    encoder = std::make_unique<KnobPlanEncoder>(prepared.inputs.cols(), knobs, EncoderOptions{});
    Rng rng(seed);
    encoder->Register(params, rng);
  }

  Matrix Encode(const Configuration& c, EncoderTrace* trace = nullptr) {
    Tape tape;
    const EncodeItem item{&prepared, c};
    return encoder->Encode(tape, params, std::span<const EncodeItem>(&item, 1), trace).value();
  }
};

TEST(Attention, IdenticalKeysReturnTheValueRow) {
  Tape t;
  Rng rng(1);
  const Matrix q = testkit::RandomMatrix(3, 4, rng);
  Matrix k(5, 4), v(5, 2);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 4; ++c) k(r, c) = 0.3 * static_cast<double>(c);
    v(r, 0) = 1.25;
    v(r, 1) = -0.5;
  }
  auto layout = std::make_shared<ad::AttentionLayout>();
  layout->groups.push_back({0, 3, 0, 5, {}});
  const Matrix out = ad::GroupedAttention(t.Constant(q), t.Constant(k), t.Constant(v), layout).value();
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_NEAR(out(r, 0), 1.25, 1e-15);
    EXPECT_NEAR(out(r, 1), -0.5, 1e-15);
  }
}

TEST(Attention, SingleAllowedKeySelectsItsValue) {
  Tape t;
  Rng rng(2);
  const Matrix q = testkit::RandomMatrix(2, 3, rng);
  const Matrix k = testkit::RandomMatrix(4, 3, rng);
  const Matrix v = testkit::RandomMatrix(4, 2, rng);
  auto layout = std::make_shared<ad::AttentionLayout>();
  layout->groups.push_back({0, 2, 0, 4, {0, 0, 1, 0, 1, 0, 0, 0}});
  ad::AttentionTrace trace;
  const Matrix out = ad::GroupedAttention(t.Constant(q), t.Constant(k), t.Constant(v), layout, &trace).value();
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_EQ(out(0, c), v(2, c));
    EXPECT_EQ(out(1, c), v(0, c));
  }
  EXPECT_EQ(trace.weights[0](0, 0), 0.0);
  EXPECT_EQ(trace.weights[0](0, 2), 1.0);
}

TEST(Attention, FullyMaskedRowFallsBackToUniform) {
  Tape t;
  Rng rng(3);
  auto layout = std::make_shared<ad::AttentionLayout>();
  layout->groups.push_back({0, 2, 0, 4, {0, 0, 0, 0, 1, 1, 0, 1}});
  ad::AttentionTrace trace;
  ad::GroupedAttention(t.Constant(testkit::RandomMatrix(2, 3, rng)), t.Constant(testkit::RandomMatrix(4, 3, rng)),
                       t.Constant(testkit::RandomMatrix(4, 2, rng)), layout, &trace);
  EXPECT_EQ(trace.fallback_rows, 1u);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(trace.weights[0](0, j), 0.25);
  EXPECT_EQ(trace.weights[0](1, 2), 0.0);
}

TEST(Attention, WeightsSumToOne) {
  const testkit::MaskCheck check = testkit::CheckMaskedAttention(7, 10);
  EXPECT_GT(check.masked_pairs, 0u);
  EXPECT_EQ(check.max_masked_weight, 0.0);
}

TEST(Attention, MaskShapeMismatchIsDimensionError) {
  Tape t;
  auto layout = std::make_shared<ad::AttentionLayout>();
  layout->groups.push_back({0, 2, 0, 2, {1, 1, 1}});
  try {
    ad::GroupedAttention(t.Constant(Matrix(2, 2)), t.Constant(Matrix(2, 2)), t.Constant(Matrix(2, 2)), layout);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
  }
}

TEST(EncodePlan, OutputLengthMatchesNodeCount) {
  Rng rng(4);
  Fixture f(testkit::RandomTree(7, rng), 3, 1);
  Tape tape;
  const PreparedPlan* plans[] = {&f.prepared};
  const Var nodes = f.encoder->EncodePlans(tape, f.params, plans);
  EXPECT_EQ(nodes.rows(), 7u);
  EXPECT_EQ(nodes.cols(), 32u);
}

TEST(EncodePlan, SingleNodeAttendsToItself) {
  Fixture f(testkit::ChainPlan(1), 2, 2);
  Tape tape;
  ad::AttentionTrace trace;
  const PreparedPlan* plans[] = {&f.prepared};
  f.encoder->EncodePlans(tape, f.params, plans, &trace);
  ASSERT_EQ(trace.weights.size(), 1u);
  EXPECT_EQ(trace.weights[0](0, 0), 1.0);
}

TEST(EncodePlan, SelfAttentionRespectsAdjacency) {
  Rng rng(5);
  Fixture f(testkit::RandomTree(9, rng), 2, 3);
  Tape tape;
  ad::AttentionTrace trace;
  const PreparedPlan* plans[] = {&f.prepared};
  f.encoder->EncodePlans(tape, f.params, plans, &trace);
  const auto adj = AdjacencyMask(f.plan);
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 9; ++j)
      if (!adj[i * 9 + j]) { EXPECT_EQ(trace.weights[0](i, j), 0.0); }
}

TEST(EncodePlan, ReorderedNodesGiveTheSameOutputRows) {
  Rng rng(10);
  Fixture f(testkit::RandomTree(6, rng), 2, 9);
  const std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
  PreparedPlan shuffled = f.prepared;
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t c = 0; c < f.prepared.inputs.cols(); ++c) shuffled.inputs(i, c) = f.prepared.inputs(perm[i], c);
    for (std::size_t j = 0; j < 6; ++j) shuffled.adjacency[i * 6 + j] = f.prepared.adjacency[perm[i] * 6 + perm[j]];
  }
  Tape ta, tb;
  const PreparedPlan* pa[] = {&f.prepared};
  const PreparedPlan* pb[] = {&shuffled};
  const Matrix oa = f.encoder->EncodePlans(ta, f.params, pa).value();
  const Matrix ob = f.encoder->EncodePlans(tb, f.params, pb).value();
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t c = 0; c < oa.cols(); ++c) EXPECT_NEAR(ob(i, c), oa(perm[i], c), 1e-12);

  const Configuration theta({0.3, 0.8});
  const Matrix ea = f.Encode(theta);
  f.prepared = shuffled;
  const Matrix eb = f.Encode(theta);
  for (std::size_t c = 0; c < ea.cols(); ++c) EXPECT_NEAR(ea(0, c), eb(0, c), 1e-12);
}

TEST(EncodeKnobs, LengthAndDeterminism) {
  Fixture f(testkit::ChainPlan(3), 5, 4);
  const Configuration c({0.1, 0.2, 0.3, 0.4, 0.5});
  Tape t1, t2;
  const Matrix a = f.encoder->EncodeKnobs(t1, f.params, std::span<const Configuration>(&c, 1)).value();
  const Matrix b = f.encoder->EncodeKnobs(t2, f.params, std::span<const Configuration>(&c, 1)).value();
  EXPECT_EQ(a.rows(), 5u);
  EXPECT_EQ(a, b);
}

TEST(EncodeKnobs, ChangingOneKnobChangesItsEmbedding) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Fixture f(testkit::ChainPlan(2), 4, seed);
    Rng rng(seed + 1000);
    std::vector<double> base(4);
    for (double& v : base) v = rng.Uniform(0.05, 0.95);
    const std::size_t i = seed % 4;
    std::vector<double> moved = base;
    moved[i] = base[i] > 0.5 ? base[i] - 0.3 : base[i] + 0.3;
    const std::vector<Configuration> cs = {Configuration(base), Configuration(moved)};
    Tape t;
    const Matrix e = f.encoder->EncodeKnobs(t, f.params, cs).value();
    double diff = 0.0;
    for (std::size_t c = 0; c < e.cols(); ++c) diff = std::max(diff, std::abs(e(i, c) - e(4 + i, c)));
    EXPECT_GT(diff, 1e-9) << "seed " << seed;
  }
}

TEST(EncodeKnobs, WidthMismatchIsDimensionError) {
  Fixture f(testkit::ChainPlan(2), 3, 1);
  const Configuration c({0.5, 0.5});
  Tape t;
  EXPECT_THROW(f.encoder->EncodeKnobs(t, f.params, std::span<const Configuration>(&c, 1)), Error);
}

TEST(CrossEncode, OutputIs32Wide) {
  Rng rng(6);
  Fixture f(testkit::RandomTree(6, rng), 3, 5);
  const Matrix out = f.Encode(Configuration({0.5, 0.1, 0.9}));
  EXPECT_EQ(out.rows(), 1u);
  EXPECT_EQ(out.cols(), 32u);
}

TEST(CrossEncode, AllOnesMaskEqualsUnmasked) {
  const testkit::MaskCheck check = testkit::CheckMaskedAttention(11, 20);
  EXPECT_LE(check.all_ones_difference, 1e-12);
}

TEST(CrossEncode, ZeroMaskRowUsesUniformWeights) {
  Rng rng(7);
  Fixture f(testkit::RandomTree(5, rng), 3, 6);
  f.prepared.knob_mask = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 0, 1, 0, 1};
  EncoderTrace trace;
  f.Encode(Configuration({0.2, 0.4, 0.6}), &trace);
  EXPECT_EQ(trace.cross.fallback_rows, 1u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(trace.cross.weights[0](0, i), 0.2);
}

TEST(CrossEncode, RandomMasksNeverLeakWeight) {
  const testkit::MaskCheck check = testkit::CheckMaskedAttention(13, 50);
  EXPECT_EQ(check.max_masked_weight, 0.0);
  EXPECT_LE(check.max_fallback_deviation, 1e-15);
}

TEST(Encoder, GradientMatchesFiniteDifferences) {
  const auto results = testkit::CheckEncoderGradient(1, 1e-4);
  EXPECT_TRUE(harness::AllPass(results)) << harness::MaxValue(results, 2);
}

TEST(Encoder, BatchEncodingMatchesSingleItems) {
  Rng rng(8);
  Fixture f(testkit::RandomTree(6, rng), 3, 7);
  const Configuration a({0.1, 0.5, 0.9}), b({0.7, 0.3, 0.2});
  Tape t;
  const std::vector<EncodeItem> items = {{&f.prepared, a}, {&f.prepared, b}};
  const Matrix both = f.encoder->Encode(t, f.params, items).value();
  const Matrix ea = f.Encode(a), eb = f.Encode(b);
  for (std::size_t c = 0; c < 32; ++c) {
    EXPECT_NEAR(both(0, c), ea(0, c), 1e-12);
    EXPECT_NEAR(both(1, c), eb(0, c), 1e-12);
  }
}

TEST(CorrelationMatrix, ExpandAndJson) {
  CorrelationMatrix m({"Filter", "TableScan"}, {"a", "b"});
  m.Set(0, 1, true);
  m.Set(1, 0, true);
  const QueryPlan p = testkit::ChainPlan(3);  // Filter, Filter, TableScan
  const auto mask = m.ExpandForPlan(p);
  EXPECT_EQ(mask, (std::vector<std::uint8_t>{0, 0, 1, 1, 1, 0}));
  EXPECT_EQ(CorrelationMatrix::FromJson(m.ToJson()), m);
  EXPECT_EQ(m.CountOnes(), 2u);
  nlohmann::json bad = m.ToJson();
  bad["matrix"][0][0] = 2;
  EXPECT_THROW(CorrelationMatrix::FromJson(bad), Error);
}

TEST(CorrelationMatrix, UnknownOperatorIsFullyCorrelated) {
  CorrelationMatrix m({"Sort"}, {"a", "b"});
  EXPECT_EQ(m.ExpandForPlan(testkit::ChainPlan(2)), (std::vector<std::uint8_t>{1, 1, 1, 1}));
}

}  // namespace
}  // namespace plantune

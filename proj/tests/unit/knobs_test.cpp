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

#include "plantune/error.hpp"
#include "plantune/knobs.hpp"

namespace plantune {
namespace {

KnobSpace MixedSpace() {
  return KnobSpace({{"mem", KnobKind::kContinuous, 100.0, 500.0, {}},
                    {"par", KnobKind::kDiscrete, 1.0, 16.0, {}},
                    {"filter", KnobKind::kCategorical, 0.0, 1.0, {"off", "on"}},
                    {"join", KnobKind::kCategorical, 0.0, 2.0, {"hash", "merge", "nested"}}});
}

TEST(Normalize, SpecExamples) {
  const KnobSpace s = MixedSpace();
  const Configuration t = s.Normalize(std::vector<double>{300.0, 1.0, 1.0, 0.0});
  EXPECT_DOUBLE_EQ(t[0], 0.5);
  EXPECT_DOUBLE_EQ(t[1], 0.0);
  EXPECT_DOUBLE_EQ(t[2], 1.0);
  EXPECT_DOUBLE_EQ(t[3], 0.0);
  EXPECT_DOUBLE_EQ(s.Normalize(std::vector<double>{100.0, 16.0, 0.0, 2.0})[0], 0.0);
}

TEST(Normalize, OutOfDomainIsUsageError) {
  const KnobSpace s = MixedSpace();
  try {
    s.Normalize(std::vector<double>{600.0, 1.0, 0.0, 0.0});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUsage);
  }
  EXPECT_THROW(s.Normalize(std::vector<double>{200.0}), Error);
}

TEST(Normalize, CategoryLookup) {
  const KnobSpace s = MixedSpace();
  EXPECT_EQ(s[2].CategoryIndex("on"), 1u);
  EXPECT_THROW(s[2].CategoryIndex("maybe"), Error);
}

TEST(Normalize, RoundTripProperty) {
  const KnobSpace s = MixedSpace();
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> raw = {rng.Uniform(100.0, 500.0), static_cast<double>(1 + rng.Below(16)),
                                     static_cast<double>(rng.Below(2)), static_cast<double>(rng.Below(3))};
    const std::vector<double> back = s.Denormalize(s.Normalize(raw));
    EXPECT_NEAR(back[0], raw[0], 1e-12);
    EXPECT_EQ(back[1], raw[1]);
    EXPECT_EQ(back[2], raw[2]);
    EXPECT_EQ(back[3], raw[3]);
  }
}

TEST(Normalize, SnapIsIdempotent) {
  const KnobSpace s = MixedSpace();
  Rng rng(4);
  for (const Configuration& c : SampleUniform(4, 200, rng)) {
    const Configuration once = s.Snap(c);
    EXPECT_EQ(s.Snap(once), once);
    EXPECT_DOUBLE_EQ(once[0], c[0]);
  }
}

TEST(Configuration, RejectsOutOfRangeCoordinates) {
  EXPECT_THROW(Configuration({0.5, 1.5}), Error);
  EXPECT_THROW(Configuration({std::nan("")}), Error);
  EXPECT_NO_THROW(Configuration({0.0, 1.0}));
}

TEST(WeightedOneHot, WorkedExample) {
  const Matrix m = WeightedOneHot(Configuration({0.3, 0.6, 0.9}));
  EXPECT_EQ(m, Matrix::FromRows({{0.3, 0, 0}, {0, 0.6, 0}, {0, 0, 0.9}}));
}

TEST(WeightedOneHot, ZeroAndSingleKnob) {
  EXPECT_EQ(WeightedOneHot(Configuration({0.0, 0.0})), Matrix(2, 2));
  EXPECT_EQ(WeightedOneHot(Configuration({0.7})), Matrix::FromRows({{0.7}}));
}

TEST(WeightedOneHot, InjectiveOnPositiveConfigurations) {
  Rng rng(5);
  const auto a = SampleUniform(5, 100, rng);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) EXPECT_NE(WeightedOneHot(a[i]), WeightedOneHot(a[j]));
}

TEST(SampleUniform, SeededAndBounded) {
  Rng r1(9), r2(9);
  const auto a = SampleUniform(6, 50, r1);
  EXPECT_EQ(a, SampleUniform(6, 50, r2));
  for (const auto& c : a)
    for (double v : c.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
}

TEST(SampleUniform, EmpiricalMeanNearHalf) {
  Rng rng(10);
  const auto a = SampleUniform(4, 10000, rng);
  for (std::size_t d = 0; d < 4; ++d) {
    double mean = 0.0;
    for (const auto& c : a) mean += c[d];
    mean /= 10000.0;
    EXPECT_GE(mean, 0.45);
    EXPECT_LE(mean, 0.55);
  }
}

TEST(Perturb, ZeroRadiusIsIdentity) {
  Rng rng(1);
  const Configuration c({0.2, 0.8, 0.5});
  EXPECT_EQ(Perturb(c, 0.0, rng), c);
}

TEST(Perturb, BoundedDisplacementAndDomain) {
  Rng rng(2);
  for (const Configuration& c : SampleUniform(5, 500, rng)) {
    const Configuration p = Perturb(c, 0.1, rng);
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_LE(std::abs(p[i] - c[i]), 0.1 + 1e-15);
      EXPECT_GE(p[i], 0.0);
      EXPECT_LE(p[i], 1.0);
    }
  }
}

TEST(KnobSpace, JsonRoundTripAndErrors) {
  const KnobSpace s = MixedSpace();
  const KnobSpace back = KnobSpace::FromJson(s.ToJson());
  EXPECT_EQ(back.ToJson(), s.ToJson());
  nlohmann::json bad = s.ToJson();
  bad["knobs"][0]["min"] = 900.0;
  EXPECT_THROW(KnobSpace::FromJson(bad), Error);
  nlohmann::json dup = s.ToJson();
  dup["knobs"][1]["name"] = "mem";
  EXPECT_THROW(KnobSpace::FromJson(dup), Error);
}

}  // namespace
}  // namespace plantune

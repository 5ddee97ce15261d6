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

#ifndef PLANTUNE_KNOBS_HPP_
#define PLANTUNE_KNOBS_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "plantune/matrix.hpp"
#include "plantune/rng.hpp"

namespace plantune {

enum class KnobKind { kContinuous, kDiscrete, kCategorical };

struct KnobSpec {
  std::string name;
  KnobKind kind = KnobKind::kContinuous;
  double min = 0.0;
  double max = 1.0;
  std::vector<std::string> categories;  // categorical only

  std::size_t CategoryIndex(const std::string& category) const;
};

// A point in the normalized space [0, 1]^n.
class Configuration {
 public:
  Configuration() = default;
  // Throws kUsage if any coordinate is outside [0, 1] or not finite.
  explicit Configuration(std::vector<double> theta);

  std::size_t size() const { return theta_.size(); }
  double operator[](std::size_t i) const { return theta_[i]; }
  std::span<const double> values() const { return theta_; }
  const std::vector<double>& vector() const { return theta_; }

  friend bool operator==(const Configuration&, const Configuration&) = default;
  friend auto operator<=>(const Configuration& a, const Configuration& b) {
    return a.theta_ <=> b.theta_;
  }

 private:
  std::vector<double> theta_;
};

// Ordered knob list; order is fixed for a tuning session. Raw values are
// plain numbers, categorical knobs use the category index.
class KnobSpace {
 public:
  KnobSpace() = default;
  explicit KnobSpace(std::vector<KnobSpec> knobs);

  // Schema: {"knobs": [{"name", "kind": "continuous"|"discrete"|"categorical",
  //                     "min", "max", "categories"}]}
  static KnobSpace FromJson(const nlohmann::json& j);
  static KnobSpace Load(const std::string& path);
  nlohmann::json ToJson() const;

  std::size_t size() const { return knobs_.size(); }
  const KnobSpec& operator[](std::size_t i) const { return knobs_[i]; }
  const std::vector<KnobSpec>& knobs() const { return knobs_; }
  std::optional<std::size_t> IndexOf(const std::string& name) const;
  std::vector<std::string> Names() const;

  // Min-max scaling; categorical maps index / (count - 1). Throws kUsage for
  // out-of-domain values.
  Configuration Normalize(std::span<const double> raw) const;
  // Inverse scaling; discrete values round to the nearest integer and
  // categorical values to the nearest category.
  std::vector<double> Denormalize(const Configuration& theta) const;
  // Normalize(Denormalize(theta)): the point the engine actually sees.
  Configuration Snap(const Configuration& theta) const;

 private:
  std::vector<KnobSpec> knobs_;
};

// Row i carries theta_i at column i, zero elsewhere.
Matrix WeightedOneHot(const Configuration& theta);

std::vector<Configuration> SampleUniform(std::size_t dims, std::size_t count, Rng& rng);

// Adds U(-radius, radius) noise per coordinate and clamps to [0, 1].
Configuration Perturb(const Configuration& theta, double radius, Rng& rng);

}  // namespace plantune

#endif  // PLANTUNE_KNOBS_HPP_

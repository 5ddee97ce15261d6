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

#include "plantune/knobs.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "plantune/error.hpp"
#include "plantune/io.hpp"

namespace plantune {

std::size_t KnobSpec::CategoryIndex(const std::string& category) const {
  for (std::size_t i = 0; i < categories.size(); ++i)
    if (categories[i] == category) return i;
  Fail(ErrorKind::kUsage, "knob " + name + ": unknown category '" + category + "'");
}

Configuration::Configuration(std::vector<double> theta) : theta_(std::move(theta)) {
  for (std::size_t i = 0; i < theta_.size(); ++i) {
    if (!(theta_[i] >= 0.0 && theta_[i] <= 1.0)) {
      Fail(ErrorKind::kUsage, "configuration coordinate " + std::to_string(i) +
                                  " outside [0,1]: " + std::to_string(theta_[i]));
    }
  }
}

KnobSpace::KnobSpace(std::vector<KnobSpec> knobs) : knobs_(std::move(knobs)) {
  std::set<std::string> names;
  for (const auto& k : knobs_) {
    if (!names.insert(k.name).second) Fail(ErrorKind::kConfig, "duplicate knob name " + k.name);
    if (k.kind == KnobKind::kCategorical) {
      if (k.categories.empty()) Fail(ErrorKind::kConfig, "knob " + k.name + ": empty category list");
    } else if (!(k.min < k.max)) {
      Fail(ErrorKind::kConfig, "knob " + k.name + ": min must be below max");
    }
  }
}

KnobSpace KnobSpace::FromJson(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("knobs") || !j["knobs"].is_array()) {
    Fail(ErrorKind::kConfig, "knob space: missing field 'knobs'");
  }
  std::vector<KnobSpec> specs;
  for (std::size_t i = 0; i < j["knobs"].size(); ++i) {
    const auto& jk = j["knobs"][i];
    const std::string where = "knobs[" + std::to_string(i) + "]";
    KnobSpec k;
    if (!jk.contains("name")) Fail(ErrorKind::kConfig, where + ": missing field 'name'");
    if (!jk.contains("kind")) Fail(ErrorKind::kConfig, where + ": missing field 'kind'");
    k.name = jk["name"].get<std::string>();
    const std::string kind = jk["kind"].get<std::string>();
    if (kind == "continuous") k.kind = KnobKind::kContinuous;
    else if (kind == "discrete") k.kind = KnobKind::kDiscrete;
    else if (kind == "categorical") k.kind = KnobKind::kCategorical;
    else Fail(ErrorKind::kConfig, where + ".kind: unknown kind '" + kind + "'");
    if (k.kind == KnobKind::kCategorical) {
      if (!jk.contains("categories")) Fail(ErrorKind::kConfig, where + ": missing field 'categories'");
      k.categories = jk["categories"].get<std::vector<std::string>>();
    } else {
      if (!jk.contains("min")) Fail(ErrorKind::kConfig, where + ": missing field 'min'");
      if (!jk.contains("max")) Fail(ErrorKind::kConfig, where + ": missing field 'max'");
      k.min = jk["min"].get<double>();
      k.max = jk["max"].get<double>();
    }
    specs.push_back(std::move(k));
  }
  return KnobSpace(std::move(specs));
}

KnobSpace KnobSpace::Load(const std::string& path) { return FromJson(io::ReadJson(path)); }

nlohmann::json KnobSpace::ToJson() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& k : knobs_) {
    nlohmann::json jk = {{"name", k.name}};
    switch (k.kind) {
      case KnobKind::kContinuous: jk["kind"] = "continuous"; break;
      case KnobKind::kDiscrete: jk["kind"] = "discrete"; break;
      case KnobKind::kCategorical: jk["kind"] = "categorical"; break;
    }
    if (k.kind == KnobKind::kCategorical) {
      jk["categories"] = k.categories;
    } else {
      jk["min"] = k.min;
      jk["max"] = k.max;
    }
    arr.push_back(std::move(jk));
  }
  return {{"knobs", arr}};
}

std::optional<std::size_t> KnobSpace::IndexOf(const std::string& name) const {
  for (std::size_t i = 0; i < knobs_.size(); ++i)
    if (knobs_[i].name == name) return i;
  return std::nullopt;
}

std::vector<std::string> KnobSpace::Names() const {
  std::vector<std::string> names;
  for (const auto& k : knobs_) names.push_back(k.name);
  return names;
}

Configuration KnobSpace::Normalize(std::span<const double> raw) const {
  if (raw.size() != knobs_.size()) {
    Fail(ErrorKind::kUsage, "expected " + std::to_string(knobs_.size()) + " knob values, got " +
                                std::to_string(raw.size()));
  }
  std::vector<double> theta(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const KnobSpec& k = knobs_[i];
    const double v = raw[i];
    if (k.kind == KnobKind::kCategorical) {
      const double count = static_cast<double>(k.categories.size());
      if (v < 0 || v > count - 1 || v != std::floor(v)) {
        Fail(ErrorKind::kUsage, "knob " + k.name + ": category index out of range");
      }
      theta[i] = k.categories.size() == 1 ? 0.0 : v / (count - 1.0);
    } else {
      if (!(v >= k.min && v <= k.max)) {
        Fail(ErrorKind::kUsage, "knob " + k.name + ": value " + std::to_string(v) + " outside domain");
      }
      if (k.kind == KnobKind::kDiscrete && v != std::floor(v)) {
        Fail(ErrorKind::kUsage, "knob " + k.name + ": discrete value must be integral");
      }
      theta[i] = (v - k.min) / (k.max - k.min);
    }
  }
  return Configuration(std::move(theta));
}

std::vector<double> KnobSpace::Denormalize(const Configuration& theta) const {
  if (theta.size() != knobs_.size()) Fail(ErrorKind::kUsage, "configuration size does not match knob space");
  std::vector<double> raw(theta.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const KnobSpec& k = knobs_[i];
    if (k.kind == KnobKind::kCategorical) {
      raw[i] = std::round(theta[i] * static_cast<double>(k.categories.size() - 1));
    } else {
      const double v = k.min + theta[i] * (k.max - k.min);
      raw[i] = k.kind == KnobKind::kDiscrete ? std::clamp(std::round(v), std::ceil(k.min), std::floor(k.max))
                                             : std::clamp(v, k.min, k.max);
    }
  }
  return raw;
}

Configuration KnobSpace::Snap(const Configuration& theta) const {
  std::vector<double> out = theta.vector();
  const Configuration snapped = Normalize(Denormalize(theta));
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (knobs_[i].kind != KnobKind::kContinuous) out[i] = snapped[i];
  }
  return Configuration(std::move(out));
}

Matrix WeightedOneHot(const Configuration& theta) {
  Matrix m(theta.size(), theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) m(i, i) = theta[i];
  return m;
}

std::vector<Configuration> SampleUniform(std::size_t dims, std::size_t count, Rng& rng) {
  std::vector<Configuration> out;
  out.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    std::vector<double> theta(dims);
    for (double& t : theta) t = rng.Uniform();
    out.emplace_back(std::move(theta));
  }
  return out;
}

Configuration Perturb(const Configuration& theta, double radius, Rng& rng) {
  if (radius < 0) Fail(ErrorKind::kUsage, "perturbation radius must be non-negative");
  std::vector<double> out(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double noise = rng.Uniform(-radius, radius);
    out[i] = std::clamp(theta[i] + noise, 0.0, 1.0);
  }
  return Configuration(std::move(out));
}

}  // namespace plantune

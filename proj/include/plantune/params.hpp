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

#ifndef PLANTUNE_PARAMS_HPP_
#define PLANTUNE_PARAMS_HPP_

#include <cstdint>
#include <map>
#include <string>

#include "json.hpp"
#include "plantune/matrix.hpp"
#include "plantune/rng.hpp"

namespace plantune {

struct Parameter {
  Matrix value;
  Matrix grad;    // same shape as value
  Matrix moment1;
  Matrix moment2;
};

// Adaptive-moment optimizer settings.
struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named parameters with gradients and optimizer state. Iteration order is
// lexicographic by name, which fixes the checkpoint layout.
class ParamStore {
 public:
  Parameter& Add(const std::string& name, Matrix init);
  // Uniform in +-sqrt(6 / (fan_in + fan_out)), shape fan_in x fan_out.
  Parameter& AddGlorot(const std::string& name, std::size_t fan_in,
                       std::size_t fan_out, Rng& rng);
  Parameter& AddZeros(const std::string& name, std::size_t rows, std::size_t cols);

  Parameter& Get(const std::string& name);
  const Parameter& Get(const std::string& name) const;
  bool Contains(const std::string& name) const { return params_.count(name) != 0; }

  void ZeroGrad();
  std::size_t size() const { return params_.size(); }
  std::size_t ScalarCount() const;
  std::int64_t step() const { return step_; }

  std::map<std::string, Parameter>& all() { return params_; }
  const std::map<std::string, Parameter>& all() const { return params_; }

  // Adam update of every parameter from its accumulated gradient; zeroes the
  // gradients afterwards.
  void AdamStep(const AdamOptions& opt);

  // Snapshot schema:
  // {"format": "plantune-params", "version": 1, "step": int,
  //  "params": [{"name": str, "rows": int, "cols": int, "data": [...],
  //              "moment1": [...], "moment2": [...]}]}
  nlohmann::json ToJson() const;
  static ParamStore FromJson(const nlohmann::json& j);
  // Copies values (not moments) from another store with identical layout.
  void CopyValuesFrom(const ParamStore& other);

 private:
  std::map<std::string, Parameter> params_;
  std::int64_t step_ = 0;
};

}  // namespace plantune

#endif  // PLANTUNE_PARAMS_HPP_

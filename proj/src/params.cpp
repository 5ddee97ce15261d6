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

#include "plantune/params.hpp"

#include <cmath>

#include "plantune/error.hpp"

namespace plantune {

Parameter& ParamStore::Add(const std::string& name, Matrix init) {
  if (params_.count(name)) Fail(ErrorKind::kUsage, "duplicate parameter " + name);
  Parameter p;
  p.grad = Matrix(init.rows(), init.cols());
  p.moment1 = Matrix(init.rows(), init.cols());
  p.moment2 = Matrix(init.rows(), init.cols());
  p.value = std::move(init);
  return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParamStore::AddGlorot(const std::string& name, std::size_t fan_in,
                                 std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = rng.Uniform(-limit, limit);
  return Add(name, std::move(m));
}

Parameter& ParamStore::AddZeros(const std::string& name, std::size_t rows, std::size_t cols) {
  return Add(name, Matrix(rows, cols));
}

Parameter& ParamStore::Get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) Fail(ErrorKind::kLookup, "unknown parameter " + name);
  return it->second;
}

const Parameter& ParamStore::Get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) Fail(ErrorKind::kLookup, "unknown parameter " + name);
  return it->second;
}

void ParamStore::ZeroGrad() {
  for (auto& [name, p] : params_) p.grad.Fill(0.0);
}

std::size_t ParamStore::ScalarCount() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.value.size();
  return n;
}

void ParamStore::AdamStep(const AdamOptions& opt) {
  ++step_;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step_));
  for (auto& [name, p] : params_) {
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      p.moment1[k] = opt.beta1 * p.moment1[k] + (1.0 - opt.beta1) * g;
      p.moment2[k] = opt.beta2 * p.moment2[k] + (1.0 - opt.beta2) * g * g;
      const double mhat = p.moment1[k] / c1;
      const double vhat = p.moment2[k] / c2;
      p.value[k] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
    p.grad.Fill(0.0);
  }
}

nlohmann::json ParamStore::ToJson() const {
  nlohmann::json j;
  j["format"] = "plantune-params";
  j["version"] = 1;
  j["step"] = step_;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [name, p] : params_) {
    arr.push_back({{"name", name},
                   {"rows", p.value.rows()},
                   {"cols", p.value.cols()},
                   {"data", p.value.values()},
                   {"moment1", p.moment1.values()},
                   {"moment2", p.moment2.values()}});
  }
  j["params"] = std::move(arr);
  return j;
}

ParamStore ParamStore::FromJson(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "plantune-params") {
    Fail(ErrorKind::kConfig, "not a plantune parameter snapshot");
  }
  ParamStore store;
  try {
    store.step_ = j.at("step").get<std::int64_t>();
    for (const auto& e : j.at("params")) {
      const auto rows = e.at("rows").get<std::size_t>();
      const auto cols = e.at("cols").get<std::size_t>();
      const std::string name = e.at("name").get<std::string>();
      Parameter& p = store.Add(name, Matrix(rows, cols, e.at("data").get<std::vector<double>>()));
      if (e.contains("moment1")) p.moment1 = Matrix(rows, cols, e.at("moment1").get<std::vector<double>>());
      if (e.contains("moment2")) p.moment2 = Matrix(rows, cols, e.at("moment2").get<std::vector<double>>());
    }
  } catch (const nlohmann::json::exception& ex) {
    Fail(ErrorKind::kConfig, std::string("malformed parameter snapshot: ") + ex.what());
  }
  return store;
}

void ParamStore::CopyValuesFrom(const ParamStore& other) {
  for (auto& [name, p] : params_) {
    const Parameter& src = other.Get(name);
    if (!src.value.SameShape(p.value)) Fail(ErrorKind::kDimension, "parameter shape mismatch for " + name);
    p.value = src.value;
  }
}

}  // namespace plantune

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

#ifndef PLANTUNE_LAYERS_HPP_
#define PLANTUNE_LAYERS_HPP_

#include <string>

#include "plantune/autodiff.hpp"
#include "plantune/params.hpp"

namespace plantune::layers {

// x W + b with parameters "<name>.w" (in x out) and "<name>.b" (1 x out).
void RegisterLinear(ParamStore& p, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
Var Linear(ParamStore& p, const std::string& name, Var x);

// Two-layer perceptron: Linear -> relu -> Linear.
void RegisterMlp(ParamStore& p, const std::string& name, std::size_t in, std::size_t hidden,
                 std::size_t out, Rng& rng);
Var Mlp(ParamStore& p, const std::string& name, Var x);

}  // namespace plantune::layers

#endif  // PLANTUNE_LAYERS_HPP_

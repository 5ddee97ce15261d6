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

#include "plantune/layers.hpp"

namespace plantune::layers {

void RegisterLinear(ParamStore& p, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  p.AddGlorot(name + ".w", in, out, rng);
  p.AddZeros(name + ".b", 1, out);
}

Var Linear(ParamStore& p, const std::string& name, Var x) {
  Tape& t = *x.tape();
  return ad::AddRow(ad::MatMul(x, t.Param(p.Get(name + ".w"))), t.Param(p.Get(name + ".b")));
}

void RegisterMlp(ParamStore& p, const std::string& name, std::size_t in, std::size_t hidden,
                 std::size_t out, Rng& rng) {
  RegisterLinear(p, name + ".l1", in, hidden, rng);
  RegisterLinear(p, name + ".l2", hidden, out, rng);
}

Var Mlp(ParamStore& p, const std::string& name, Var x) {
  return Linear(p, name + ".l2", ad::Relu(Linear(p, name + ".l1", x)));
}

}  // namespace plantune::layers

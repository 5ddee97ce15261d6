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

#ifndef PLANTUNE_RNG_HPP_
#define PLANTUNE_RNG_HPP_

#include <cstdint>
#include <random>

namespace plantune {

// Seeded generator shared by every stochastic path. Streams are derived by
// mixing a base seed with a stream id so that independent consumers (engine
// calls, particles, model noise) never share state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(Mix(seed)) {}

  static std::uint64_t Mix(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static Rng Derive(std::uint64_t seed, std::uint64_t stream) {
    return Rng(Mix(seed) ^ Mix(stream + 0x632be59bd9b4e019ULL));
  }

  // Uniform in [0, 1).
  double Uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Standard normal via Box-Muller; no cached second variate so that the
  // stream position depends only on the number of calls.
  double Normal();

  std::uint64_t NextU64() { return engine_(); }

  // Uniform integer in [0, n).
  std::uint64_t Below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace plantune

#endif  // PLANTUNE_RNG_HPP_

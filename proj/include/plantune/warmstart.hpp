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

#ifndef PLANTUNE_WARMSTART_HPP_
#define PLANTUNE_WARMSTART_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plantune/engine.hpp"
#include "plantune/knobs.hpp"
#include "plantune/rng.hpp"

namespace plantune {

struct PsoOptions {
  std::size_t particles = 3;
  double inertia = 0.5;  // mu
  double c1 = 2.0;
  double c2 = 2.0;
  double initial_velocity = 0.1;
  bool concurrent = true;  // evaluate a step's particles in parallel
};

struct SwarmBest {
  std::vector<double> position;
  double latency = 0.0;
};

struct Particle {
  std::vector<double> position;
  std::vector<double> velocity;
  std::optional<SwarmBest> local_best;
};

struct Swarm {
  std::vector<Particle> particles;
  std::optional<SwarmBest> global_best;
  PsoOptions options;
  Rng rng;
};

struct ParticleEvaluation {
  double latency = 0.0;
  int status = 0;
};

Swarm InitSwarm(std::size_t knob_count, const PsoOptions& options, Rng rng);

// Updates bests from one evaluation per particle, then moves every particle.
// A failed particle is redrawn uniformly instead of moved.
void StepSwarm(Swarm& swarm, std::span<const ParticleEvaluation> evaluations);
// Same with explicit (r1, r2) per particle.
void StepSwarm(Swarm& swarm, std::span<const ParticleEvaluation> evaluations,
               std::span<const std::pair<double, double>> attraction);

struct WarmSample {
  Configuration theta;  // snapped to the knob domain
  ExecutionResult result;
};

struct WarmstartRun {
  std::vector<WarmSample> samples;
  std::optional<std::string> error;  // set when the engine aborted the run
  std::size_t steps = 0;
};

// Evaluates whole swarm steps until at least required samples exist.
// Engine call ids are consumed from next_call_id in particle order. With
// stop_at_required the last step evaluates only as many particles as are
// still needed, so exactly `required` samples come back.
WarmstartRun RunWarmstart(const std::string& query_id, std::size_t required, const EngineInterface& engine,
                          Swarm& swarm, std::uint64_t& next_call_id, bool analyze = false,
                          bool stop_at_required = false);

}  // namespace plantune

#endif  // PLANTUNE_WARMSTART_HPP_

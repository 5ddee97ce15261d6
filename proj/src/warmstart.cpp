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

#include "plantune/warmstart.hpp"

#include <algorithm>
#include <future>

#include "plantune/error.hpp"

namespace plantune {

namespace {

void Redraw(Particle& p, double velocity_range, Rng& rng) {
  for (double& x : p.position) x = rng.Uniform();
  for (double& v : p.velocity) v = rng.Uniform(-velocity_range, velocity_range);
}

void Improve(std::optional<SwarmBest>& best, const std::vector<double>& position, double latency) {
  if (!best || latency < best->latency) best = SwarmBest{position, latency};
}

}  // namespace

Swarm InitSwarm(std::size_t knob_count, const PsoOptions& options, Rng rng) {
  if (options.particles == 0) Fail(ErrorKind::kUsage, "swarm needs at least one particle");
  if (knob_count == 0) Fail(ErrorKind::kUsage, "swarm needs at least one knob");
  Swarm s{{}, std::nullopt, options, std::move(rng)};
  s.particles.resize(options.particles);
  for (Particle& p : s.particles) {
    p.position.resize(knob_count);
    p.velocity.resize(knob_count);
    Redraw(p, options.initial_velocity, s.rng);
  }
  return s;
}

void StepSwarm(Swarm& swarm, std::span<const ParticleEvaluation> evaluations) {
  std::vector<std::pair<double, double>> r(swarm.particles.size());
  for (auto& [r1, r2] : r) {
    r1 = swarm.rng.Uniform();
    r2 = swarm.rng.Uniform();
  }
  StepSwarm(swarm, evaluations, r);
}

void StepSwarm(Swarm& swarm, std::span<const ParticleEvaluation> evaluations,
               std::span<const std::pair<double, double>> attraction) {
  const std::size_t n = swarm.particles.size();
  if (evaluations.size() != n || attraction.size() != n) {
    Fail(ErrorKind::kUsage, "swarm step needs one evaluation per particle");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (evaluations[i].status != 0) continue;
    Particle& p = swarm.particles[i];
    Improve(p.local_best, p.position, evaluations[i].latency);
    Improve(swarm.global_best, p.position, evaluations[i].latency);
  }
  const PsoOptions& o = swarm.options;
  for (std::size_t i = 0; i < n; ++i) {
    Particle& p = swarm.particles[i];
    if (evaluations[i].status != 0) {
      Redraw(p, o.initial_velocity, swarm.rng);
      continue;
    }
    const auto [r1, r2] = attraction[i];
    for (std::size_t d = 0; d < p.position.size(); ++d) {
      double v = o.inertia * p.velocity[d];
      if (p.local_best) v += o.c1 * r1 * (p.local_best->position[d] - p.position[d]);
      if (swarm.global_best) v += o.c2 * r2 * (swarm.global_best->position[d] - p.position[d]);
      p.velocity[d] = v;
      p.position[d] = std::clamp(p.position[d] + v, 0.0, 1.0);
    }
  }
}

WarmstartRun RunWarmstart(const std::string& query_id, std::size_t required, const EngineInterface& engine,
                          Swarm& swarm, std::uint64_t& next_call_id, bool analyze, bool stop_at_required) {
  if (required == 0) Fail(ErrorKind::kUsage, "warm start needs at least one sample");
  const KnobSpace& space = engine.knob_space();
  WarmstartRun run;
  while (run.samples.size() < required) {
    const std::size_t particles = swarm.particles.size();
    const std::size_t n = stop_at_required ? std::min(particles, required - run.samples.size()) : particles;
    std::vector<WarmSample> batch(n);
    std::vector<std::uint64_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) {
      batch[i].theta = space.Snap(Configuration(swarm.particles[i].position));
      ids[i] = next_call_id++;
    }
    auto evaluate = [&](std::size_t i) {
      const std::vector<double> raw = space.Denormalize(batch[i].theta);
      return analyze ? engine.ExecuteAnalyze(query_id, raw, ids[i]) : engine.Execute(query_id, raw, ids[i]);
    };
    try {
      if (swarm.options.concurrent && n > 1) {
        std::vector<std::future<ExecutionResult>> pending;
        for (std::size_t i = 0; i < n; ++i) pending.push_back(std::async(std::launch::async, evaluate, i));
        for (std::size_t i = 0; i < n; ++i) batch[i].result = pending[i].get();
      } else {
        for (std::size_t i = 0; i < n; ++i) batch[i].result = evaluate(i);
      }
    } catch (const Error& e) {
      run.error = e.what();
      return run;
    }
    std::vector<ParticleEvaluation> evals(n);
    for (std::size_t i = 0; i < n; ++i) {
      evals[i] = {batch[i].result.latency_s, batch[i].result.status};
      run.samples.push_back(std::move(batch[i]));
    }
    if (n < particles) break;  // partial final step, the swarm is not moved
    StepSwarm(swarm, evals);
    ++run.steps;
  }
  return run;
}

}  // namespace plantune

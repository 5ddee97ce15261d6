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

#include "plantune/correlation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "plantune/error.hpp"

namespace plantune {

namespace {

constexpr std::size_t kMaxExactKnobs = 20;
constexpr double kMinTime = 1e-12;

// Draws min(k, n) distinct indices of [0, n) in a seeded order.
std::vector<std::size_t> Subsample(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (k >= n) return idx;
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.Below(n - i)]);
  idx.resize(k);
  return idx;
}

}  // namespace

std::vector<std::vector<NodeTiming>> TimingCollection::ByType() const {
  std::vector<std::vector<NodeTiming>> out(node_types.size());
  for (const NodeTiming& t : triplets) out.at(t.node_type).push_back(t);
  return out;
}

TimingCollection TimingsFromRuns(const std::vector<QueryPlan>& plans, const std::vector<std::string>& knobs,
                                 std::span<const AnalyzedRun> runs) {
  TimingCollection c;
  c.knobs = knobs;
  std::set<std::string> ops;
  for (const QueryPlan& p : plans) {
    for (const PlanNode& n : p.nodes) ops.insert(n.op);
  }
  c.node_types.assign(ops.begin(), ops.end());
  std::map<std::string, std::size_t> type_of;
  for (std::size_t i = 0; i < c.node_types.size(); ++i) type_of[c.node_types[i]] = i;
  std::map<std::string, std::pair<const QueryPlan*, std::size_t>> plan_of;
  std::size_t offset = 0;
  for (const QueryPlan& p : plans) {
    plan_of[p.query_id] = {&p, offset};
    offset += p.nodes.size();
  }
  for (const AnalyzedRun& run : runs) {
    auto it = plan_of.find(run.query_id);
    if (it == plan_of.end()) Fail(ErrorKind::kLookup, "timings: unknown query " + run.query_id);
    if (run.theta.size() != knobs.size()) Fail(ErrorKind::kDimension, "timings: configuration width mismatch");
    if (run.result.status != 0) {
      ++c.failed_runs;
      continue;
    }
    const QueryPlan& plan = *it->second.first;
    if (run.result.node_times.size() != plan.nodes.size()) {
      Fail(ErrorKind::kDimension, "timings: run of " + run.query_id + " lacks per-node times");
    }
    for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
      const double t = run.result.node_times[i];
      if (!(t >= 0.0)) Fail(ErrorKind::kNumeric, "timings: negative node time");
      c.triplets.push_back({type_of.at(plan.nodes[i].op), it->second.second + i, run.theta, t});
    }
  }
  return c;
}

TimingCollection CollectTimings(const EngineInterface& engine, const std::vector<std::string>& queries,
                                std::span<const Configuration> samples, std::uint64_t& next_call_id) {
  std::vector<QueryPlan> plans;
  for (const std::string& q : queries) plans.push_back(engine.Plan(q));
  const KnobSpace& space = engine.knob_space();
  std::vector<AnalyzedRun> runs;
  std::optional<std::string> error;
  try {
    for (const std::string& q : queries) {
      for (const Configuration& theta : samples) {
        const Configuration snapped = space.Snap(theta);
        runs.push_back({q, snapped, engine.ExecuteAnalyze(q, space.Denormalize(snapped), next_call_id++)});
      }
    }
  } catch (const Error& e) {
    error = e.what();
  }
  TimingCollection c = TimingsFromRuns(plans, space.Names(), runs);
  c.error = error;
  return c;
}

namespace {

struct Design {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::RowVectorXd mx;
  double my = 0.0;
};

Design BuildDesign(std::span<const NodeTiming> triplets, std::size_t knob_count, std::size_t deg,
                   bool instance_effects, const std::vector<std::size_t>& used) {
  const std::size_t p = deg * used.size();
  const std::size_t n = triplets.size();
  Design d;
  d.x.resize(n, p);
  d.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (triplets[i].theta.size() != knob_count) Fail(ErrorKind::kDimension, "ridge: configuration width mismatch");
    for (std::size_t u = 0; u < used.size(); ++u) {
      const double s = triplets[i].theta[used[u]];
      double power = 1.0;
      for (std::size_t k = 0; k < deg; ++k) {
        power *= s;
        d.x(i, u * deg + k) = power;
      }
    }
    d.y(i) = triplets[i].time_s;
  }
  d.mx = d.x.colwise().mean();
  d.my = d.y.mean();
  if (instance_effects) {
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[triplets[i].instance].push_back(i);
    for (const auto& [id, rows] : groups) {
      Eigen::RowVectorXd gx = Eigen::RowVectorXd::Zero(p);
      double gy = 0.0;
      for (std::size_t i : rows) {
        gx += d.x.row(i);
        gy += d.y(i);
      }
      gx /= static_cast<double>(rows.size());
      gy /= static_cast<double>(rows.size());
      for (std::size_t i : rows) {
        d.x.row(i) -= gx;
        d.y(i) -= gy;
      }
    }
  } else {
    d.x.rowwise() -= d.mx;
    d.y.array() -= d.my;
  }
  return d;
}

// Residual sum of squares of the ridge solution restricted to the given columns.
double SubsetRss(const Eigen::MatrixXd& gram, const Eigen::VectorXd& xty, double yty, const std::vector<int>& cols,
                 double lambda) {
  if (cols.empty()) return yty;
  const Eigen::MatrixXd g = gram(cols, cols);
  const Eigen::VectorXd b = xty(cols);
  Eigen::MatrixXd reg = g;
  reg.diagonal().array() += lambda;
  const Eigen::VectorXd w = reg.ldlt().solve(b);
  return std::max(yty - 2.0 * w.dot(b) + w.dot(g * w), 0.0);
}

}  // namespace

RidgeModel RidgeModel::Fit(std::span<const NodeTiming> triplets, std::size_t knob_count, const RidgeOptions& options,
                           std::span<const std::uint8_t> active) {
  if (triplets.empty()) Fail(ErrorKind::kUsage, "ridge: no training data");
  if (!(options.lambda >= 0.0)) Fail(ErrorKind::kUsage, "ridge: lambda must be >= 0");
  if (!active.empty() && active.size() != knob_count) Fail(ErrorKind::kDimension, "ridge: active mask width");
  if (options.degree == 0) Fail(ErrorKind::kUsage, "ridge: degree must be >= 1");
  std::vector<std::size_t> used;
  for (std::size_t j = 0; j < knob_count; ++j) {
    if (active.empty() || active[j]) used.push_back(j);
  }
  const std::size_t deg = options.degree;
  const std::size_t p = deg * used.size();
  const Design d = BuildDesign(triplets, knob_count, deg, options.instance_effects, used);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  if (p > 0) {
    Eigen::MatrixXd gram = d.x.transpose() * d.x;
    gram.diagonal().array() += options.lambda;
    w = gram.ldlt().solve(d.x.transpose() * d.y);
  }
  RidgeModel m;
  m.degree_ = deg;
  m.weights_.assign(knob_count * deg, 0.0);
  for (std::size_t u = 0; u < used.size(); ++u) {
    for (std::size_t k = 0; k < deg; ++k) m.weights_[used[u] * deg + k] = w(u * deg + k);
  }
  m.intercept_ = p > 0 ? d.my - d.mx.dot(w) : d.my;
  m.rss_ = (d.y - d.x * w).squaredNorm();
  m.features_ = p;
  if (!std::isfinite(m.intercept_)) Fail(ErrorKind::kNumeric, "ridge: solution is not finite");
  return m;
}

std::vector<std::uint8_t> SelectKnobs(std::span<const NodeTiming> triplets, std::size_t knob_count,
                                      const RidgeOptions& options, double alpha, std::size_t groups) {
  std::vector<std::uint8_t> active(knob_count, 1);
  if (!(alpha > 0.0)) return active;
  if (!(alpha < 1.0)) Fail(ErrorKind::kUsage, "selection alpha must lie in (0, 1)");
  if (triplets.empty()) Fail(ErrorKind::kUsage, "ridge: no training data");
  if (options.degree == 0) Fail(ErrorKind::kUsage, "ridge: degree must be >= 1");
  const std::size_t deg = options.degree;
  std::vector<std::size_t> all(knob_count);
  for (std::size_t j = 0; j < knob_count; ++j) all[j] = j;
  const Design d = BuildDesign(triplets, knob_count, deg, options.instance_effects, all);
  const Eigen::MatrixXd gram = d.x.transpose() * d.x;
  const Eigen::VectorXd xty = d.x.transpose() * d.y;
  const double yty = d.y.squaredNorm();
  auto columns = [&](std::size_t skip) {
    std::vector<int> cols;
    for (std::size_t j = 0; j < knob_count; ++j) {
      if (!active[j] || j == skip) continue;
      for (std::size_t k = 0; k < deg; ++k) cols.push_back(static_cast<int>(j * deg + k));
    }
    return cols;
  };
  const double critical = -std::log(alpha);
  const double per = static_cast<double>(deg);
  for (;;) {
    const std::vector<int> full_cols = columns(knob_count);
    const double full_rss = SubsetRss(gram, xty, yty, full_cols, options.lambda);
    const double dof = static_cast<double>(triplets.size()) - static_cast<double>(full_cols.size() + groups) - 1.0;
    if (dof <= 0.0) return active;
    const double sigma2 = std::max(full_rss / dof, 1e-300);
    std::size_t weakest = knob_count;
    double weakest_f = critical;
    for (std::size_t j = 0; j < knob_count; ++j) {
      if (!active[j]) continue;
      const double rss = SubsetRss(gram, xty, yty, columns(j), options.lambda);
      const double f = (rss - full_rss) / per / sigma2;
      if (f < weakest_f) {
        weakest_f = f;
        weakest = j;
      }
    }
    if (weakest == knob_count) return active;
    active[weakest] = 0;
  }
}

double RidgeModel::Predict(std::span<const double> theta) const {
  double y = intercept_;
  const std::size_t n = knob_count();
  for (std::size_t j = 0; j < n; ++j) {
    const double s = theta[j];
    double power = 1.0;
    for (std::size_t k = 0; k < degree_; ++k) {
      power *= s;
      y += weights_[j * degree_ + k] * power;
    }
  }
  return y;
}

std::vector<double> ShapleySampled(const ValueFunction& f, std::span<const double> x,
                                   const std::vector<std::vector<double>>& background, std::size_t permutations,
                                   Rng& rng) {
  if (permutations == 0) Fail(ErrorKind::kUsage, "shapley: budget must be at least one permutation");
  if (background.empty()) Fail(ErrorKind::kUsage, "shapley: empty background");
  const std::size_t n = x.size();
  std::vector<double> phi(n, 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> rows(background.size());
  std::iota(rows.begin(), rows.end(), 0);
  std::size_t row_cursor = rows.size();
  std::vector<double> z(n);
  const std::vector<double>* b = nullptr;
  for (std::size_t p = 0; p < permutations; ++p) {
    // Odd draws replay the previous permutation reversed against the same
    // background row; rows are visited in shuffled rounds.
    if (p % 2 == 0) {
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.Below(i)]);
      if (row_cursor == rows.size()) {
        for (std::size_t i = rows.size(); i > 1; --i) std::swap(rows[i - 1], rows[rng.Below(i)]);
        row_cursor = 0;
      }
      b = &background[rows[row_cursor++]];
    } else {
      std::reverse(order.begin(), order.end());
    }
    std::copy(b->begin(), b->end(), z.begin());
    double prev = f(z);
    for (std::size_t j : order) {
      z[j] = x[j];
      const double cur = f(z);
      phi[j] += cur - prev;
      prev = cur;
    }
  }
  for (double& v : phi) v /= static_cast<double>(permutations);
  return phi;
}

std::vector<double> ShapleyExact(const ValueFunction& f, std::span<const double> x,
                                 const std::vector<std::vector<double>>& background) {
  const std::size_t n = x.size();
  if (n > kMaxExactKnobs) Fail(ErrorKind::kUsage, "shapley: exact mode supports at most 20 features");
  if (background.empty()) Fail(ErrorKind::kUsage, "shapley: empty background");
  const std::size_t coalitions = std::size_t{1} << n;
  std::vector<double> value(coalitions, 0.0);
  std::vector<double> z(n);
  for (std::size_t mask = 0; mask < coalitions; ++mask) {
    double sum = 0.0;
    for (const auto& b : background) {
      for (std::size_t j = 0; j < n; ++j) z[j] = (mask >> j) & 1 ? x[j] : b[j];
      sum += f(z);
    }
    value[mask] = sum / static_cast<double>(background.size());
  }
  // weight[s] = s! (n - s - 1)! / n!
  std::vector<double> weight(n);
  for (std::size_t s = 0; s < n; ++s) {
    weight[s] = std::exp(std::lgamma(s + 1.0) + std::lgamma(static_cast<double>(n - s)) - std::lgamma(n + 1.0));
  }
  std::vector<double> phi(n, 0.0);
  for (std::size_t mask = 0; mask < coalitions; ++mask) {
    const std::size_t size = static_cast<std::size_t>(__builtin_popcountll(mask));
    for (std::size_t j = 0; j < n; ++j) {
      if ((mask >> j) & 1) continue;
      phi[j] += weight[size] * (value[mask | (std::size_t{1} << j)] - value[mask]);
    }
  }
  return phi;
}

nlohmann::json ImportanceReport::ToJson() const {
  return {{"node_types", node_types},
          {"knobs", knobs},
          {"importance", importance},
          {"mean_prediction", mean_prediction},
          {"insufficient", insufficient},
          {"selected", selected}};
}

ImportanceReport ComputeImportance(const TimingCollection& timings, const CorrelationOptions& options) {
  const std::size_t n = timings.knobs.size();
  ImportanceReport report;
  report.node_types = timings.node_types;
  report.knobs = timings.knobs;
  report.importance.assign(timings.node_types.size(), std::vector<double>(n, 0.0));
  report.mean_prediction.assign(timings.node_types.size(), 0.0);
  report.insufficient.assign(timings.node_types.size(), 0);
  report.selected.assign(timings.node_types.size(), std::vector<std::uint8_t>(n, 1));

  std::vector<std::vector<NodeTiming>> by_type(timings.node_types.size());
  for (const NodeTiming& t : timings.triplets) by_type.at(t.node_type).push_back(t);
  RidgeOptions ridge = options.ridge;
  ridge.instance_effects = true;

  for (std::size_t type = 0; type < by_type.size(); ++type) {
    std::vector<NodeTiming>& rows = by_type[type];
    if (rows.size() < 2 * n) {
      report.insufficient[type] = 1;
      continue;
    }
    std::sort(rows.begin(), rows.end(), [](const NodeTiming& a, const NodeTiming& b) {
      if (a.theta != b.theta) return a.theta < b.theta;
      if (a.instance != b.instance) return a.instance < b.instance;
      return a.time_s < b.time_s;
    });
    if (options.log_target) {
      for (NodeTiming& r : rows) r.time_s = std::log(std::max(r.time_s, kMinTime));
    }
    std::set<std::size_t> instances;
    for (const NodeTiming& r : rows) instances.insert(r.instance);
    report.selected[type] = SelectKnobs(rows, n, ridge, options.selection_alpha, instances.size());
    const RidgeModel model = RidgeModel::Fit(rows, n, ridge, report.selected[type]);
    const bool log_target = options.log_target;
    const ValueFunction f = [&model, log_target](std::span<const double> theta) {
      return log_target ? std::exp(model.Predict(theta)) : model.Predict(theta);
    };

    Rng rng = Rng::Derive(options.seed, type);
    std::vector<std::vector<double>> background;
    for (std::size_t i : Subsample(rows.size(), options.shapley.max_background, rng)) {
      background.push_back(rows[i].theta.vector());
    }
    double mean = 0.0;
    for (const auto& b : background) mean += f(b);
    report.mean_prediction[type] = mean / static_cast<double>(background.size());

    const std::vector<std::size_t> points = Subsample(rows.size(), options.shapley.max_points, rng);
    for (std::size_t i : points) {
      const auto phi = options.shapley.exact
                           ? ShapleyExact(f, rows[i].theta.values(), background)
                           : ShapleySampled(f, rows[i].theta.values(), background, options.shapley.permutations, rng);
      for (std::size_t j = 0; j < n; ++j) report.importance[type][j] += std::abs(phi[j]);
    }
    for (double& v : report.importance[type]) v /= static_cast<double>(points.size());
  }
  return report;
}

CorrelationMatrix BuildMatrix(const ImportanceReport& report, double epsilon_fraction) {
  if (!(epsilon_fraction >= 0.0)) Fail(ErrorKind::kUsage, "correlation: epsilon must be >= 0");
  CorrelationMatrix m(report.node_types, report.knobs);
  for (std::size_t t = 0; t < report.node_types.size(); ++t) {
    const double eps = epsilon_fraction * std::abs(report.mean_prediction[t]);
    for (std::size_t j = 0; j < report.knobs.size(); ++j) {
      m.Set(t, j, report.insufficient[t] != 0 || report.importance[t][j] > eps);
    }
  }
  return m;
}

MatrixScore ScoreAgainstTruth(const CorrelationMatrix& m, const Scenario& scenario) {
  MatrixScore s;
  for (std::size_t st = 0; st < scenario.node_types.size(); ++st) {
    const auto mt = m.TypeIndex(scenario.node_types[st]);
    for (std::size_t sj = 0; sj < scenario.knobs.size(); ++sj) {
      const bool truth = scenario.Truth(st, sj);
      bool predicted = false;
      if (mt) {
        const auto& names = m.knobs();
        auto it = std::find(names.begin(), names.end(), scenario.knobs[sj].name);
        predicted = it != names.end() && m.At(*mt, static_cast<std::size_t>(it - names.begin()));
      }
      s.actual += truth;
      s.predicted += predicted;
      s.true_positives += truth && predicted;
    }
  }
  s.precision = s.predicted == 0 ? 1.0 : static_cast<double>(s.true_positives) / static_cast<double>(s.predicted);
  s.recall = s.actual == 0 ? 1.0 : static_cast<double>(s.true_positives) / static_cast<double>(s.actual);
  return s;
}

}  // namespace plantune

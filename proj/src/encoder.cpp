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

#include "plantune/encoder.hpp"

#include <algorithm>
#include <map>

#include "plantune/error.hpp"
#include "plantune/layers.hpp"
#include "plantune/log.hpp"

namespace plantune {

CorrelationMatrix::CorrelationMatrix(std::vector<std::string> node_types, std::vector<std::string> knobs)
    : node_types_(std::move(node_types)),
      knobs_(std::move(knobs)),
      cells_(node_types_.size() * knobs_.size(), 0) {}

CorrelationMatrix CorrelationMatrix::AllOnes(std::vector<std::string> node_types,
                                             std::vector<std::string> knobs) {
  CorrelationMatrix m(std::move(node_types), std::move(knobs));
  std::fill(m.cells_.begin(), m.cells_.end(), 1);
  return m;
}

std::optional<std::size_t> CorrelationMatrix::TypeIndex(const std::string& op) const {
  for (std::size_t i = 0; i < node_types_.size(); ++i)
    if (node_types_[i] == op) return i;
  return std::nullopt;
}

std::size_t CorrelationMatrix::CountOnes() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), 1));
}

std::vector<std::uint8_t> CorrelationMatrix::ExpandForPlan(const QueryPlan& plan) const {
  const std::size_t n = plan.nodes.size();
  std::vector<std::uint8_t> mask(knobs_.size() * n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto type = TypeIndex(plan.nodes[i].op);
    if (!type) continue;
    for (std::size_t j = 0; j < knobs_.size(); ++j) mask[j * n + i] = At(*type, j) ? 1 : 0;
  }
  return mask;
}

nlohmann::json CorrelationMatrix::ToJson() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t t = 0; t < node_types_.size(); ++t) {
    std::vector<int> row(knobs_.size());
    for (std::size_t j = 0; j < knobs_.size(); ++j) row[j] = At(t, j) ? 1 : 0;
    rows.push_back(row);
  }
  return {{"node_types", node_types_}, {"knobs", knobs_}, {"matrix", rows}};
}

CorrelationMatrix CorrelationMatrix::FromJson(const nlohmann::json& j) {
  for (const char* key : {"node_types", "knobs", "matrix"})
    if (!j.contains(key)) Fail(ErrorKind::kConfig, std::string("correlation: missing field '") + key + "'");
  CorrelationMatrix m(j["node_types"].get<std::vector<std::string>>(),
                      j["knobs"].get<std::vector<std::string>>());
  const auto& rows = j["matrix"];
  if (rows.size() != m.node_types_.size()) Fail(ErrorKind::kConfig, "correlation.matrix: wrong row count");
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const auto row = rows[t].get<std::vector<int>>();
    if (row.size() != m.knobs_.size()) Fail(ErrorKind::kConfig, "correlation.matrix: wrong column count");
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (row[k] != 0 && row[k] != 1) Fail(ErrorKind::kConfig, "correlation.matrix: entries must be 0 or 1");
      m.Set(t, k, row[k] == 1);
    }
  }
  return m;
}

PreparedPlan PreparePlan(const QueryPlan& plan, const FeatureVocabulary& vocab, std::size_t spectral_k) {
  PreparedPlan out;
  out.query_id = plan.query_id;
  out.node_count = plan.nodes.size();
  const Matrix features = Featurize(plan, vocab);
  const Matrix pos = Hspe(plan, spectral_k);
  out.inputs = Matrix(out.node_count, features.cols() + pos.cols());
  for (std::size_t i = 0; i < out.node_count; ++i) {
    auto row = out.inputs.row(i);
    std::copy(features.row(i).begin(), features.row(i).end(), row.begin());
    std::copy(pos.row(i).begin(), pos.row(i).end(), row.begin() + features.cols());
  }
  out.adjacency = AdjacencyMask(plan);
  return out;
}

void AttachCorrelation(PreparedPlan& prepared, const QueryPlan& plan, const CorrelationMatrix& correlation) {
  prepared.knob_mask = correlation.ExpandForPlan(plan);
  const std::size_t n = plan.nodes.size();
  for (std::size_t j = 0; j < correlation.knobs().size(); ++j) {
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) any = any || prepared.knob_mask[j * n + i];
    if (!any) {
      log::Warn("query " + plan.query_id + ": knob " + correlation.knobs()[j] +
                " has no correlated plan node; cross-attention uses uniform weights");
    }
  }
}

void RegisterAttentionBlock(ParamStore& params, const std::string& prefix, std::size_t dim, Rng& rng) {
  params.AddGlorot(prefix + ".wq", dim, dim, rng);
  params.AddGlorot(prefix + ".wk", dim, dim, rng);
  params.AddGlorot(prefix + ".wv", dim, dim, rng);
  layers::RegisterMlp(params, prefix + ".ffn", dim, dim, dim, rng);
}

Var AttentionBlock(ParamStore& params, const std::string& prefix, Var queries, Var keys,
                   std::shared_ptr<const ad::AttentionLayout> layout, ad::AttentionTrace* trace) {
  Tape& t = *queries.tape();
  const Var q = ad::MatMul(queries, t.Param(params.Get(prefix + ".wq")));
  const Var k = ad::MatMul(keys, t.Param(params.Get(prefix + ".wk")));
  const Var v = ad::MatMul(keys, t.Param(params.Get(prefix + ".wv")));
  const Var attended = ad::GroupedAttention(q, k, v, std::move(layout), trace);
  const Var h = ad::Add(queries, attended);
  return ad::Add(h, layers::Mlp(params, prefix + ".ffn", h));
}

KnobPlanEncoder::KnobPlanEncoder(std::size_t node_input_dim, std::size_t knob_count, EncoderOptions options)
    : node_input_dim_(node_input_dim), knob_count_(knob_count), options_(options) {
  if (knob_count_ == 0) Fail(ErrorKind::kUsage, "encoder needs at least one knob");
}

void KnobPlanEncoder::Register(ParamStore& params, Rng& rng) const {
  const std::size_t d = options_.dim;
  layers::RegisterLinear(params, "enc.plan.in", node_input_dim_, d, rng);
  RegisterAttentionBlock(params, "enc.plan.attn", d, rng);
  layers::RegisterMlp(params, "enc.plan.out", d, d, d, rng);
  layers::RegisterLinear(params, "enc.knob.in", knob_count_, d, rng);
  RegisterAttentionBlock(params, "enc.knob.attn", d, rng);
  layers::RegisterMlp(params, "enc.knob.out", d, d, d, rng);
  RegisterAttentionBlock(params, "enc.cross.attn", d, rng);
}

Var KnobPlanEncoder::EncodePlans(Tape& tape, ParamStore& params, std::span<const PreparedPlan* const> plans,
                                 ad::AttentionTrace* trace) const {
  std::size_t total = 0;
  for (const PreparedPlan* p : plans) total += p->node_count;
  Matrix inputs(total, node_input_dim_);
  auto layout = std::make_shared<ad::AttentionLayout>();
  std::size_t offset = 0;
  for (const PreparedPlan* p : plans) {
    if (p->inputs.cols() != node_input_dim_) {
      Fail(ErrorKind::kDimension, "plan " + p->query_id + ": node input width " +
                                      std::to_string(p->inputs.cols()) + " != " +
                                      std::to_string(node_input_dim_));
    }
    std::copy(p->inputs.data().begin(), p->inputs.data().end(),
              inputs.data().begin() + static_cast<std::ptrdiff_t>(offset * node_input_dim_));
    layout->groups.push_back({offset, p->node_count, offset, p->node_count, p->adjacency});
    offset += p->node_count;
  }
  const Var x = layers::Linear(params, "enc.plan.in", tape.Constant(std::move(inputs)));
  const Var h = AttentionBlock(params, "enc.plan.attn", x, x, layout, trace);
  return layers::Mlp(params, "enc.plan.out", h);
}

Var KnobPlanEncoder::EncodeKnobs(Tape& tape, ParamStore& params, std::span<const Configuration> thetas,
                                 ad::AttentionTrace* trace) const {
  const std::size_t n = knob_count_;
  Matrix inputs(thetas.size() * n, n);
  auto layout = std::make_shared<ad::AttentionLayout>();
  for (std::size_t b = 0; b < thetas.size(); ++b) {
    if (thetas[b].size() != n) Fail(ErrorKind::kDimension, "configuration width does not match knob count");
    for (std::size_t i = 0; i < n; ++i) inputs(b * n + i, i) = thetas[b][i];
    layout->groups.push_back({b * n, n, b * n, n, {}});
  }
  const Var x = layers::Linear(params, "enc.knob.in", tape.Constant(std::move(inputs)));
  const Var h = AttentionBlock(params, "enc.knob.attn", x, x, layout, trace);
  return layers::Mlp(params, "enc.knob.out", h);
}

Var KnobPlanEncoder::CrossEncode(ParamStore& params, Var knob_seq, Var node_seq,
                                 std::span<const PreparedPlan* const> item_plans,
                                 std::span<const std::size_t> plan_offsets,
                                 ad::AttentionTrace* trace) const {
  const std::size_t n = knob_count_;
  if (knob_seq.rows() != item_plans.size() * n || plan_offsets.size() != item_plans.size()) {
    Fail(ErrorKind::kDimension, "cross_encode: batch layout mismatch");
  }
  auto layout = std::make_shared<ad::AttentionLayout>();
  for (std::size_t b = 0; b < item_plans.size(); ++b) {
    const PreparedPlan* p = item_plans[b];
    if (!p->knob_mask.empty() && p->knob_mask.size() != n * p->node_count) {
      Fail(ErrorKind::kDimension, "cross_encode: knob mask shape mismatch for " + p->query_id);
    }
    layout->groups.push_back({b * n, n, plan_offsets[b], p->node_count, p->knob_mask});
  }
  const Var joint = AttentionBlock(params, "enc.cross.attn", knob_seq, node_seq, layout, trace);
  return ad::GroupMeanRows(joint, n);
}

Var KnobPlanEncoder::Encode(Tape& tape, ParamStore& params, std::span<const EncodeItem> items,
                            EncoderTrace* trace) const {
  if (items.empty()) Fail(ErrorKind::kUsage, "encode: empty batch");
  std::vector<const PreparedPlan*> distinct;
  std::map<const PreparedPlan*, std::size_t> offset_of;
  std::size_t offset = 0;
  for (const EncodeItem& it : items) {
    if (it.plan == nullptr) Fail(ErrorKind::kUsage, "encode: item without plan");
    if (offset_of.emplace(it.plan, offset).second) {
      distinct.push_back(it.plan);
      offset += it.plan->node_count;
    }
  }
  std::vector<Configuration> thetas;
  std::vector<const PreparedPlan*> item_plans;
  std::vector<std::size_t> offsets;
  thetas.reserve(items.size());
  for (const EncodeItem& it : items) {
    thetas.push_back(it.theta);
    item_plans.push_back(it.plan);
    offsets.push_back(offset_of.at(it.plan));
  }
  const Var nodes = EncodePlans(tape, params, distinct, trace ? &trace->plan : nullptr);
  const Var knobs = EncodeKnobs(tape, params, thetas, trace ? &trace->knobs : nullptr);
  return CrossEncode(params, knobs, nodes, item_plans, offsets, trace ? &trace->cross : nullptr);
}

}  // namespace plantune

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

#ifndef PLANTUNE_ENCODER_HPP_
#define PLANTUNE_ENCODER_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "plantune/autodiff.hpp"
#include "plantune/knobs.hpp"
#include "plantune/params.hpp"
#include "plantune/plan.hpp"

namespace plantune {

// Binary node-type x knob relevance mask.
class CorrelationMatrix {
 public:
  CorrelationMatrix() = default;
  CorrelationMatrix(std::vector<std::string> node_types, std::vector<std::string> knobs);
  static CorrelationMatrix AllOnes(std::vector<std::string> node_types, std::vector<std::string> knobs);

  const std::vector<std::string>& node_types() const { return node_types_; }
  const std::vector<std::string>& knobs() const { return knobs_; }
  bool At(std::size_t type, std::size_t knob) const { return cells_[type * knobs_.size() + knob] != 0; }
  void Set(std::size_t type, std::size_t knob, bool on) { cells_[type * knobs_.size() + knob] = on; }
  std::optional<std::size_t> TypeIndex(const std::string& op) const;
  std::size_t CountOnes() const;

  // Knob x node mask (row-major, knobs.size() rows, one column per plan node
  // in node order). Operators missing from the matrix count as correlated
  // with every knob.
  std::vector<std::uint8_t> ExpandForPlan(const QueryPlan& plan) const;

  // {"node_types": [...], "knobs": [...], "matrix": [[0|1, ...], ...]}
  nlohmann::json ToJson() const;
  static CorrelationMatrix FromJson(const nlohmann::json& j);

  friend bool operator==(const CorrelationMatrix&, const CorrelationMatrix&) = default;

 private:
  std::vector<std::string> node_types_;
  std::vector<std::string> knobs_;
  std::vector<std::uint8_t> cells_;
};

// Plan-side inputs computed once per plan.
struct PreparedPlan {
  std::string query_id;
  std::size_t node_count = 0;
  Matrix inputs;                         // node features || HSPE
  std::vector<std::uint8_t> adjacency;   // node x node
  std::vector<std::uint8_t> knob_mask;   // knob x node, empty = unmasked
};

PreparedPlan PreparePlan(const QueryPlan& plan, const FeatureVocabulary& vocab,
                         std::size_t spectral_k);
// Sets knob_mask from the matrix; warns for knobs with no correlated node.
void AttachCorrelation(PreparedPlan& prepared, const QueryPlan& plan,
                       const CorrelationMatrix& correlation);

struct EncoderOptions {
  std::size_t dim = 32;
  std::size_t spectral_k = 10;
};

struct EncodeItem {
  const PreparedPlan* plan = nullptr;
  Configuration theta;
};

struct EncoderTrace {
  ad::AttentionTrace plan;
  ad::AttentionTrace knobs;
  ad::AttentionTrace cross;
};

// One attention block: scaled dot-product attention from `queries` onto
// `keys` (values projected from keys), residual connection, then a
// position-wise feed-forward network with a second residual.
Var AttentionBlock(ParamStore& params, const std::string& prefix, Var queries, Var keys,
                   std::shared_ptr<const ad::AttentionLayout> layout,
                   ad::AttentionTrace* trace = nullptr);
void RegisterAttentionBlock(ParamStore& params, const std::string& prefix, std::size_t dim, Rng& rng);

// Joint knob-plan encoder. Parameters live in the caller's ParamStore under
// the "enc." prefix.
class KnobPlanEncoder {
 public:
  KnobPlanEncoder(std::size_t node_input_dim, std::size_t knob_count, EncoderOptions options);

  void Register(ParamStore& params, Rng& rng) const;

  std::size_t dim() const { return options_.dim; }
  std::size_t knob_count() const { return knob_count_; }
  std::size_t node_input_dim() const { return node_input_dim_; }

  // Node embeddings of several plans stacked in order (sum of node counts x
  // dim). Self-attention is restricted to tree-adjacent nodes.
  Var EncodePlans(Tape& tape, ParamStore& params, std::span<const PreparedPlan* const> plans,
                  ad::AttentionTrace* trace = nullptr) const;
  // Knob embeddings for a batch of configurations stacked in order
  // (batch * knob_count x dim), full self-attention within each one.
  Var EncodeKnobs(Tape& tape, ParamStore& params, std::span<const Configuration> thetas,
                  ad::AttentionTrace* trace = nullptr) const;
  // Knob rows of item b attend to the node rows of its plan (starting at
  // plan_offsets[b]) under the plan's knob mask, then average-pool over knobs.
  Var CrossEncode(ParamStore& params, Var knob_seq, Var node_seq,
                  std::span<const PreparedPlan* const> item_plans,
                  std::span<const std::size_t> plan_offsets,
                  ad::AttentionTrace* trace = nullptr) const;

  // Full pipeline: one pooled row of width dim per item.
  Var Encode(Tape& tape, ParamStore& params, std::span<const EncodeItem> items,
             EncoderTrace* trace = nullptr) const;

 private:
  std::size_t node_input_dim_;
  std::size_t knob_count_;
  EncoderOptions options_;
};

}  // namespace plantune

#endif  // PLANTUNE_ENCODER_HPP_

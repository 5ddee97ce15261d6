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

#ifndef PLANTUNE_PLAN_HPP_
#define PLANTUNE_PLAN_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "plantune/matrix.hpp"

namespace plantune {

enum class CompareOp { kEq, kNe, kLt, kLe, kGt, kGe, kLike };
inline constexpr std::size_t kCompareOpCount = 7;

CompareOp ParseCompareOp(const std::string& s);
const char* CompareOpName(CompareOp op);

struct Predicate {
  std::string column;
  CompareOp op = CompareOp::kEq;
  double value = 0.0;  // normalized to [0, 1]
};

struct PlanNode {
  int id = 0;
  std::string op;
  std::vector<std::string> tables;
  std::vector<std::string> columns;
  std::vector<Predicate> predicates;
  std::optional<std::pair<std::string, std::string>> join;
  std::vector<std::string> aggs;
  double card_est = 0.0;
  double cost_est = 0.0;
  std::vector<int> children;
};

// Rooted operator tree. Per-node outputs of this module follow the order of
// `nodes`, not the numeric ids.
struct QueryPlan {
  std::string query_id;
  std::vector<PlanNode> nodes;
  int root = 0;

  std::size_t IndexOf(int id) const;
  // Throws kConfig unless the nodes form a single tree rooted at `root`.
  void Validate() const;
  // Node indices in breadth-first order from the root, children visited in
  // listed order.
  std::vector<std::size_t> BfsOrder() const;
  // Parent index per node; root maps to itself.
  std::vector<std::size_t> Parents() const;
};

// Plan JSON Lines schema: {query_id, nodes:[{id, op, tables, columns,
// predicates:[{column, op, value}], join:[a, b]|null, aggs, card_est,
// cost_est, children}], root}.
QueryPlan PlanFromJson(const nlohmann::json& j);
nlohmann::json PlanToJson(const QueryPlan& plan);
std::vector<QueryPlan> LoadPlanCorpus(const std::string& path);

// Per-corpus feature vocabulary. Encoding layout per node:
//   op one-hot | tables multi-hot | columns multi-hot |
//   predicate slots x (column one-hot | compare-op one-hot | value) |
//   join columns multi-hot | aggs multi-hot | card | cost
// Cardinality and cost are min-max normalized over the corpus.
struct FeatureVocabulary {
  std::vector<std::string> ops;
  std::vector<std::string> tables;
  std::vector<std::string> columns;
  std::vector<std::string> aggs;
  std::size_t predicate_slots = 0;
  double card_min = 0.0, card_max = 0.0;
  double cost_min = 0.0, cost_max = 0.0;

  static FeatureVocabulary Build(const std::vector<QueryPlan>& corpus);
  std::size_t Dimension() const;
  std::optional<std::size_t> OpIndex(const std::string& op) const;

  nlohmann::json ToJson() const;
  static FeatureVocabulary FromJson(const nlohmann::json& j);
};

// One row per node, dimension vocab.Dimension(). Unused slots are zero.
Matrix Featurize(const QueryPlan& plan, const FeatureVocabulary& vocab);

// Root 0, child = parent + 1, divided by the max depth (0 for one node).
std::vector<double> BfsDepths(const QueryPlan& plan);

// Unnormalized Laplacian D - A of the undirected tree, in node order.
Matrix TreeLaplacian(const QueryPlan& plan);

struct SymmetricEigen {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column j pairs with values[j]
};
SymmetricEigen DecomposeSymmetric(const Matrix& m);

// Eigenvectors of the k smallest non-zero Laplacian eigenvalues, one row per
// node. Each eigenvector is unit norm with its first non-zero coordinate (in
// BFS order) positive; missing eigenvectors leave zero columns.
Matrix SpectralEncoding(const QueryPlan& plan, std::size_t k);

// [normalized BFS depth || spectral encoding], k + 1 columns.
Matrix Hspe(const QueryPlan& plan, std::size_t k);

// N x N row-major; 1 iff the nodes are tree-adjacent or identical.
std::vector<std::uint8_t> AdjacencyMask(const QueryPlan& plan);

}  // namespace plantune

#endif  // PLANTUNE_PLAN_HPP_

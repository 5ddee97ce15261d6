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

#include "plantune/plan.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>

#include <Eigen/Eigenvalues>

#include "plantune/error.hpp"
#include "plantune/io.hpp"

namespace plantune {

namespace {

constexpr const char* kCompareNames[kCompareOpCount] = {"=", "!=", "<", "<=", ">", ">=", "LIKE"};

std::size_t IndexIn(const std::vector<std::string>& v, const std::string& s, const char* what) {
  auto it = std::lower_bound(v.begin(), v.end(), s);
  if (it == v.end() || *it != s) Fail(ErrorKind::kLookup, std::string("featurize: unknown ") + what + " '" + s + "'");
  return static_cast<std::size_t>(it - v.begin());
}

double MinMax(double v, double lo, double hi) {
  if (hi <= lo) return 0.0;
  return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
}

template <typename T>
T Field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) Fail(ErrorKind::kConfig, where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kConfig, where + "." + key + ": " + e.what());
  }
}

}  // namespace

CompareOp ParseCompareOp(const std::string& s) {
  for (std::size_t i = 0; i < kCompareOpCount; ++i)
    if (s == kCompareNames[i]) return static_cast<CompareOp>(i);
  Fail(ErrorKind::kConfig, "unknown comparison operator '" + s + "'");
}

const char* CompareOpName(CompareOp op) { return kCompareNames[static_cast<std::size_t>(op)]; }

std::size_t QueryPlan::IndexOf(int id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id == id) return i;
  Fail(ErrorKind::kLookup, "plan " + query_id + ": no node with id " + std::to_string(id));
}

void QueryPlan::Validate() const {
  const std::string where = "plan " + query_id;
  if (nodes.empty()) Fail(ErrorKind::kConfig, where + ": no nodes");
  std::set<int> ids;
  for (const auto& n : nodes)
    if (!ids.insert(n.id).second) Fail(ErrorKind::kConfig, where + ": duplicate node id " + std::to_string(n.id));
  if (!ids.count(root)) Fail(ErrorKind::kConfig, where + ": root " + std::to_string(root) + " is not a node");
  std::map<int, int> parent_count;
  for (const auto& n : nodes) {
    for (int c : n.children) {
      if (!ids.count(c)) Fail(ErrorKind::kConfig, where + ": child " + std::to_string(c) + " does not exist");
      if (++parent_count[c] > 1) Fail(ErrorKind::kConfig, where + ": node " + std::to_string(c) + " has several parents");
    }
    if (n.card_est < 0 || n.cost_est < 0) Fail(ErrorKind::kConfig, where + ": negative estimate");
  }
  if (parent_count.count(root)) Fail(ErrorKind::kConfig, where + ": root has a parent");
  // Reachability from the root rules out cycles given single parents.
  if (BfsOrder().size() != nodes.size()) Fail(ErrorKind::kConfig, where + ": nodes unreachable from root");
}

std::vector<std::size_t> QueryPlan::BfsOrder() const {
  std::vector<std::size_t> order;
  std::vector<char> seen(nodes.size(), 0);
  std::deque<std::size_t> queue{IndexOf(root)};
  seen[queue.front()] = 1;
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    order.push_back(i);
    for (int c : nodes[i].children) {
      const std::size_t ci = IndexOf(c);
      if (seen[ci]) continue;
      seen[ci] = 1;
      queue.push_back(ci);
    }
  }
  return order;
}

std::vector<std::size_t> QueryPlan::Parents() const {
  std::vector<std::size_t> parent(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) parent[i] = i;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (int c : nodes[i].children) parent[IndexOf(c)] = i;
  return parent;
}

QueryPlan PlanFromJson(const nlohmann::json& j) {
  QueryPlan plan;
  plan.query_id = Field<std::string>(j, "query_id", "plan");
  const std::string where = "plan " + plan.query_id;
  plan.root = Field<int>(j, "root", where);
  const auto nodes = Field<nlohmann::json>(j, "nodes", where);
  if (!nodes.is_array()) Fail(ErrorKind::kConfig, where + ".nodes: expected array");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& jn = nodes[i];
    const std::string nw = where + ".nodes[" + std::to_string(i) + "]";
    PlanNode n;
    n.id = Field<int>(jn, "id", nw);
    n.op = Field<std::string>(jn, "op", nw);
    n.tables = Field<std::vector<std::string>>(jn, "tables", nw);
    n.columns = Field<std::vector<std::string>>(jn, "columns", nw);
    for (const auto& jp : Field<nlohmann::json>(jn, "predicates", nw)) {
      Predicate p;
      p.column = Field<std::string>(jp, "column", nw + ".predicates");
      p.op = ParseCompareOp(Field<std::string>(jp, "op", nw + ".predicates"));
      p.value = Field<double>(jp, "value", nw + ".predicates");
      if (p.value < 0.0 || p.value > 1.0) Fail(ErrorKind::kConfig, nw + ".predicates.value: outside [0,1]");
      n.predicates.push_back(std::move(p));
    }
    const auto join = Field<nlohmann::json>(jn, "join", nw);
    if (!join.is_null()) {
      const auto cols = join.get<std::vector<std::string>>();
      if (cols.size() != 2) Fail(ErrorKind::kConfig, nw + ".join: expected two columns or null");
      n.join = std::make_pair(cols[0], cols[1]);
    }
    n.aggs = Field<std::vector<std::string>>(jn, "aggs", nw);
    n.card_est = Field<double>(jn, "card_est", nw);
    n.cost_est = Field<double>(jn, "cost_est", nw);
    n.children = Field<std::vector<int>>(jn, "children", nw);
    plan.nodes.push_back(std::move(n));
  }
  plan.Validate();
  return plan;
}

nlohmann::json PlanToJson(const QueryPlan& plan) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : plan.nodes) {
    nlohmann::json preds = nlohmann::json::array();
    for (const auto& p : n.predicates)
      preds.push_back({{"column", p.column}, {"op", CompareOpName(p.op)}, {"value", p.value}});
    nlohmann::json join = nullptr;
    if (n.join) join = {n.join->first, n.join->second};
    nodes.push_back({{"id", n.id}, {"op", n.op}, {"tables", n.tables}, {"columns", n.columns},
                     {"predicates", preds}, {"join", join}, {"aggs", n.aggs},
                     {"card_est", n.card_est}, {"cost_est", n.cost_est}, {"children", n.children}});
  }
  return {{"query_id", plan.query_id}, {"nodes", nodes}, {"root", plan.root}};
}

std::vector<QueryPlan> LoadPlanCorpus(const std::string& path) {
  std::vector<QueryPlan> corpus;
  std::size_t line_no = 0;
  for (const auto& line : io::ReadLines(path)) {
    ++line_no;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      Fail(ErrorKind::kConfig, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    corpus.push_back(PlanFromJson(j));
  }
  return corpus;
}

FeatureVocabulary FeatureVocabulary::Build(const std::vector<QueryPlan>& corpus) {
  std::set<std::string> ops, tables, columns, aggs;
  FeatureVocabulary v;
  bool first = true;
  for (const auto& plan : corpus) {
    for (const auto& n : plan.nodes) {
      ops.insert(n.op);
      tables.insert(n.tables.begin(), n.tables.end());
      columns.insert(n.columns.begin(), n.columns.end());
      for (const auto& p : n.predicates) columns.insert(p.column);
      if (n.join) {
        columns.insert(n.join->first);
        columns.insert(n.join->second);
      }
      aggs.insert(n.aggs.begin(), n.aggs.end());
      v.predicate_slots = std::max(v.predicate_slots, n.predicates.size());
      if (first) {
        v.card_min = v.card_max = n.card_est;
        v.cost_min = v.cost_max = n.cost_est;
        first = false;
      }
      v.card_min = std::min(v.card_min, n.card_est);
      v.card_max = std::max(v.card_max, n.card_est);
      v.cost_min = std::min(v.cost_min, n.cost_est);
      v.cost_max = std::max(v.cost_max, n.cost_est);
    }
  }
  v.ops.assign(ops.begin(), ops.end());
  v.tables.assign(tables.begin(), tables.end());
  v.columns.assign(columns.begin(), columns.end());
  v.aggs.assign(aggs.begin(), aggs.end());
  return v;
}

std::size_t FeatureVocabulary::Dimension() const {
  const std::size_t c = columns.size();
  return ops.size() + tables.size() + c + predicate_slots * (c + kCompareOpCount + 1) + c +
         aggs.size() + 2;
}

std::optional<std::size_t> FeatureVocabulary::OpIndex(const std::string& op) const {
  auto it = std::lower_bound(ops.begin(), ops.end(), op);
  if (it == ops.end() || *it != op) return std::nullopt;
  return static_cast<std::size_t>(it - ops.begin());
}

nlohmann::json FeatureVocabulary::ToJson() const {
  return {{"ops", ops}, {"tables", tables}, {"columns", columns}, {"aggs", aggs},
          {"predicate_slots", predicate_slots}, {"card_min", card_min}, {"card_max", card_max},
          {"cost_min", cost_min}, {"cost_max", cost_max}};
}

FeatureVocabulary FeatureVocabulary::FromJson(const nlohmann::json& j) {
  FeatureVocabulary v;
  v.ops = Field<std::vector<std::string>>(j, "ops", "vocabulary");
  v.tables = Field<std::vector<std::string>>(j, "tables", "vocabulary");
  v.columns = Field<std::vector<std::string>>(j, "columns", "vocabulary");
  v.aggs = Field<std::vector<std::string>>(j, "aggs", "vocabulary");
  v.predicate_slots = Field<std::size_t>(j, "predicate_slots", "vocabulary");
  v.card_min = Field<double>(j, "card_min", "vocabulary");
  v.card_max = Field<double>(j, "card_max", "vocabulary");
  v.cost_min = Field<double>(j, "cost_min", "vocabulary");
  v.cost_max = Field<double>(j, "cost_max", "vocabulary");
  return v;
}

Matrix Featurize(const QueryPlan& plan, const FeatureVocabulary& vocab) {
  const std::size_t c = vocab.columns.size();
  const std::size_t slot = c + kCompareOpCount + 1;
  Matrix out(plan.nodes.size(), vocab.Dimension());
  for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
    const PlanNode& n = plan.nodes[i];
    auto row = out.row(i);
    std::size_t off = 0;
    row[off + IndexIn(vocab.ops, n.op, "operator")] = 1.0;
    off += vocab.ops.size();
    for (const auto& t : n.tables) row[off + IndexIn(vocab.tables, t, "table")] = 1.0;
    off += vocab.tables.size();
    for (const auto& col : n.columns) row[off + IndexIn(vocab.columns, col, "column")] = 1.0;
    off += c;
    if (n.predicates.size() > vocab.predicate_slots) {
      Fail(ErrorKind::kLookup, "featurize: node has more predicates than vocabulary slots");
    }
    for (std::size_t p = 0; p < n.predicates.size(); ++p) {
      const std::size_t base = off + p * slot;
      row[base + IndexIn(vocab.columns, n.predicates[p].column, "column")] = 1.0;
      row[base + c + static_cast<std::size_t>(n.predicates[p].op)] = 1.0;
      row[base + c + kCompareOpCount] = n.predicates[p].value;
    }
    off += vocab.predicate_slots * slot;
    if (n.join) {
      row[off + IndexIn(vocab.columns, n.join->first, "column")] = 1.0;
      row[off + IndexIn(vocab.columns, n.join->second, "column")] = 1.0;
    }
    off += c;
    for (const auto& a : n.aggs) row[off + IndexIn(vocab.aggs, a, "aggregate")] = 1.0;
    off += vocab.aggs.size();
    row[off++] = MinMax(n.card_est, vocab.card_min, vocab.card_max);
    row[off++] = MinMax(n.cost_est, vocab.cost_min, vocab.cost_max);
  }
  return out;
}

std::vector<double> BfsDepths(const QueryPlan& plan) {
  const auto order = plan.BfsOrder();
  const auto parent = plan.Parents();
  std::vector<double> depth(plan.nodes.size(), 0.0);
  double max_depth = 0.0;
  for (std::size_t i : order) {
    if (parent[i] != i) depth[i] = depth[parent[i]] + 1.0;
    max_depth = std::max(max_depth, depth[i]);
  }
  if (max_depth > 0)
    for (double& d : depth) d /= max_depth;
  return depth;
}

Matrix TreeLaplacian(const QueryPlan& plan) {
  const std::size_t n = plan.nodes.size();
  Matrix lap(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c : plan.nodes[i].children) {
      const std::size_t j = plan.IndexOf(c);
      lap(i, j) -= 1.0;
      lap(j, i) -= 1.0;
      lap(i, i) += 1.0;
      lap(j, j) += 1.0;
    }
  }
  return lap;
}

SymmetricEigen DecomposeSymmetric(const Matrix& m) {
  if (m.rows() != m.cols()) Fail(ErrorKind::kDimension, "eigendecomposition of non-square matrix");
  const std::size_t n = m.rows();
  Eigen::MatrixXd a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = m(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  if (solver.info() != Eigen::Success) Fail(ErrorKind::kNumeric, "symmetric eigensolver did not converge");
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = solver.eigenvalues()(j);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = solver.eigenvectors()(i, j);
  }
  return out;
}

Matrix SpectralEncoding(const QueryPlan& plan, std::size_t k) {
  const std::size_t n = plan.nodes.size();
  Matrix enc(n, k);
  if (n < 2 || k == 0) return enc;
  const SymmetricEigen eig = DecomposeSymmetric(TreeLaplacian(plan));
  const double zero_tol = 1e-9 * static_cast<double>(n);
  const auto order = plan.BfsOrder();
  std::size_t col = 0;
  for (std::size_t j = 0; j < n && col < k; ++j) {
    if (eig.values[j] <= zero_tol) continue;
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += eig.vectors(i, j) * eig.vectors(i, j);
    norm = std::sqrt(norm);
    double sign = 1.0;
    for (std::size_t i : order) {
      const double v = eig.vectors(i, j);
      if (std::abs(v) > 1e-9) {
        sign = v > 0 ? 1.0 : -1.0;
        break;
      }
    }
    for (std::size_t i = 0; i < n; ++i) enc(i, col) = sign * eig.vectors(i, j) / norm;
    ++col;
  }
  return enc;
}

Matrix Hspe(const QueryPlan& plan, std::size_t k) {
  const auto depth = BfsDepths(plan);
  const Matrix lap = SpectralEncoding(plan, k);
  Matrix out(plan.nodes.size(), k + 1);
  for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
    out(i, 0) = depth[i];
    for (std::size_t j = 0; j < k; ++j) out(i, j + 1) = lap(i, j);
  }
  return out;
}

std::vector<std::uint8_t> AdjacencyMask(const QueryPlan& plan) {
  const std::size_t n = plan.nodes.size();
  std::vector<std::uint8_t> mask(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    mask[i * n + i] = 1;
    for (int c : plan.nodes[i].children) {
      const std::size_t j = plan.IndexOf(c);
      mask[i * n + j] = 1;
      mask[j * n + i] = 1;
    }
  }
  return mask;
}

}  // namespace plantune

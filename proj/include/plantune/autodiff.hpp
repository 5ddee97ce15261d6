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

#ifndef PLANTUNE_AUTODIFF_HPP_
#define PLANTUNE_AUTODIFF_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <deque>
#include <unordered_map>
#include <vector>

#include "plantune/matrix.hpp"

namespace plantune {

struct Parameter;
class Tape;

// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Records primitive operations in topological order. Backward() walks the
// nodes once in reverse and accumulates gradients into bound parameters.
// A tape is single-threaded; independent tapes share no state.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var Constant(Matrix value);
  // Leaf bound to a parameter. Binding the same parameter twice returns the
  // same node.
  Var Param(Parameter& p);

  // Appends a node. fn may be empty when no input requires a gradient.
  Var Record(Matrix value, std::vector<int> inputs, BackwardFn fn);

  const Matrix& Value(int id) const { return nodes_[id].value; }
  bool RequiresGrad(int id) const { return nodes_[id].requires_grad; }
  // Gradient buffer, allocated (zero) on first access.
  Matrix& GradRef(int id);
  // Gradient after Backward(); zero matrix if the node was never reached.
  Matrix Grad(Var v) const;

  // Seeds d(out)/d(out) = 1 and propagates. out must be 1 x 1.
  void Backward(Var out);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };
  std::deque<Node> nodes_;  // deque keeps value references stable
  std::unordered_map<const Parameter*, int> param_nodes_;
};

namespace ad {

enum class Unary { kTanh, kSigmoid, kSoftplus, kRelu, kLog, kExp, kSquare };

// Additive sentinel applied to masked attention scores before softmax.
inline constexpr double kMaskSentinel = -1e9;

Var MatMul(Var a, Var b);
Var MatMulTransB(Var a, Var b);  // a * b^T
Var Transpose(Var a);
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);           // elementwise
Var Div(Var a, Var b);           // elementwise
Var AddRow(Var m, Var row);      // m + broadcast(row), row is 1 x cols
Var Scale(Var m, double c);
Var AddScalar(Var m, double c);
Var Apply(Unary op, Var m);
inline Var Tanh(Var m) { return Apply(Unary::kTanh, m); }
inline Var Sigmoid(Var m) { return Apply(Unary::kSigmoid, m); }
inline Var Softplus(Var m) { return Apply(Unary::kSoftplus, m); }
inline Var Relu(Var m) { return Apply(Unary::kRelu, m); }
inline Var Log(Var m) { return Apply(Unary::kLog, m); }
inline Var Exp(Var m) { return Apply(Unary::kExp, m); }
inline Var Square(Var m) { return Apply(Unary::kSquare, m); }
Var SoftmaxRows(Var m);
Var Sum(Var m);                   // 1 x 1
Var MeanRows(Var m);              // 1 x cols, column means
Var GroupMeanRows(Var m, std::size_t group);  // consecutive blocks of rows
Var RepeatRows(Var row, std::size_t n);
Var ConcatCols(const std::vector<Var>& parts);
Var ConcatRows(const std::vector<Var>& parts);
Var SliceCols(Var m, std::size_t begin, std::size_t count);
Var GatherRows(Var m, std::vector<std::size_t> indices);

// One block of a grouped attention call: query rows
// [q_begin, q_begin + q_count) attend to key rows [k_begin, k_begin + k_count).
// mask is q_count x k_count row-major (1 = allowed); empty means all allowed.
struct AttentionGroup {
  std::size_t q_begin = 0;
  std::size_t q_count = 0;
  std::size_t k_begin = 0;
  std::size_t k_count = 0;
  std::vector<std::uint8_t> mask;
};

struct AttentionLayout {
  std::vector<AttentionGroup> groups;
};

struct AttentionTrace {
  std::vector<Matrix> weights;   // post-softmax, one matrix per group
  std::size_t fallback_rows = 0; // rows with every key masked
};

// Scaled dot-product attention softmax(Q K^T / sqrt(d_k)) V evaluated
// independently per group. Masked pairs get the additive sentinel and hence
// exactly zero weight; a row with every key masked falls back to uniform
// weights and passes no gradient to its scores.
Var GroupedAttention(Var q, Var k, Var v,
                     std::shared_ptr<const AttentionLayout> layout,
                     AttentionTrace* trace = nullptr);

}  // namespace ad
}  // namespace plantune

#endif  // PLANTUNE_AUTODIFF_HPP_

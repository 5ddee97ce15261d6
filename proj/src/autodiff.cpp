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

#include "plantune/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Core>

#include "plantune/error.hpp"
#include "plantune/params.hpp"

namespace plantune {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using MapM = Eigen::Map<RowMat>;

MapC View(const Matrix& m) { return MapC(m.data().data(), m.rows(), m.cols()); }
MapM View(Matrix& m) { return MapM(m.data().data(), m.rows(), m.cols()); }

MapC RowBlock(const Matrix& m, std::size_t begin, std::size_t count) {
  return MapC(m.data().data() + begin * m.cols(), count, m.cols());
}
MapM RowBlock(Matrix& m, std::size_t begin, std::size_t count) {
  return MapM(m.data().data() + begin * m.cols(), count, m.cols());
}

Tape* SameTape(Var a, Var b) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape()) {
    Fail(ErrorKind::kUsage, "operands recorded on different tapes");
  }
  return a.tape();
}

void RequireShape(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) {
    Fail(ErrorKind::kDimension,
         std::string(op) + ": shape mismatch " + a.ShapeString() + " vs " + b.ShapeString());
  }
}

double StableSigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double StableSoftplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

const Matrix& Var::value() const {
  if (!tape_) Fail(ErrorKind::kUsage, "value() on an empty Var");
  return tape_->Value(id_);
}

Var Tape::Constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::Param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.value = p.value;
  n.requires_grad = true;
  n.param = &p;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(&p, id);
  return Var(this, id);
}

Var Tape::Record(Matrix value, std::vector<int> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (int in : inputs) n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Matrix& Tape::GradRef(int id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Matrix(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

Matrix Tape::Grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.has_grad) return n.grad;
  return Matrix(n.value.rows(), n.value.cols());
}

void Tape::Backward(Var out) {
  if (out.tape() != this) Fail(ErrorKind::kUsage, "Backward: Var from another tape");
  const Matrix& v = nodes_[out.id()].value;
  if (v.rows() != 1 || v.cols() != 1) {
    Fail(ErrorKind::kUsage, "Backward requires a scalar output, got " + v.ShapeString());
  }
  GradRef(out.id())(0, 0) = 1.0;
  for (int i = out.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.has_grad && n.backward) n.backward(*this, i);
  }
  for (Node& n : nodes_) {
    if (n.param == nullptr || !n.has_grad) continue;
    Parameter& p = *n.param;
    if (!p.grad.SameShape(p.value)) p.grad = Matrix(p.value.rows(), p.value.cols());
    for (std::size_t k = 0; k < p.grad.size(); ++k) p.grad[k] += n.grad[k];
  }
}

namespace ad {

Var MatMul(Var a, Var b) {
  Tape* t = SameTape(a, b);
  const int ia = a.id(), ib = b.id();
  return t->Record(Multiply(a.value(), b.value()), {ia, ib}, [ia, ib](Tape& tp, int self) {
    const Matrix& g = tp.GradRef(self);
    if (tp.RequiresGrad(ia)) View(tp.GradRef(ia)).noalias() += View(g) * View(tp.Value(ib)).transpose();
    if (tp.RequiresGrad(ib)) View(tp.GradRef(ib)).noalias() += View(tp.Value(ia)).transpose() * View(g);
  });
}

Var MatMulTransB(Var a, Var b) {
  Tape* t = SameTape(a, b);
  RequireShape(a.cols() == b.cols(), "matmul_transb", a.value(), b.value());
  Matrix out(a.rows(), b.rows());
  if (!out.empty() && a.cols() > 0) View(out).noalias() = View(a.value()) * View(b.value()).transpose();
  const int ia = a.id(), ib = b.id();
  return t->Record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
    const Matrix& g = tp.GradRef(self);
    if (tp.RequiresGrad(ia)) View(tp.GradRef(ia)).noalias() += View(g) * View(tp.Value(ib));
    if (tp.RequiresGrad(ib)) View(tp.GradRef(ib)).noalias() += View(g).transpose() * View(tp.Value(ia));
  });
}

Var Transpose(Var a) {
  const int ia = a.id();
  return a.tape()->Record(Transposed(a.value()), {ia}, [ia](Tape& tp, int self) {
    const Matrix g = Transposed(tp.GradRef(self));
    Matrix& ga = tp.GradRef(ia);
    for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
  });
}

namespace {
template <typename F>
Var Binary(Var a, Var b, const char* name, F f, double sa, double sb) {
  Tape* t = SameTape(a, b);
  RequireShape(a.value().SameShape(b.value()), name, a.value(), b.value());
  Matrix out(a.rows(), a.cols());
  const Matrix& va = a.value();
  const Matrix& vb = b.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = f(va[k], vb[k]);
  const int ia = a.id(), ib = b.id();
  return t->Record(std::move(out), {ia, ib}, [ia, ib, sa, sb](Tape& tp, int self) {
    const Matrix& g = tp.GradRef(self);
    if (tp.RequiresGrad(ia)) {
      Matrix& ga = tp.GradRef(ia);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += sa * g[k];
    }
    if (tp.RequiresGrad(ib)) {
      Matrix& gb = tp.GradRef(ib);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] += sb * g[k];
    }
  });
}
}  // namespace

Var Add(Var a, Var b) {
  return Binary(a, b, "add", [](double x, double y) { return x + y; }, 1.0, 1.0);
}

Var Sub(Var a, Var b) {
  return Binary(a, b, "sub", [](double x, double y) { return x - y; }, 1.0, -1.0);
}

Var Mul(Var a, Var b) {
  Tape* t = SameTape(a, b);
  RequireShape(a.value().SameShape(b.value()), "mul", a.value(), b.value());
  Matrix out(a.rows(), a.cols());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = a.value()[k] * b.value()[k];
  const int ia = a.id(), ib = b.id();
  return t->Record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
    const Matrix& g = tp.GradRef(self);
    if (tp.RequiresGrad(ia)) {
      Matrix& ga = tp.GradRef(ia);
      const Matrix& vb = tp.Value(ib);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * vb[k];
    }
    if (tp.RequiresGrad(ib)) {
      Matrix& gb = tp.GradRef(ib);
      const Matrix& va = tp.Value(ia);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k] * va[k];
    }
  });
}

Var Div(Var a, Var b) {
  Tape* t = SameTape(a, b);
  RequireShape(a.value().SameShape(b.value()), "div", a.value(), b.value());
  Matrix out(a.rows(), a.cols());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = a.value()[k] / b.value()[k];
  const int ia = a.id(), ib = b.id();
  return t->Record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
    const Matrix& g = tp.GradRef(self);
    const Matrix& vb = tp.Value(ib);
    if (tp.RequiresGrad(ia)) {
      Matrix& ga = tp.GradRef(ia);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] / vb[k];
    }
    if (tp.RequiresGrad(ib)) {
      Matrix& gb = tp.GradRef(ib);
      const Matrix& out = tp.Value(self);
      for (std::size_t k = 0; k < g.size(); ++k) gb[k] -= g[k] * out[k] / vb[k];
    }
  });
}

Var AddRow(Var m, Var row) {
  Tape* t = SameTape(m, row);
  RequireShape(row.rows() == 1 && row.cols() == m.cols(), "add_row", m.value(), row.value());
  Matrix out = m.value();
  const Matrix& r = row.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += r[j];
  const int im = m.id(), ir = row.id();
  return t->Record(std::move(out), {im, ir}, [im, ir](Tape& tp, int self) {
    const Matrix& g = tp.GradRef(self);
    if (tp.RequiresGrad(im)) {
      Matrix& gm = tp.GradRef(im);
      for (std::size_t k = 0; k < g.size(); ++k) gm[k] += g[k];
    }
    if (tp.RequiresGrad(ir)) {
      Matrix& gr = tp.GradRef(ir);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g(i, j);
    }
  });
}

Var Scale(Var m, double c) {
  Matrix out = m.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= c;
  const int im = m.id();
  return m.tape()->Record(std::move(out), {im}, [im, c](Tape& tp, int self) {
    const Matrix& g = tp.GradRef(self);
    Matrix& gm = tp.GradRef(im);
    for (std::size_t k = 0; k < g.size(); ++k) gm[k] += c * g[k];
  });
}

Var AddScalar(Var m, double c) {
  Matrix out = m.value();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += c;
  const int im = m.id();
  return m.tape()->Record(std::move(out), {im}, [im](Tape& tp, int self) {
    const Matrix& g = tp.GradRef(self);
    Matrix& gm = tp.GradRef(im);
    for (std::size_t k = 0; k < g.size(); ++k) gm[k] += g[k];
  });
}

Var Apply(Unary op, Var m) {
  const Matrix& x = m.value();
  Matrix y(x.rows(), x.cols());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double v = x[k];
    switch (op) {
      case Unary::kTanh: y[k] = std::tanh(v); break;
      case Unary::kSigmoid: y[k] = StableSigmoid(v); break;
      case Unary::kSoftplus: y[k] = StableSoftplus(v); break;
      case Unary::kRelu: y[k] = v > 0 ? v : 0.0; break;
      case Unary::kLog:
        if (!(v > 0)) Fail(ErrorKind::kNumeric, "log of non-positive value " + std::to_string(v));
        y[k] = std::log(v);
        break;
      case Unary::kExp: y[k] = std::exp(v); break;
      case Unary::kSquare: y[k] = v * v; break;
    }
  }
  const int im = m.id();
  return m.tape()->Record(std::move(y), {im}, [im, op](Tape& tp, int self) {
    const Matrix& g = tp.GradRef(self);
    const Matrix& xin = tp.Value(im);
    const Matrix& yout = tp.Value(self);
    Matrix& gm = tp.GradRef(im);
    for (std::size_t k = 0; k < g.size(); ++k) {
      double d = 0.0;
      switch (op) {
        case Unary::kTanh: d = 1.0 - yout[k] * yout[k]; break;
        case Unary::kSigmoid: d = yout[k] * (1.0 - yout[k]); break;
        case Unary::kSoftplus: d = StableSigmoid(xin[k]); break;
        case Unary::kRelu: d = xin[k] > 0 ? 1.0 : 0.0; break;
        case Unary::kLog: d = 1.0 / xin[k]; break;
        case Unary::kExp: d = yout[k]; break;
        case Unary::kSquare: d = 2.0 * xin[k]; break;
      }
      gm[k] += g[k] * d;
    }
  });
}

Var SoftmaxRows(Var m) {
  const Matrix& x = m.value();
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto in = x.row(i);
    auto out = y.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double s = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) s += (out[j] = std::exp(in[j] - mx));
    for (double& v : out) v /= s;
  }
  const int im = m.id();
  return m.tape()->Record(std::move(y), {im}, [im](Tape& tp, int self) {
    const Matrix& g = tp.GradRef(self);
    const Matrix& yv = tp.Value(self);
    Matrix& gm = tp.GradRef(im);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * yv(i, j);
      for (std::size_t j = 0; j < g.cols(); ++j) gm(i, j) += yv(i, j) * (g(i, j) - dot);
    }
  });
}

Var Sum(Var m) {
  const auto d = m.value().data();
  Matrix out(1, 1, std::accumulate(d.begin(), d.end(), 0.0));
  const int im = m.id();
  return m.tape()->Record(std::move(out), {im}, [im](Tape& tp, int self) {
    const double g = tp.GradRef(self)[0];
    Matrix& gm = tp.GradRef(im);
    for (std::size_t k = 0; k < gm.size(); ++k) gm[k] += g;
  });
}

Var GroupMeanRows(Var m, std::size_t group) {
  const Matrix& x = m.value();
  if (group == 0 || x.rows() % group != 0) {
    Fail(ErrorKind::kDimension, "group_mean_rows: " + std::to_string(x.rows()) +
                                    " rows not divisible by " + std::to_string(group));
  }
  const std::size_t out_rows = x.rows() / group;
  Matrix y(out_rows, x.cols());
  const double inv = 1.0 / static_cast<double>(group);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) y(i / group, j) += x(i, j) * inv;
  const int im = m.id();
  return m.tape()->Record(std::move(y), {im}, [im, group, inv](Tape& tp, int self) {
    const Matrix& g = tp.GradRef(self);
    Matrix& gm = tp.GradRef(im);
    for (std::size_t i = 0; i < gm.rows(); ++i)
      for (std::size_t j = 0; j < gm.cols(); ++j) gm(i, j) += g(i / group, j) * inv;
  });
}

Var MeanRows(Var m) { return GroupMeanRows(m, m.rows()); }

Var RepeatRows(Var row, std::size_t n) {
  if (row.rows() != 1) Fail(ErrorKind::kDimension, "repeat_rows expects a row vector");
  const Matrix& r = row.value();
  Matrix y(n, r.cols());
  for (std::size_t i = 0; i < n; ++i) std::copy(r.data().begin(), r.data().end(), y.row(i).begin());
  const int ir = row.id();
  return row.tape()->Record(std::move(y), {ir}, [ir](Tape& tp, int self) {
    const Matrix& g = tp.GradRef(self);
    Matrix& gr = tp.GradRef(ir);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g(i, j);
  });
}

Var ConcatCols(const std::vector<Var>& parts) {
  if (parts.empty()) Fail(ErrorKind::kUsage, "concat_cols of nothing");
  Tape* t = parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    if (p.tape() != t) Fail(ErrorKind::kUsage, "concat_cols across tapes");
    if (p.rows() != rows) RequireShape(false, "concat_cols", parts.front().value(), p.value());
    ids.push_back(p.id());
    offsets.push_back(cols);
    cols += p.cols();
  }
  Matrix y(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Matrix& v = parts[k].value();
    for (std::size_t i = 0; i < rows; ++i)
      std::copy(v.row(i).begin(), v.row(i).end(), y.row(i).begin() + offsets[k]);
  }
  return t->Record(std::move(y), ids, [ids, offsets](Tape& tp, int self) {
    const Matrix& g = tp.GradRef(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.RequiresGrad(ids[k])) continue;
      Matrix& gk = tp.GradRef(ids[k]);
      for (std::size_t i = 0; i < gk.rows(); ++i)
        for (std::size_t j = 0; j < gk.cols(); ++j) gk(i, j) += g(i, offsets[k] + j);
    }
  });
}

Var ConcatRows(const std::vector<Var>& parts) {
  if (parts.empty()) Fail(ErrorKind::kUsage, "concat_rows of nothing");
  Tape* t = parts.front().tape();
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    if (p.tape() != t) Fail(ErrorKind::kUsage, "concat_rows across tapes");
    if (p.cols() != cols) RequireShape(false, "concat_rows", parts.front().value(), p.value());
    ids.push_back(p.id());
    offsets.push_back(rows);
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const Var& p : parts) data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  return t->Record(Matrix(rows, cols, std::move(data)), ids, [ids, offsets, cols](Tape& tp, int self) {
    const Matrix& g = tp.GradRef(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.RequiresGrad(ids[k])) continue;
      Matrix& gk = tp.GradRef(ids[k]);
      const double* src = g.data().data() + offsets[k] * cols;
      for (std::size_t e = 0; e < gk.size(); ++e) gk[e] += src[e];
    }
  });
}

Var SliceCols(Var m, std::size_t begin, std::size_t count) {
  const Matrix& x = m.value();
  if (begin + count > x.cols()) Fail(ErrorKind::kDimension, "slice_cols out of range");
  Matrix y(x.rows(), count);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) y(i, j) = x(i, begin + j);
  const int im = m.id();
  return m.tape()->Record(std::move(y), {im}, [im, begin, count](Tape& tp, int self) {
    const Matrix& g = tp.GradRef(self);
    Matrix& gm = tp.GradRef(im);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < count; ++j) gm(i, begin + j) += g(i, j);
  });
}

Var GatherRows(Var m, std::vector<std::size_t> indices) {
  const Matrix& x = m.value();
  Matrix y(indices.size(), x.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= x.rows()) Fail(ErrorKind::kDimension, "gather_rows index out of range");
    std::copy(x.row(indices[i]).begin(), x.row(indices[i]).end(), y.row(i).begin());
  }
  const int im = m.id();
  return m.tape()->Record(std::move(y), {im}, [im, idx = std::move(indices)](Tape& tp, int self) {
    const Matrix& g = tp.GradRef(self);
    Matrix& gm = tp.GradRef(im);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gm(idx[i], j) += g(i, j);
  });
}

Var GroupedAttention(Var q, Var k, Var v, std::shared_ptr<const AttentionLayout> layout,
                     AttentionTrace* trace) {
  Tape* t = SameTape(q, k);
  SameTape(k, v);
  const Matrix& qm = q.value();
  const Matrix& km = k.value();
  const Matrix& vm = v.value();
  RequireShape(qm.cols() == km.cols(), "attention q/k", qm, km);
  RequireShape(km.rows() == vm.rows(), "attention k/v", km, vm);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(qm.cols(), 1)));

  auto weights = std::make_shared<std::vector<Matrix>>();
  auto fallback = std::make_shared<std::vector<std::vector<std::uint8_t>>>();
  Matrix out(qm.rows(), vm.cols());
  std::size_t fallback_rows = 0;
  for (const AttentionGroup& g : layout->groups) {
    if (g.q_begin + g.q_count > qm.rows() || g.k_begin + g.k_count > km.rows() || g.k_count == 0) {
      Fail(ErrorKind::kDimension, "attention group out of range");
    }
    if (!g.mask.empty() && g.mask.size() != g.q_count * g.k_count) {
      Fail(ErrorKind::kDimension, "attention mask shape mismatch");
    }
    Matrix w(g.q_count, g.k_count);
    View(w).noalias() = RowBlock(qm, g.q_begin, g.q_count) *
                        RowBlock(km, g.k_begin, g.k_count).transpose() * inv_sqrt;
    std::vector<std::uint8_t> fb(g.q_count, 0);
    for (std::size_t i = 0; i < g.q_count; ++i) {
      auto row = w.row(i);
      bool any = true;
      if (!g.mask.empty()) {
        any = false;
        for (std::size_t j = 0; j < g.k_count; ++j) {
          if (g.mask[i * g.k_count + j]) any = true;
          else row[j] += ad::kMaskSentinel;
        }
      }
      if (!any) {
        std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(g.k_count));
        fb[i] = 1;
        ++fallback_rows;
        continue;
      }
      const double mx = *std::max_element(row.begin(), row.end());
      double s = 0.0;
      for (double& x : row) s += (x = std::exp(x - mx));
      for (double& x : row) x /= s;
    }
    RowBlock(out, g.q_begin, g.q_count).noalias() = View(w) * RowBlock(vm, g.k_begin, g.k_count);
    weights->push_back(std::move(w));
    fallback->push_back(std::move(fb));
  }
  if (trace) {
    trace->weights = *weights;
    trace->fallback_rows = fallback_rows;
  }
  const int iq = q.id(), ik = k.id(), iv = v.id();
  return t->Record(std::move(out), {iq, ik, iv},
                   [iq, ik, iv, layout, weights, fallback, inv_sqrt](Tape& tp, int self) {
    const Matrix& gout = tp.GradRef(self);
    const Matrix& qv = tp.Value(iq);
    const Matrix& kv = tp.Value(ik);
    const Matrix& vv = tp.Value(iv);
    const bool need_q = tp.RequiresGrad(iq), need_k = tp.RequiresGrad(ik), need_v = tp.RequiresGrad(iv);
    for (std::size_t gi = 0; gi < layout->groups.size(); ++gi) {
      const AttentionGroup& g = layout->groups[gi];
      const Matrix& w = (*weights)[gi];
      const auto go = RowBlock(gout, g.q_begin, g.q_count);
      if (need_v) RowBlock(tp.GradRef(iv), g.k_begin, g.k_count).noalias() += View(w).transpose() * go;
      if (!need_q && !need_k) continue;
      Matrix dw(g.q_count, g.k_count);
      View(dw).noalias() = go * RowBlock(vv, g.k_begin, g.k_count).transpose();
      for (std::size_t i = 0; i < g.q_count; ++i) {
        auto drow = dw.row(i);
        if ((*fallback)[gi][i]) {
          std::fill(drow.begin(), drow.end(), 0.0);
          continue;
        }
        const auto wrow = w.row(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < g.k_count; ++j) dot += drow[j] * wrow[j];
        for (std::size_t j = 0; j < g.k_count; ++j) drow[j] = wrow[j] * (drow[j] - dot) * inv_sqrt;
      }
      if (need_q) RowBlock(tp.GradRef(iq), g.q_begin, g.q_count).noalias() += View(dw) * RowBlock(kv, g.k_begin, g.k_count);
      if (need_k) RowBlock(tp.GradRef(ik), g.k_begin, g.k_count).noalias() += View(dw).transpose() * RowBlock(qv, g.q_begin, g.q_count);
    }
  });
}

}  // namespace ad
}  // namespace plantune

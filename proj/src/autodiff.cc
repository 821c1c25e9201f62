// Copyright 2026 The Meadow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "meadow/autodiff.h"

#include <cmath>
#include <string>

namespace meadow::ad {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void RequireSameShape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                    std::to_string(a.cols()) + " vs " +
                    std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

Tape& TapeOf(const Var& a) {
  if (!a.valid()) throw Error(ErrorCode::kShapeMismatch, "unbound variable");
  return *a.tape();
}

// unary elementwise op given value map and derivative map (as functions of
// the input and output arrays)
template <typename F, typename D>
Var Unary(Var a, F f, D d) {
  Tape& t = TapeOf(a);
  Eigen::MatrixXd out = f(a.value().array()).matrix();
  const int ia = a.id();
  return t.Record(std::move(out), {a}, [ia, d](Tape& tape, int self) {
    const Eigen::MatrixXd& g = tape.grad_ref(self);
    tape.Accumulate(
        ia, (g.array() * d(tape.value(ia).array(), tape.value(self).array()))
                .matrix());
  });
}

}  // namespace

double NormalCdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }
double NormalPdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

Var Tape::Constant(Eigen::MatrixXd value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return Var(this, size() - 1);
}

Var Tape::Leaf(Eigen::MatrixXd value) {
  nodes_.push_back(Node{std::move(value), {}, true, {}});
  return Var(this, size() - 1);
}

Var Tape::Record(Eigen::MatrixXd value, const std::vector<Var>& inputs,
                 BackwardFn backward) {
  bool needs = false;
  for (const Var& v : inputs) {
    if (v.tape() != this) {
      throw Error(ErrorCode::kShapeMismatch, "variable from a different tape");
    }
    needs = needs || nodes_[v.id()].needs_grad;
  }
  if (consumed_) throw Error(ErrorCode::kTapeConsumed, "tape already swept");
  nodes_.push_back(
      Node{std::move(value), {}, needs, needs ? std::move(backward) : nullptr});
  return Var(this, size() - 1);
}

Eigen::MatrixXd Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) {
    return Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

void Tape::Backward(Var output, const Eigen::MatrixXd& seed) {
  if (consumed_) throw Error(ErrorCode::kTapeConsumed, "tape already swept");
  if (output.tape() != this) {
    throw Error(ErrorCode::kShapeMismatch, "output from a different tape");
  }
  if (seed.rows() != output.rows() || seed.cols() != output.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "seed shape does not match output");
  }
  consumed_ = true;
  Accumulate(output.id(), seed);
  for (int id = output.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.size() == 0) continue;
    n.backward(*this, id);
  }
}

void Tape::Backward(Var output) {
  Backward(output, Eigen::MatrixXd::Ones(output.rows(), output.cols()));
}

Var Add(Var a, Var b) {
  RequireSameShape(a, b, "Add");
  const int ia = a.id(), ib = b.id();
  return TapeOf(a).Record(a.value() + b.value(), {a, b},
                          [ia, ib](Tape& t, int self) {
                            t.Accumulate(ia, t.grad_ref(self));
                            t.Accumulate(ib, t.grad_ref(self));
                          });
}

Var Sub(Var a, Var b) {
  RequireSameShape(a, b, "Sub");
  const int ia = a.id(), ib = b.id();
  return TapeOf(a).Record(a.value() - b.value(), {a, b},
                          [ia, ib](Tape& t, int self) {
                            t.Accumulate(ia, t.grad_ref(self));
                            t.Accumulate(ib, -t.grad_ref(self));
                          });
}

Var Mul(Var a, Var b) {
  RequireSameShape(a, b, "Mul");
  const int ia = a.id(), ib = b.id();
  return TapeOf(a).Record(
      a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](Tape& t, int self) {
        const Eigen::MatrixXd& g = t.grad_ref(self);
        t.Accumulate(ia, g.cwiseProduct(t.value(ib)));
        t.Accumulate(ib, g.cwiseProduct(t.value(ia)));
      });
}

Var Div(Var a, Var b) {
  RequireSameShape(a, b, "Div");
  const int ia = a.id(), ib = b.id();
  return TapeOf(a).Record(
      a.value().cwiseQuotient(b.value()), {a, b}, [ia, ib](Tape& t, int self) {
        const Eigen::MatrixXd& g = t.grad_ref(self);
        const Eigen::ArrayXXd bv = t.value(ib).array();
        t.Accumulate(ia, (g.array() / bv).matrix());
        t.Accumulate(ib, (-g.array() * t.value(self).array() / bv).matrix());
      });
}

Var Min(Var a, Var b) {
  RequireSameShape(a, b, "Min");
  const int ia = a.id(), ib = b.id();
  return TapeOf(a).Record(
      a.value().cwiseMin(b.value()), {a, b}, [ia, ib](Tape& t, int self) {
        const Eigen::ArrayXXd g = t.grad_ref(self).array();
        const auto pick_a = (t.value(ia).array() <= t.value(ib).array());
        t.Accumulate(ia, pick_a.select(g, 0.0).matrix());
        t.Accumulate(ib, pick_a.select(0.0, g).matrix());
      });
}

Var Max(Var a, Var b) {
  RequireSameShape(a, b, "Max");
  const int ia = a.id(), ib = b.id();
  return TapeOf(a).Record(
      a.value().cwiseMax(b.value()), {a, b}, [ia, ib](Tape& t, int self) {
        const Eigen::ArrayXXd g = t.grad_ref(self).array();
        const auto pick_a = (t.value(ia).array() >= t.value(ib).array());
        t.Accumulate(ia, pick_a.select(g, 0.0).matrix());
        t.Accumulate(ib, pick_a.select(0.0, g).matrix());
      });
}

Var Neg(Var a) { return Scale(a, -1.0); }

Var Scale(Var a, double s) {
  const int ia = a.id();
  return TapeOf(a).Record(s * a.value(), {a}, [ia, s](Tape& t, int self) {
    t.Accumulate(ia, s * t.grad_ref(self));
  });
}

Var AddScalar(Var a, double s) {
  const int ia = a.id();
  return TapeOf(a).Record(
      (a.value().array() + s).matrix(), {a},
      [ia](Tape& t, int self) { t.Accumulate(ia, t.grad_ref(self)); });
}

Var Clip(Var a, double lo, double hi) {
  return Unary(
      a, [lo, hi](const auto& x) { return x.max(lo).min(hi); },
      [lo, hi](const auto& x, const auto&) {
        return ((x >= lo) && (x <= hi)).template cast<double>();
      });
}

Var Exp(Var a) {
  return Unary(
      a, [](const auto& x) { return x.exp(); },
      [](const auto&, const auto& y) { return y; });
}

Var Log(Var a) {
  return Unary(
      a, [](const auto& x) { return x.log(); },
      [](const auto& x, const auto&) { return x.inverse(); });
}

Var Tanh(Var a) {
  return Unary(
      a, [](const auto& x) { return x.tanh(); },
      [](const auto&, const auto& y) { return 1.0 - y.square(); });
}

Var Softplus(Var a) {
  // log(1 + e^x) = max(x, 0) + log1p(e^-|x|)
  return Unary(
      a,
      [](const auto& x) { return x.max(0.0) + (-x.abs()).exp().log1p(); },
      [](const auto& x, const auto&) { return 1.0 / (1.0 + (-x).exp()); });
}

Var LeakyRelu(Var a, double slope) {
  return Unary(
      a,
      [slope](const auto& x) { return (x > 0.0).select(x, slope * x); },
      [slope](const auto& x, const auto&) {
        return (x > 0.0).select(Eigen::ArrayXXd::Ones(x.rows(), x.cols()),
                                slope);
      });
}

Var Square(Var a) {
  return Unary(
      a, [](const auto& x) { return x.square(); },
      [](const auto& x, const auto&) { return 2.0 * x; });
}

Var Sqrt(Var a) {
  return Unary(
      a, [](const auto& x) { return x.max(0.0).sqrt(); },
      [](const auto& x, const auto&) { return 0.5 / x.max(1e-24).sqrt(); });
}

Var XLogX(Var a) {
  return Unary(
      a,
      [](const auto& x) {
        return (x > 0.0).select(x * x.max(1e-300).log(), 0.0);
      },
      [](const auto& x, const auto&) { return x.max(1e-300).log() + 1.0; });
}

Var NormalCdf(Var a) {
  return Unary(
      a,
      [](const auto& x) {
        return x.unaryExpr([](double v) { return NormalCdf(v); });
      },
      [](const auto& x, const auto&) {
        return kInvSqrt2Pi * (-0.5 * x.square()).exp();
      });
}

Var NormalPdf(Var a) {
  return Unary(
      a,
      [](const auto& x) { return kInvSqrt2Pi * (-0.5 * x.square()).exp(); },
      [](const auto& x, const auto& y) { return -x * y; });
}

Var WrapUnit(Var a) {
  return Unary(
      a, [](const auto& x) { return x - x.floor(); },
      [](const auto& x, const auto&) {
        return Eigen::ArrayXXd::Ones(x.rows(), x.cols());
      });
}

Var MatMul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "MatMul: inner dimensions differ");
  }
  const int ia = a.id(), ib = b.id();
  return TapeOf(a).Record(a.value() * b.value(), {a, b},
                          [ia, ib](Tape& t, int self) {
                            const Eigen::MatrixXd& g = t.grad_ref(self);
                            if (t.needs_grad(ia)) {
                              t.Accumulate(ia, g * t.value(ib).transpose());
                            }
                            if (t.needs_grad(ib)) {
                              t.Accumulate(ib, t.value(ia).transpose() * g);
                            }
                          });
}

Var Affine(Var x, Var w, Var b) {
  if (x.cols() != w.cols() || b.rows() != w.rows() || b.cols() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "Affine: incompatible shapes");
  }
  Eigen::MatrixXd out = x.value() * w.value().transpose();
  out.rowwise() += b.value().col(0).transpose();
  const int ix = x.id(), iw = w.id(), ib = b.id();
  return TapeOf(x).Record(std::move(out), {x, w, b},
                          [ix, iw, ib](Tape& t, int self) {
                            const Eigen::MatrixXd& g = t.grad_ref(self);
                            if (t.needs_grad(ix)) {
                              t.Accumulate(ix, g * t.value(iw));
                            }
                            if (t.needs_grad(iw)) {
                              t.Accumulate(iw, g.transpose() * t.value(ix));
                            }
                            if (t.needs_grad(ib)) {
                              t.Accumulate(ib, g.colwise().sum().transpose());
                            }
                          });
}

Var Transpose(Var a) {
  const int ia = a.id();
  return TapeOf(a).Record(a.value().transpose(), {a}, [ia](Tape& t, int self) {
    t.Accumulate(ia, t.grad_ref(self).transpose());
  });
}

Var Sum(Var a) {
  const int ia = a.id();
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = a.value().sum();
  const Eigen::Index r = a.rows(), c = a.cols();
  return TapeOf(a).Record(std::move(out), {a}, [ia, r, c](Tape& t, int self) {
    t.Accumulate(ia, Eigen::MatrixXd::Constant(r, c, t.grad_ref(self)(0, 0)));
  });
}

Var BroadcastRows(Var row, Eigen::Index n) {
  if (row.rows() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "BroadcastRows expects a 1 x m row");
  }
  const int ia = row.id();
  return TapeOf(row).Record(row.value().replicate(n, 1), {row},
                            [ia](Tape& t, int self) {
                              t.Accumulate(ia, t.grad_ref(self).colwise().sum());
                            });
}

Var HConcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorCode::kShapeMismatch, "HConcat: no parts");
  Tape& t = TapeOf(parts[0]);
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) {
      throw Error(ErrorCode::kShapeMismatch, "HConcat: row counts differ");
    }
    cols += p.cols();
  }
  Eigen::MatrixXd out(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    ids.push_back(p.id());
    offsets.push_back(at);
    at += p.cols();
  }
  return t.Record(std::move(out), parts, [ids, offsets](Tape& tape, int self) {
    const Eigen::MatrixXd& g = tape.grad_ref(self);
    for (size_t k = 0; k < ids.size(); ++k) {
      const Eigen::Index c = tape.value(ids[k]).cols();
      tape.Accumulate(ids[k], g.middleCols(offsets[k], c));
    }
  });
}

Var Cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || start + count > a.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "Cols: range out of bounds");
  }
  const int ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return TapeOf(a).Record(a.value().middleCols(start, count), {a},
                          [ia, r, c, start, count](Tape& t, int self) {
                            Eigen::MatrixXd g = Eigen::MatrixXd::Zero(r, c);
                            g.middleCols(start, count) = t.grad_ref(self);
                            t.Accumulate(ia, g);
                          });
}

}  // namespace meadow::ad

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

#ifndef MEADOW_AUTODIFF_H_
#define MEADOW_AUTODIFF_H_

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "meadow/errors.h"

// Reverse-mode differentiation over dense matrices. Every primitive records
// its value and a closure that pushes the output gradient to its inputs.
// Nodes whose inputs are all constants record no closure.
namespace meadow::ad {

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Eigen::MatrixXd& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  // value of a 1x1 node
  double scalar() const { return value()(0, 0); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int)>;

  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // value that gradients do not flow into
  Var Constant(Eigen::MatrixXd value);
  // differentiable input
  Var Leaf(Eigen::MatrixXd value);

  // records a primitive; `backward` runs only if some input needs a gradient
  Var Record(Eigen::MatrixXd value, const std::vector<Var>& inputs,
             BackwardFn backward);
  Var Record(Eigen::MatrixXd value, std::initializer_list<Var> inputs,
             BackwardFn backward) {
    return Record(std::move(value), std::vector<Var>(inputs), std::move(backward));
  }

  const Eigen::MatrixXd& value(int id) const { return nodes_[id].value; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }

  // gradient of the last backward pass (zeros if nothing reached the node)
  Eigen::MatrixXd grad(Var v) const;
  const Eigen::MatrixXd& grad_ref(int id) const { return nodes_[id].grad; }

  // adds `g` into the gradient of `id` when it participates in the graph
  template <typename Derived>
  void Accumulate(int id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  // seeds d(output) = seed and sweeps the tape once; a tape can only be
  // swept once (kTapeConsumed afterwards)
  void Backward(Var output, const Eigen::MatrixXd& seed);
  // scalar output with unit seed
  void Backward(Var output);

  int size() const { return static_cast<int>(nodes_.size()); }
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    bool needs_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

inline const Eigen::MatrixXd& Var::value() const { return tape_->value(id_); }

// -- elementwise arithmetic (operands must share a shape) --
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);
Var Div(Var a, Var b);
Var Min(Var a, Var b);
Var Max(Var a, Var b);
Var Neg(Var a);
Var Scale(Var a, double s);
Var AddScalar(Var a, double s);
Var Clip(Var a, double lo, double hi);

// -- elementwise functions --
Var Exp(Var a);
Var Log(Var a);
Var Tanh(Var a);
Var Softplus(Var a);
Var LeakyRelu(Var a, double slope = 0.01);
Var Square(Var a);
// derivative at 0 is taken from max(a, 1e-24) so that zero spreads stay finite
Var Sqrt(Var a);
// x log x with 0 log 0 = 0
Var XLogX(Var a);
// standard normal CDF and density
Var NormalCdf(Var a);
Var NormalPdf(Var a);
// remainder in [0, 1) with unit derivative almost everywhere
Var WrapUnit(Var a);

// -- linear algebra and reshaping --
Var MatMul(Var a, Var b);
// rows of x mapped through w (out x in) plus bias (out x 1)
Var Affine(Var x, Var w, Var b);
Var Transpose(Var a);
Var Sum(Var a);
// 1 x m row repeated n times
Var BroadcastRows(Var row, Eigen::Index n);
// horizontal concatenation (equal row counts)
Var HConcat(const std::vector<Var>& parts);
Var Cols(Var a, Eigen::Index start, Eigen::Index count);

inline Var operator+(Var a, Var b) { return Add(a, b); }
inline Var operator-(Var a, Var b) { return Sub(a, b); }
inline Var operator*(Var a, Var b) { return Mul(a, b); }
inline Var operator/(Var a, Var b) { return Div(a, b); }
inline Var operator-(Var a) { return Neg(a); }
inline Var operator*(double s, Var a) { return Scale(a, s); }
inline Var operator*(Var a, double s) { return Scale(a, s); }
inline Var operator+(Var a, double s) { return AddScalar(a, s); }
inline Var operator-(Var a, double s) { return AddScalar(a, -s); }

// scalar helpers used outside the tape
double NormalCdf(double x);
double NormalPdf(double x);

}  // namespace meadow::ad

#endif  // MEADOW_AUTODIFF_H_

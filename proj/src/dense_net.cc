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

#include "meadow/dense_net.h"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace meadow {
namespace {

Eigen::ArrayXXd Activate(Activation a, const Eigen::ArrayXXd& x) {
  switch (a) {
    case Activation::kLinear: return x;
    case Activation::kTanh: return x.tanh();
    case Activation::kSoftplus: return x.max(0.0) + (-x.abs()).exp().log1p();
    case Activation::kLeakyRelu: return (x > 0.0).select(x, 0.01 * x);
  }
  return x;
}

ad::Var Activate(Activation a, ad::Var x) {
  switch (a) {
    case Activation::kLinear: return x;
    case Activation::kTanh: return ad::Tanh(x);
    case Activation::kSoftplus: return ad::Softplus(x);
    case Activation::kLeakyRelu: return ad::LeakyRelu(x);
  }
  return x;
}

}  // namespace

const char* ActivationTag(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kTanh: return "tanh";
    case Activation::kSoftplus: return "softplus";
    case Activation::kLeakyRelu: return "leaky-relu";
  }
  return "linear";
}

Activation ParseActivation(const std::string& tag) {
  if (tag == "linear") return Activation::kLinear;
  if (tag == "tanh") return Activation::kTanh;
  if (tag == "softplus") return Activation::kSoftplus;
  if (tag == "leaky-relu") return Activation::kLeakyRelu;
  throw Error(ErrorCode::kConfig, "unknown activation '" + tag + "'");
}

void ParamVector::Assign(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() != values_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "parameter length is fixed");
  }
  values_ = v;
}

DenseNet::DenseNet(std::vector<int> layer_sizes, std::vector<Head> heads)
    : layer_sizes_(std::move(layer_sizes)), heads_(std::move(heads)) {
  if (layer_sizes_.size() < 2) {
    throw Error(ErrorCode::kShapeMismatch, "network needs at least two layers");
  }
  for (int s : layer_sizes_) {
    if (s <= 0) throw Error(ErrorCode::kShapeMismatch, "layer sizes must be positive");
  }
  int head_total = 0;
  for (const Head& h : heads_) head_total += h.size;
  if (head_total != layer_sizes_.back()) {
    throw Error(ErrorCode::kShapeMismatch, "heads do not cover the output layer");
  }
  Eigen::Index n = 0;
  for (int l = 0; l < num_layers(); ++l) {
    offsets_.push_back(n);
    n += static_cast<Eigen::Index>(layer_sizes_[l]) * layer_sizes_[l + 1] +
         layer_sizes_[l + 1];
  }
  params_ = ParamVector(n);
}

void DenseNet::InitXavier(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(params_.size());
  for (int l = 0; l < num_layers(); ++l) {
    const int fan_in = layer_sizes_[l], fan_out = layer_sizes_[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-bound, bound);
    const Eigen::Index w = WeightOffset(l);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(fan_in) * fan_out; ++i) {
      p[w + i] = u(rng);
    }
  }
  params_.Assign(p);
}

void DenseNet::CheckInput(const Eigen::Ref<const Eigen::MatrixXd>& input) const {
  if (input.cols() != input_size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "network expects " + std::to_string(input_size()) +
                    " inputs, got " + std::to_string(input.cols()));
  }
  if (!input.allFinite()) {
    throw Error(ErrorCode::kNonFiniteInput, "network input is not finite");
  }
}

Eigen::MatrixXd DenseNet::Forward(
    const Eigen::Ref<const Eigen::MatrixXd>& input) const {
  CheckInput(input);
  Eigen::MatrixXd x = input;
  for (int l = 0; l < num_layers(); ++l) {
    const int in = layer_sizes_[l], out = layer_sizes_[l + 1];
    Eigen::Map<const Eigen::MatrixXd> w(params_.data() + WeightOffset(l), out, in);
    Eigen::Map<const Eigen::VectorXd> b(params_.data() + BiasOffset(l), out);
    Eigen::MatrixXd y = x * w.transpose();
    y.rowwise() += b.transpose();
    if (l + 1 < num_layers()) {
      x = Activate(Activation::kLeakyRelu, y.array()).matrix();
    } else {
      x = std::move(y);
    }
  }
  int at = 0;
  for (const Head& h : heads_) {
    x.middleCols(at, h.size) =
        Activate(h.activation, x.middleCols(at, h.size).array()).matrix();
    at += h.size;
  }
  return x;
}

DenseNet::Bound DenseNet::Bind(ad::Tape& tape, bool trainable) const {
  Bound bound;
  for (int l = 0; l < num_layers(); ++l) {
    const int in = layer_sizes_[l], out = layer_sizes_[l + 1];
    Eigen::Map<const Eigen::MatrixXd> w(params_.data() + WeightOffset(l), out, in);
    Eigen::Map<const Eigen::VectorXd> b(params_.data() + BiasOffset(l), out);
    bound.weights.push_back(trainable ? tape.Leaf(w) : tape.Constant(w));
    bound.biases.push_back(trainable ? tape.Leaf(b) : tape.Constant(b));
  }
  return bound;
}

ad::Var DenseNet::Forward(const Bound& bound, ad::Var input) const {
  CheckInput(input.value());
  ad::Var x = input;
  for (int l = 0; l < num_layers(); ++l) {
    x = ad::Affine(x, bound.weights[l], bound.biases[l]);
    if (l + 1 < num_layers()) x = ad::LeakyRelu(x);
  }
  if (heads_.size() == 1) return Activate(heads_[0].activation, x);
  std::vector<ad::Var> parts;
  int at = 0;
  for (const Head& h : heads_) {
    parts.push_back(Activate(h.activation, ad::Cols(x, at, h.size)));
    at += h.size;
  }
  return ad::HConcat(parts);
}

Eigen::VectorXd DenseNet::GatherGradient(const ad::Tape& tape,
                                         const Bound& bound) const {
  Eigen::VectorXd g(params_.size());
  for (int l = 0; l < num_layers(); ++l) {
    const int in = layer_sizes_[l], out = layer_sizes_[l + 1];
    const Eigen::MatrixXd gw = tape.grad(bound.weights[l]);
    const Eigen::MatrixXd gb = tape.grad(bound.biases[l]);
    Eigen::Map<Eigen::MatrixXd>(g.data() + WeightOffset(l), out, in) = gw;
    Eigen::Map<Eigen::VectorXd>(g.data() + BiasOffset(l), out) = gb.col(0);
  }
  return g;
}

std::string DenseNet::ArchitectureLine() const {
  std::ostringstream os;
  os << "arch:";
  for (int s : layer_sizes_) os << ' ' << s;
  for (const Head& h : heads_) os << ' ' << ActivationTag(h.activation) << ':' << h.size;
  return os.str();
}

void DenseNet::Save(std::ostream& out) const {
  out << ArchitectureLine() << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index i = 0; i < params_.size(); ++i) out << params_.values()[i] << '\n';
}

DenseNet DenseNet::Load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("arch:", 0) != 0) {
    throw Error(ErrorCode::kIo, "checkpoint is missing its arch line");
  }
  std::istringstream is(line.substr(5));
  std::vector<int> sizes;
  std::vector<Head> heads;
  std::string token;
  while (is >> token) {
    const auto colon = token.find(':');
    if (colon == std::string::npos) {
      sizes.push_back(std::stoi(token));
    } else {
      heads.push_back(
          {std::stoi(token.substr(colon + 1)), ParseActivation(token.substr(0, colon))});
    }
  }
  DenseNet net(sizes, heads);
  Eigen::VectorXd p(net.params().size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(in >> p[i])) throw Error(ErrorCode::kIo, "checkpoint is truncated");
  }
  net.params().Assign(p);
  return net;
}

}  // namespace meadow

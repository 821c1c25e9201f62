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

#ifndef MEADOW_DENSE_NET_H_
#define MEADOW_DENSE_NET_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "meadow/autodiff.h"

namespace meadow {

enum class Activation { kLinear, kTanh, kSoftplus, kLeakyRelu };

const char* ActivationTag(Activation a);
Activation ParseActivation(const std::string& tag);

// A contiguous block of the output layer with its own activation.
struct Head {
  int size;
  Activation activation;
};

// Flat parameter storage. The length is fixed at construction.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(Eigen::Index n) : values_(Eigen::VectorXd::Zero(n)) {}

  Eigen::Index size() const { return values_.size(); }
  const Eigen::VectorXd& values() const { return values_; }

  // replaces all entries; the length must match
  void Assign(const Eigen::Ref<const Eigen::VectorXd>& v);
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

 private:
  Eigen::VectorXd values_;
};

// Fully connected network: leaky-ReLU hidden layers and a final affine layer
// whose outputs are split into heads. layer_sizes = {input, hidden..., output}
// where output equals the sum of the head sizes. Rows of an input batch are
// independent samples.
class DenseNet {
 public:
  DenseNet() = default;
  DenseNet(std::vector<int> layer_sizes, std::vector<Head> heads);

  const std::vector<int>& layer_sizes() const { return layer_sizes_; }
  const std::vector<Head>& heads() const { return heads_; }
  int input_size() const { return layer_sizes_.front(); }
  int output_size() const { return layer_sizes_.back(); }
  int num_layers() const { return static_cast<int>(layer_sizes_.size()) - 1; }

  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }

  // weights ~ U(+-sqrt(6 / (fan_in + fan_out))), biases 0
  void InitXavier(std::uint64_t seed);

  // plain batched evaluation (no tape)
  Eigen::MatrixXd Forward(const Eigen::Ref<const Eigen::MatrixXd>& input) const;

  // per-layer parameter nodes on a tape
  struct Bound {
    std::vector<ad::Var> weights;
    std::vector<ad::Var> biases;
  };
  // trainable = false records the parameters as constants
  Bound Bind(ad::Tape& tape, bool trainable = true) const;
  ad::Var Forward(const Bound& bound, ad::Var input) const;
  // flattened gradient in parameter index order
  Eigen::VectorXd GatherGradient(const ad::Tape& tape, const Bound& bound) const;

  // checkpoint: "arch: <sizes> <tag:size ...>" then one parameter per line
  void Save(std::ostream& out) const;
  static DenseNet Load(std::istream& in);
  std::string ArchitectureLine() const;

 private:
  Eigen::Index WeightOffset(int layer) const { return offsets_[layer]; }
  Eigen::Index BiasOffset(int layer) const {
    return offsets_[layer] +
           static_cast<Eigen::Index>(layer_sizes_[layer]) * layer_sizes_[layer + 1];
  }
  void CheckInput(const Eigen::Ref<const Eigen::MatrixXd>& input) const;

  std::vector<int> layer_sizes_;
  std::vector<Head> heads_;
  std::vector<Eigen::Index> offsets_;
  ParamVector params_;
};

}  // namespace meadow

#endif  // MEADOW_DENSE_NET_H_

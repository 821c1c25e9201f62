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

#include "meadow/optim.h"

#include <cmath>

namespace meadow {

AdamW::AdamW(Eigen::Index num_params, AdamWConfig config)
    : config_(config),
      m_(Eigen::VectorXd::Zero(num_params)),
      v_(Eigen::VectorXd::Zero(num_params)) {
  if (!(config_.learning_rate > 0.0)) {
    throw Error(ErrorCode::kConfig, "learning rate must be positive");
  }
}

void AdamW::Step(ParamVector& params, const Eigen::Ref<const Eigen::VectorXd>& grad) {
  if (grad.size() != m_.size() || params.size() != m_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "optimizer state does not match");
  }
  if (!grad.allFinite()) {
    throw Error(ErrorCode::kNonFiniteGradient, "gradient has non-finite entries");
  }
  ++t_;
  const AdamWConfig& c = config_;
  m_ = c.beta1 * m_ + (1.0 - c.beta1) * grad;
  v_ = c.beta2 * v_ + (1.0 - c.beta2) * grad.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(c.beta1, t_);
  const double bc2 = 1.0 - std::pow(c.beta2, t_);
  Eigen::VectorXd p = params.values() * (1.0 - c.learning_rate * c.weight_decay);
  p.array() -= c.learning_rate * (m_.array() / bc1) /
               ((v_.array() / bc2).sqrt() + c.eps);
  params.Assign(p);
}

double ClipGlobalNorm(Eigen::Ref<Eigen::VectorXd> grad, double max_norm) {
  const double norm = grad.norm();
  if (norm > max_norm) grad *= max_norm / norm;
  return norm;
}

}  // namespace meadow

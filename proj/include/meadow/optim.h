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

#ifndef MEADOW_OPTIM_H_
#define MEADOW_OPTIM_H_

#include <Eigen/Dense>

#include "meadow/dense_net.h"

namespace meadow {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with decoupled weight decay. Step() descends: pass the negated
// gradient for ascent.
class AdamW {
 public:
  AdamW(Eigen::Index num_params, AdamWConfig config);

  void Step(ParamVector& params, const Eigen::Ref<const Eigen::VectorXd>& grad);

  int steps() const { return t_; }
  const AdamWConfig& config() const { return config_; }

 private:
  AdamWConfig config_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  int t_ = 0;
};

// scales grad in place to norm <= max_norm; returns the norm before clipping
double ClipGlobalNorm(Eigen::Ref<Eigen::VectorXd> grad, double max_norm = 1.0);

}  // namespace meadow

#endif  // MEADOW_OPTIM_H_

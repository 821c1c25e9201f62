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

#ifndef MEADOW_KERNEL_H_
#define MEADOW_KERNEL_H_

#include <vector>

#include <Eigen/Dense>

#include "meadow/autodiff.h"
#include "meadow/grid.h"

namespace meadow {

// Per-axis transition probabilities of a Gaussian step. For source i with
// mean m_i, factor[a](i, b) is the probability that axis a lands in bin b.
// On the torus the mean is wrapped into [0, 1) and the Gaussian is summed
// over integer shifts; on the clipped box the edge bins absorb the tails.
// The transition probability between cells is the product over axes.
struct AxisFactors {
  std::vector<Eigen::MatrixXd> factor;
  // derivative of factor with respect to the source mean on that axis
  std::vector<Eigen::MatrixXd> derivative;
};

// means is n_sources x dim; noise_std <= 0 gives the deterministic limit
// (all mass in the bin containing the mean, zero derivative)
AxisFactors ComputeAxisFactors(const GridSpec& grid,
                               const Eigen::Ref<const Eigen::MatrixXd>& means,
                               double noise_std, bool with_derivative);

// dense n_sources x num_cells kernel (rows are next-cell distributions)
Eigen::MatrixXd TransitionKernel(const GridSpec& grid,
                                 const Eigen::Ref<const Eigen::MatrixXd>& means,
                                 double noise_std);

// next-cell masses: sum_i mass_i K_i
Eigen::VectorXd Propagate(const GridSpec& grid,
                          const Eigen::Ref<const Eigen::MatrixXd>& means,
                          const Eigen::Ref<const Eigen::VectorXd>& mass,
                          double noise_std);

// Same as Propagate, differentiable in both the source means (n x dim) and
// the source masses (n x 1). Returns num_cells x 1.
ad::Var GridTransition(const GridSpec& grid, ad::Var means, ad::Var mass,
                       double noise_std);

}  // namespace meadow

#endif  // MEADOW_KERNEL_H_

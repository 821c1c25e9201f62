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

#ifndef MEADOW_TRANSPORT_H_
#define MEADOW_TRANSPORT_H_

#include <vector>

#include <Eigen/Dense>

#include "meadow/grid.h"

namespace meadow {

struct FlowEntry {
  int from;
  int to;
  double amount;
};

struct TransportSolution {
  double cost = 0.0;
  // dual potentials: cost(i, j) >= supply_potential[i] + demand_potential[j]
  // with equality on every arc carrying flow
  Eigen::VectorXd supply_potential;
  Eigen::VectorXd demand_potential;
  std::vector<FlowEntry> flow;
  int pivots = 0;
};

// Minimum-cost transport between two mass vectors on a dense bipartite
// graph, solved by the network simplex method specialised to transportation
// problems. Totals may differ by at most 1e-12 (the demand side is rescaled);
// larger mismatches raise kFlowInfeasible.
TransportSolution SolveTransport(const Eigen::Ref<const Eigen::VectorXd>& supply,
                                 const Eigen::Ref<const Eigen::VectorXd>& demand,
                                 const Eigen::Ref<const Eigen::MatrixXd>& cost);

// L1 distances between the cell centers of a grid
Eigen::MatrixXd GridL1Cost(const GridSpec& grid);

// Exact W1 with L1 ground metric on a clipped-box grid.
double Wasserstein1Grid(const GridDistribution& mu, const GridDistribution& nu);

// W1 together with the optimal potentials; supply_potential is a
// supergradient of W1 with respect to mu's mass.
TransportSolution Wasserstein1GridPlan(const GridDistribution& mu,
                                       const GridDistribution& nu);

// Dispatches to the CDF closed form on 1D grids and to the flow solver on
// 2D grids.
double Wasserstein1(const GridDistribution& mu, const GridDistribution& nu);

}  // namespace meadow

#endif  // MEADOW_TRANSPORT_H_

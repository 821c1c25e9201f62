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

#include "meadow/grid.h"

#include <algorithm>
#include <string>

namespace meadow {

GridSpec::GridSpec(int dim, int bins, Topology topology)
    : dim_(dim), bins_(bins), topology_(topology) {
  if (dim != 1 && dim != 2) {
    throw Error(ErrorCode::kWrongDimensionality,
                "grid dimensionality must be 1 or 2, got " +
                    std::to_string(dim));
  }
  if (bins <= 0) {
    throw Error(ErrorCode::kGridMismatch, "bins per axis must be positive");
  }
}

Eigen::MatrixXd GridSpec::CellCenters() const {
  Eigen::MatrixXd centers(num_cells(), dim_);
  for (int c = 0; c < num_cells(); ++c) {
    Eigen::VectorXi b = AxisBins(c);
    for (int d = 0; d < dim_; ++d) centers(c, d) = AxisCenter(b[d]);
  }
  return centers;
}

int GridSpec::CellIndex(const Eigen::Ref<const Eigen::VectorXd>& point) const {
  int index = 0;
  for (int d = 0; d < dim_; ++d) {
    double x = point[d];
    if (topology_ == Topology::kTorus) x -= std::floor(x);
    int b = static_cast<int>(std::floor(x * bins_));
    b = std::clamp(b, 0, bins_ - 1);
    index = index * bins_ + b;
  }
  return index;
}

Eigen::VectorXi GridSpec::AxisBins(int cell) const {
  Eigen::VectorXi b(dim_);
  if (dim_ == 1) {
    b[0] = cell;
  } else {
    b[0] = cell / bins_;
    b[1] = cell % bins_;
  }
  return b;
}

GridDistribution::GridDistribution(GridSpec grid, Eigen::VectorXd mass)
    : grid_(grid), mass_(std::move(mass)) {
  if (mass_.size() != grid_.num_cells()) {
    throw Error(ErrorCode::kGridMismatch,
                "mass has " + std::to_string(mass_.size()) +
                    " entries, grid has " + std::to_string(grid_.num_cells()));
  }
  if ((mass_.array() < 0.0).any() || !mass_.allFinite()) {
    throw Error(ErrorCode::kNegativeWeight,
                "distribution entries must be finite and non-negative");
  }
  const double total = mass_.sum();
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::kAllZero,
                "distribution mass sums to " + std::to_string(total));
  }
}

GridDistribution GridDistribution::Uniform(const GridSpec& grid) {
  return GridDistribution(
      grid, Eigen::VectorXd::Constant(grid.num_cells(), 1.0 / grid.num_cells()));
}

GridDistribution GridDistribution::PointMass(const GridSpec& grid, int cell) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(grid.num_cells());
  m[cell] = 1.0;
  return GridDistribution(grid, std::move(m));
}

void RequireSameGrid(const GridSpec& a, const GridSpec& b) {
  if (a != b) {
    throw Error(ErrorCode::kGridMismatch, "distributions live on different grids");
  }
}

GridDistribution Normalize(const Eigen::Ref<const Eigen::VectorXd>& weights,
                           const GridSpec& grid) {
  if ((weights.array() < 0.0).any()) {
    throw Error(ErrorCode::kNegativeWeight, "negative weight");
  }
  const double total = weights.sum();
  if (!(total > 0.0)) throw Error(ErrorCode::kAllZero, "weights carry no mass");
  return GridDistribution(grid, weights / total);
}

GridDistribution Histogram(const Eigen::Ref<const Eigen::MatrixXd>& points,
                           const GridSpec& grid) {
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(grid.num_cells());
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    counts[grid.CellIndex(points.row(r).transpose())] += 1.0;
  }
  return Normalize(counts, grid);
}

double ShannonEntropy(const GridDistribution& mu) {
  return ShannonEntropy(mu.mass());
}

double SmoothedDifferentialEntropy(const GridDistribution& mu, double eps) {
  if (!(eps > 0.0)) {
    throw Error(ErrorCode::kNonPositiveEpsilon, "epsilon must be positive");
  }
  const Eigen::VectorXd density = mu.Density();
  return -((density.array() + eps).log() * mu.mass().array()).sum();
}

double KlDivergence(const GridDistribution& rho, const GridDistribution& mu,
                    double eps) {
  RequireSameGrid(rho.grid(), mu.grid());
  return KlDivergence(rho.mass(), mu.mass(), eps);
}

double Wasserstein1D(const GridDistribution& mu, const GridDistribution& nu) {
  RequireSameGrid(mu.grid(), nu.grid());
  if (mu.grid().dim() != 1) {
    throw Error(ErrorCode::kWrongDimensionality, "1D closed form needs a 1D grid");
  }
  const int k = mu.grid().bins();
  std::vector<double> diff(k);
  double running = 0.0;
  for (int i = 0; i < k; ++i) {
    running += mu[i] - nu[i];
    diff[i] = running;
  }
  auto cost = [&](double offset) {
    double s = 0.0;
    for (double d : diff) s += std::abs(d - offset);
    return s / k;
  };
  if (mu.grid().topology() == Topology::kClippedBox) return cost(0.0);
  // the L1 objective in the offset is minimized at a median of the differences
  std::vector<double> sorted = diff;
  std::nth_element(sorted.begin(), sorted.begin() + k / 2, sorted.end());
  double best = cost(sorted[k / 2]);
  if (k % 2 == 0) {
    std::nth_element(sorted.begin(), sorted.begin() + k / 2 - 1, sorted.end());
    best = std::min(best, cost(sorted[k / 2 - 1]));
  }
  return best;
}

}  // namespace meadow

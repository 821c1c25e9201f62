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

#ifndef MEADOW_GRID_H_
#define MEADOW_GRID_H_

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "meadow/errors.h"

namespace meadow {

enum class Topology { kTorus, kClippedBox };

// Uniform partition of [0,1]^dim into bins^dim cells. 2D cells are indexed in
// row-major order: cell (i, j) -> i * bins + j, where i bins the first
// coordinate and j the second.
class GridSpec {
 public:
  GridSpec(int dim, int bins, Topology topology);

  int dim() const { return dim_; }
  int bins() const { return bins_; }
  Topology topology() const { return topology_; }
  int num_cells() const { return dim_ == 1 ? bins_ : bins_ * bins_; }
  double cell_width() const { return 1.0 / bins_; }
  double cell_volume() const { return std::pow(cell_width(), dim_); }

  // midpoint of bin i along one axis
  double AxisCenter(int i) const { return (i + 0.5) / bins_; }

  // num_cells x dim matrix of cell midpoints
  Eigen::MatrixXd CellCenters() const;

  // cell containing a point; coordinates are wrapped on the torus and clamped
  // to the box otherwise
  int CellIndex(const Eigen::Ref<const Eigen::VectorXd>& point) const;

  // per-axis bin indices of a cell
  Eigen::VectorXi AxisBins(int cell) const;

  bool operator==(const GridSpec& other) const {
    return dim_ == other.dim_ && bins_ == other.bins_ &&
           topology_ == other.topology_;
  }
  bool operator!=(const GridSpec& other) const { return !(*this == other); }

 private:
  int dim_;
  int bins_;
  Topology topology_;
};

// Probability vector over the cells of a grid. Immutable after construction.
class GridDistribution {
 public:
  // validates non-negativity and unit mass (1e-9)
  GridDistribution(GridSpec grid, Eigen::VectorXd mass);

  static GridDistribution Uniform(const GridSpec& grid);
  static GridDistribution PointMass(const GridSpec& grid, int cell);

  const GridSpec& grid() const { return grid_; }
  const Eigen::VectorXd& mass() const { return mass_; }
  double operator[](int cell) const { return mass_[cell]; }
  int size() const { return static_cast<int>(mass_.size()); }

  // mass divided by cell volume
  Eigen::VectorXd Density() const { return mass_ / grid_.cell_volume(); }

 private:
  GridSpec grid_;
  Eigen::VectorXd mass_;
};

void RequireSameGrid(const GridSpec& a, const GridSpec& b);

GridDistribution Normalize(const Eigen::Ref<const Eigen::VectorXd>& weights,
                           const GridSpec& grid);

// normalized histogram of points (one point per row)
GridDistribution Histogram(const Eigen::Ref<const Eigen::MatrixXd>& points,
                           const GridSpec& grid);

// -- expression-level kernels, usable on any Eigen vector expression --

// -sum p log p with 0 log 0 = 0
template <typename Derived>
typename Derived::Scalar ShannonEntropy(const Eigen::DenseBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  Scalar h(0);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const Scalar v = p.derived().coeff(i);
    if (v > Scalar(0)) h -= v * std::log(v);
  }
  return h;
}

// sum rho log(rho / (mu + eps)) with 0 log 0 = 0
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar KlDivergence(const Eigen::DenseBase<DerivedA>& rho,
                                       const Eigen::DenseBase<DerivedB>& mu,
                                       typename DerivedA::Scalar eps) {
  using Scalar = typename DerivedA::Scalar;
  Scalar kl(0);
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    const Scalar r = rho.derived().coeff(i);
    if (r > Scalar(0)) kl += r * std::log(r / (mu.derived().coeff(i) + eps));
  }
  return kl;
}

// -- distribution-level operations --

double ShannonEntropy(const GridDistribution& mu);

// -sum log(density_i + eps) mu_i
double SmoothedDifferentialEntropy(const GridDistribution& mu, double eps);

// D_KL(rho || mu) with eps added to mu's cells; eps = 0 is allowed
double KlDivergence(const GridDistribution& rho, const GridDistribution& mu,
                    double eps);

// Exact W1 between two 1D distributions via their CDFs. On the torus the
// optimal circular offset is one of the cumulative differences.
double Wasserstein1D(const GridDistribution& mu, const GridDistribution& nu);

}  // namespace meadow

#endif  // MEADOW_GRID_H_

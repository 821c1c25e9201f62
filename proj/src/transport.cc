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

#include "meadow/transport.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace meadow {
namespace {

constexpr double kMassTolerance = 1e-12;

// Spanning-tree basis of a transportation problem. Nodes 0..n-1 are supply
// rows, n..n+m-1 demand columns; every basic cell is a tree edge.
class TransportBasis {
 public:
  TransportBasis(int rows, int cols)
      : rows_(rows), cols_(cols), adjacency_(rows + cols) {}

  void Add(int cell) {
    const auto [i, j] = Split(cell);
    adjacency_[i].push_back(cell);
    adjacency_[rows_ + j].push_back(cell);
  }

  void Remove(int cell) {
    const auto [i, j] = Split(cell);
    Erase(adjacency_[i], cell);
    Erase(adjacency_[rows_ + j], cell);
  }

  // potentials with u[0] = 0 and u_i + v_j = c_ij on every basic cell
  void Potentials(const Eigen::Ref<const Eigen::MatrixXd>& cost,
                  Eigen::VectorXd& u, Eigen::VectorXd& v) {
    const int nodes = rows_ + cols_;
    visited_.assign(nodes, 0);
    u.resize(rows_);
    v.resize(cols_);
    stack_.clear();
    stack_.push_back(0);
    u[0] = 0.0;
    visited_[0] = 1;
    while (!stack_.empty()) {
      const int node = stack_.back();
      stack_.pop_back();
      for (int cell : adjacency_[node]) {
        const auto [i, j] = Split(cell);
        const int other = node < rows_ ? rows_ + j : i;
        if (visited_[other]) continue;
        visited_[other] = 1;
        if (other < rows_) {
          u[i] = cost(i, j) - v[j];
        } else {
          v[j] = cost(i, j) - u[i];
        }
        stack_.push_back(other);
      }
    }
  }

  // basic cells on the tree path from supply row i to demand column j
  std::vector<int> Path(int i, int j) {
    const int nodes = rows_ + cols_;
    parent_cell_.assign(nodes, -1);
    visited_.assign(nodes, 0);
    stack_.clear();
    stack_.push_back(i);
    visited_[i] = 1;
    const int target = rows_ + j;
    while (!stack_.empty() && !visited_[target]) {
      const int node = stack_.back();
      stack_.pop_back();
      for (int cell : adjacency_[node]) {
        const auto [ci, cj] = Split(cell);
        const int other = node < rows_ ? rows_ + cj : ci;
        if (visited_[other]) continue;
        visited_[other] = 1;
        parent_cell_[other] = cell;
        stack_.push_back(other);
      }
    }
    std::vector<int> path;
    int node = target;
    while (node != i) {
      const int cell = parent_cell_[node];
      path.push_back(cell);
      const auto [ci, cj] = Split(cell);
      node = node < rows_ ? rows_ + cj : ci;
    }
    // path now runs from column j back to row i
    return path;
  }

  std::pair<int, int> Split(int cell) const { return {cell / cols_, cell % cols_}; }

 private:
  static void Erase(std::vector<int>& v, int cell) {
    v.erase(std::find(v.begin(), v.end(), cell));
  }

  int rows_;
  int cols_;
  std::vector<std::vector<int>> adjacency_;
  std::vector<char> visited_;
  std::vector<int> parent_cell_;
  std::vector<int> stack_;
};

}  // namespace

TransportSolution SolveTransport(const Eigen::Ref<const Eigen::VectorXd>& supply,
                                 const Eigen::Ref<const Eigen::VectorXd>& demand,
                                 const Eigen::Ref<const Eigen::MatrixXd>& cost) {
  if (cost.rows() != supply.size() || cost.cols() != demand.size()) {
    throw Error(ErrorCode::kShapeMismatch, "cost matrix does not match masses");
  }
  if ((supply.array() < 0).any() || (demand.array() < 0).any()) {
    throw Error(ErrorCode::kFlowInfeasible, "negative mass in transport problem");
  }
  const double total = supply.sum();
  if (std::abs(total - demand.sum()) > kMassTolerance || !(total > 0.0)) {
    throw Error(ErrorCode::kFlowInfeasible,
                "supply and demand totals differ: " + std::to_string(total) +
                    " vs " + std::to_string(demand.sum()));
  }

  // restrict to the support; empty rows/columns get dual-feasible potentials
  std::vector<int> row_ids, col_ids;
  for (Eigen::Index i = 0; i < supply.size(); ++i) {
    if (supply[i] > 0.0) row_ids.push_back(static_cast<int>(i));
  }
  for (Eigen::Index j = 0; j < demand.size(); ++j) {
    if (demand[j] > 0.0) col_ids.push_back(static_cast<int>(j));
  }
  const int n = static_cast<int>(row_ids.size());
  const int m = static_cast<int>(col_ids.size());
  Eigen::VectorXd a(n), b(m);
  Eigen::MatrixXd c(n, m);
  for (int i = 0; i < n; ++i) a[i] = supply[row_ids[i]];
  for (int j = 0; j < m; ++j) b[j] = demand[col_ids[j]];
  b *= a.sum() / b.sum();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) c(i, j) = cost(row_ids[i], col_ids[j]);
  }

  // north-west corner start: n + m - 1 basic cells forming a spanning tree
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, m);
  std::vector<char> basic(static_cast<size_t>(n) * m, 0);
  TransportBasis basis(n, m);
  {
    Eigen::VectorXd ra = a, rb = b;
    int i = 0, j = 0;
    while (i < n && j < m) {
      const double q = std::min(ra[i], rb[j]);
      x(i, j) = q;
      ra[i] -= q;
      rb[j] -= q;
      basic[i * m + j] = 1;
      basis.Add(i * m + j);
      if (i == n - 1 && j == m - 1) break;
      if (i == n - 1) {
        ++j;
      } else if (j == m - 1) {
        ++i;
      } else if (ra[i] <= rb[j]) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  const double tol = 1e-13 * scale;
  const long max_pivots = 50L * (n + m) * (n + m) + 1000;
  // block pricing: scan arcs cyclically, pivot on the best arc of the first
  // block that holds a candidate
  const long arcs = static_cast<long>(n) * m;
  const long block = std::max(64L, static_cast<long>(std::sqrt(static_cast<double>(arcs))));
  long cursor = 0;
  Eigen::VectorXd u, v;
  int pivots = 0;
  for (;; ++pivots) {
    if (pivots > max_pivots) {
      throw Error(ErrorCode::kFlowInfeasible, "network simplex did not converge");
    }
    basis.Potentials(c, u, v);
    double best = -tol;
    int enter = -1;
    for (long scanned = 0; scanned < arcs;) {
      const long stop = std::min(arcs, scanned + block);
      for (; scanned < stop; ++scanned, cursor = cursor + 1 == arcs ? 0 : cursor + 1) {
        if (basic[cursor]) continue;
        const int i = static_cast<int>(cursor / m), j = static_cast<int>(cursor % m);
        const double reduced = c(i, j) - u[i] - v[j];
        if (reduced < best) {
          best = reduced;
          enter = static_cast<int>(cursor);
        }
      }
      if (enter >= 0) break;
    }
    if (enter < 0) break;
    const auto [ei, ej] = basis.Split(enter);
    // cycle: entering cell +, then alternating -,+,... along the path from
    // column ej back to row ei
    std::vector<int> path = basis.Path(ei, ej);
    double theta = std::numeric_limits<double>::infinity();
    int leave = -1;
    for (size_t p = 0; p < path.size(); p += 2) {
      const auto [pi, pj] = basis.Split(path[p]);
      if (x(pi, pj) < theta) {
        theta = x(pi, pj);
        leave = path[p];
      }
    }
    for (size_t p = 0; p < path.size(); ++p) {
      const auto [pi, pj] = basis.Split(path[p]);
      x(pi, pj) += (p % 2 == 0) ? -theta : theta;
    }
    x(ei, ej) += theta;
    const auto [li, lj] = basis.Split(leave);
    x(li, lj) = 0.0;
    basic[leave] = 0;
    basis.Remove(leave);
    basic[enter] = 1;
    basis.Add(enter);
  }

  TransportSolution sol;
  sol.pivots = pivots;
  sol.supply_potential = Eigen::VectorXd::Zero(supply.size());
  sol.demand_potential = Eigen::VectorXd::Zero(demand.size());
  for (int j = 0; j < m; ++j) sol.demand_potential[col_ids[j]] = v[j];
  for (int i = 0; i < n; ++i) sol.supply_potential[row_ids[i]] = u[i];
  // extend to empty cells while keeping dual feasibility on all arcs
  for (Eigen::Index i = 0; i < supply.size(); ++i) {
    if (supply[i] > 0.0) continue;
    double lo = std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j) lo = std::min(lo, cost(i, col_ids[j]) - v[j]);
    sol.supply_potential[i] = lo;
  }
  for (Eigen::Index j = 0; j < demand.size(); ++j) {
    if (demand[j] > 0.0) continue;
    double lo = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < supply.size(); ++i) {
      lo = std::min(lo, cost(i, j) - sol.supply_potential[i]);
    }
    sol.demand_potential[j] = lo;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      if (x(i, j) > 0.0) {
        sol.cost += x(i, j) * c(i, j);
        sol.flow.push_back({row_ids[i], col_ids[j], x(i, j)});
      }
    }
  }
  return sol;
}

Eigen::MatrixXd GridL1Cost(const GridSpec& grid) {
  const Eigen::MatrixXd centers = grid.CellCenters();
  const int n = grid.num_cells();
  Eigen::MatrixXd cost(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      cost(i, j) = (centers.row(i) - centers.row(j)).cwiseAbs().sum();
    }
  }
  return cost;
}

TransportSolution Wasserstein1GridPlan(const GridDistribution& mu,
                                       const GridDistribution& nu) {
  RequireSameGrid(mu.grid(), nu.grid());
  if (mu.grid().topology() != Topology::kClippedBox) {
    throw Error(ErrorCode::kGridMismatch,
                "flow-based W1 requires a clipped-box grid");
  }
  // distributions carry up to 1e-9 of mass drift; solve on exact unit mass
  return SolveTransport(mu.mass() / mu.mass().sum(), nu.mass() / nu.mass().sum(),
                        GridL1Cost(mu.grid()));
}

double Wasserstein1Grid(const GridDistribution& mu, const GridDistribution& nu) {
  RequireSameGrid(mu.grid(), nu.grid());
  if (mu.grid().topology() != Topology::kClippedBox) {
    throw Error(ErrorCode::kGridMismatch,
                "flow-based W1 requires a clipped-box grid");
  }
  // mass shared by both stays put at zero cost; only the difference moves
  const Eigen::VectorXd diff = mu.mass() / mu.mass().sum() - nu.mass() / nu.mass().sum();
  const Eigen::VectorXd supply = diff.cwiseMax(0.0);
  const Eigen::VectorXd demand = (-diff).cwiseMax(0.0);
  if (supply.sum() <= 0.0 || demand.sum() <= 0.0) return 0.0;
  return SolveTransport(supply, demand * (supply.sum() / demand.sum()),
                        GridL1Cost(mu.grid()))
      .cost;
}

double Wasserstein1(const GridDistribution& mu, const GridDistribution& nu) {
  if (mu.grid().dim() == 1) return Wasserstein1D(mu, nu);
  return Wasserstein1Grid(mu, nu);
}

}  // namespace meadow

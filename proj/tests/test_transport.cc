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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/successive_shortest_path_nonnegative_weights.hpp>
// needs the named-parameter machinery pulled in above
#include <boost/graph/find_flow_cost.hpp>

#include "gradcheck.h"
#include "meadow/transport.h"

using namespace meadow;

namespace {

// Independent oracle: successive shortest paths (Boost) on integer masses
// and integer costs. Returns the exact total cost.
long SspCost(const std::vector<long>& supply, const std::vector<long>& demand,
             const std::vector<std::vector<long>>& cost) {
  using Traits = boost::adjacency_list_traits<boost::vecS, boost::vecS, boost::directedS>;
  using Graph = boost::adjacency_list<
      boost::vecS, boost::vecS, boost::directedS, boost::no_property,
      boost::property<boost::edge_capacity_t, long,
                      boost::property<boost::edge_residual_capacity_t, long,
                                      boost::property<boost::edge_reverse_t,
                                                      Traits::edge_descriptor,
                                                      boost::property<boost::edge_weight_t, long>>>>>;
  const int n = static_cast<int>(supply.size()), m = static_cast<int>(demand.size());
  Graph g(n + m + 2);
  const int src = n + m, snk = n + m + 1;
  auto cap = boost::get(boost::edge_capacity, g);
  auto rev = boost::get(boost::edge_reverse, g);
  auto w = boost::get(boost::edge_weight, g);
  auto add = [&](int u, int v, long c, long cost_uv) {
    auto e = boost::add_edge(u, v, g).first;
    auto r = boost::add_edge(v, u, g).first;
    cap[e] = c;
    cap[r] = 0;
    w[e] = cost_uv;
    w[r] = -cost_uv;
    rev[e] = r;
    rev[r] = e;
  };
  long total = 0;
  for (int i = 0; i < n; ++i) {
    add(src, i, supply[i], 0);
    total += supply[i];
  }
  for (int j = 0; j < m; ++j) add(n + j, snk, demand[j], 0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) add(i, n + j, total, cost[i][j]);
  }
  boost::successive_shortest_path_nonnegative_weights(g, src, snk);
  return boost::find_flow_cost(g);
}

// random integer masses with a common total
std::vector<long> IntegerMasses(int n, long total, std::mt19937_64& rng) {
  std::uniform_int_distribution<long> u(0, total);
  std::vector<long> cuts(n - 1);
  for (auto& c : cuts) c = u(rng);
  cuts.push_back(0);
  cuts.push_back(total);
  std::sort(cuts.begin(), cuts.end());
  std::vector<long> out(n);
  for (int i = 0; i < n; ++i) out[i] = cuts[i + 1] - cuts[i];
  return out;
}

GridDistribution FromCounts(const GridSpec& g, const std::vector<long>& c, long total) {
  Eigen::VectorXd m(c.size());
  for (size_t i = 0; i < c.size(); ++i) m[i] = static_cast<double>(c[i]) / total;
  return GridDistribution(g, m);
}

}  // namespace

TEST_CASE("flow W1 examples") {
  const GridSpec g(2, 5, Topology::kClippedBox);
  std::mt19937_64 rng(1);
  const GridDistribution mu(g, testing::RandomSimplex(25, rng));
  CHECK(Wasserstein1Grid(mu, mu) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(Wasserstein1Grid(GridDistribution::PointMass(g, 7), GridDistribution::PointMass(g, 8)) ==
        doctest::Approx(0.2));
  CHECK(Wasserstein1Grid(GridDistribution::PointMass(g, 0), GridDistribution::PointMass(g, 24)) ==
        doctest::Approx(1.6));
}

TEST_CASE("flow W1 agrees with successive shortest paths on 3x3 grids") {
  const GridSpec g(2, 3, Topology::kClippedBox);
  std::mt19937_64 rng(11);
  const long total = 997;
  // L1 distance between centres in cell units
  std::vector<std::vector<long>> cost(9, std::vector<long>(9));
  for (int i = 0; i < 9; ++i) {
    for (int j = 0; j < 9; ++j) cost[i][j] = std::abs(i / 3 - j / 3) + std::abs(i % 3 - j % 3);
  }
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = IntegerMasses(9, total, rng), b = IntegerMasses(9, total, rng);
    const double oracle = static_cast<double>(SspCost(a, b, cost)) / (3.0 * total);
    const double w = Wasserstein1Grid(FromCounts(g, a, total), FromCounts(g, b, total));
    CHECK(std::abs(w - oracle) <= 1e-8);
  }
}

TEST_CASE("flow plan is a coupling with complementary potentials") {
  const GridSpec g(2, 4, Topology::kClippedBox);
  std::mt19937_64 rng(2);
  const GridDistribution mu(g, testing::RandomSimplex(16, rng));
  const GridDistribution nu(g, testing::RandomSimplex(16, rng));
  const TransportSolution s = Wasserstein1GridPlan(mu, nu);
  const Eigen::MatrixXd c = GridL1Cost(g);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(16), in = Eigen::VectorXd::Zero(16);
  for (const FlowEntry& f : s.flow) {
    out[f.from] += f.amount;
    in[f.to] += f.amount;
    CHECK(std::abs(c(f.from, f.to) - s.supply_potential[f.from] - s.demand_potential[f.to]) <
          1e-12);
  }
  CHECK((out - mu.mass()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((in - nu.mass()).cwiseAbs().maxCoeff() < 1e-12);
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 16; ++j) {
      CHECK(c(i, j) - s.supply_potential[i] - s.demand_potential[j] >= -1e-12);
    }
  }
  const double dual = s.supply_potential.dot(mu.mass()) + s.demand_potential.dot(nu.mass());
  CHECK(dual == doctest::Approx(s.cost).epsilon(1e-12));
  CHECK(Wasserstein1Grid(mu, nu) == doctest::Approx(s.cost).epsilon(1e-10));
}

TEST_CASE("flow W1 is a metric on random triples") {
  const GridSpec g(2, 4, Topology::kClippedBox);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const GridDistribution a(g, testing::RandomSimplex(16, rng));
    const GridDistribution b(g, testing::RandomSimplex(16, rng));
    const GridDistribution c(g, testing::RandomSimplex(16, rng));
    CHECK(Wasserstein1Grid(a, b) == doctest::Approx(Wasserstein1Grid(b, a)).epsilon(1e-12));
    CHECK(Wasserstein1Grid(a, c) <= Wasserstein1Grid(a, b) + Wasserstein1Grid(b, c) + 1e-12);
  }
}

TEST_CASE("2D flow matches the 1D closed form on single-row inputs") {
  const int k = 6;
  const GridSpec g2(2, k, Topology::kClippedBox), g1(1, k, Topology::kClippedBox);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd a = testing::RandomSimplex(k, rng), b = testing::RandomSimplex(k, rng);
    const int row = trial % k;
    Eigen::VectorXd a2 = Eigen::VectorXd::Zero(k * k), b2 = a2;
    for (int j = 0; j < k; ++j) {
      a2[row * k + j] = a[j];
      b2[row * k + j] = b[j];
    }
    CHECK(std::abs(Wasserstein1Grid(GridDistribution(g2, a2), GridDistribution(g2, b2)) -
                   Wasserstein1D(GridDistribution(g1, a), GridDistribution(g1, b))) <= 1e-8);
  }
}

TEST_CASE("1D closed forms agree with transport on the line and the circle") {
  const int k = 12;
  std::mt19937_64 rng(6);
  Eigen::MatrixXd line(k, k), circle(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      line(i, j) = std::abs(i - j) / double(k);
      circle(i, j) = std::min(std::abs(i - j), k - std::abs(i - j)) / double(k);
    }
  }
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd a = testing::RandomSimplex(k, rng), b = testing::RandomSimplex(k, rng);
    const GridSpec box(1, k, Topology::kClippedBox), torus(1, k, Topology::kTorus);
    CHECK(std::abs(Wasserstein1D(GridDistribution(box, a), GridDistribution(box, b)) -
                   SolveTransport(a, b, line).cost) < 1e-10);
    CHECK(std::abs(Wasserstein1D(GridDistribution(torus, a), GridDistribution(torus, b)) -
                   SolveTransport(a, b, circle).cost) < 1e-10);
  }
}

TEST_CASE("transport input validation") {
  Eigen::VectorXd a(2), b(2);
  a << 0.5, 0.5;
  b << 0.7, 0.7;
  CHECK_THROWS_AS(SolveTransport(a, b, Eigen::MatrixXd::Ones(2, 2)), Error);
  const GridSpec torus(2, 3, Topology::kTorus);
  CHECK_THROWS_AS(Wasserstein1Grid(GridDistribution::Uniform(torus), GridDistribution::Uniform(torus)),
                  Error);
}

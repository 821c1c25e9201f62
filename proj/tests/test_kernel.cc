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

#include <cmath>
#include <random>

#include "gradcheck.h"
#include "meadow/kernel.h"

using namespace meadow;
using testing::RandomMatrix;
using testing::RandomSimplex;

namespace {

// Probability that N(mean, sd^2) lands in [lo, hi), by composite Simpson
// quadrature of the density.
double Quadrature(double mean, double sd, double lo, double hi) {
  const int n = 2000;
  const double h = (hi - lo) / n;
  auto pdf = [&](double x) {
    const double z = (x - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
  };
  double s = pdf(lo) + pdf(hi);
  for (int i = 1; i < n; ++i) s += pdf(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("deterministic limit with zero drift is the identity") {
  for (auto topo : {Topology::kTorus, Topology::kClippedBox}) {
    const GridSpec g(2, 4, topo);
    std::mt19937_64 rng(1);
    const Eigen::VectorXd mu = RandomSimplex(16, rng);
    const Eigen::MatrixXd c = g.CellCenters();
    CHECK(TransitionKernel(g, c, 0.0).isApprox(Eigen::MatrixXd::Identity(16, 16)));
    CHECK(Propagate(g, c, mu, 0.0).isApprox(mu));
  }
}

TEST_CASE("constant shift keeps the uniform distribution on the torus") {
  const GridSpec g(1, 20, Topology::kTorus);
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(20, 0.05);
  const Eigen::MatrixXd means = g.CellCenters().array() + 0.237;
  CHECK((Propagate(g, means, u, 0.08) - u).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single atom matches direct quadrature") {
  const int k = 10;
  const double mean = 0.83, sd = 0.12;
  const GridSpec torus(1, k, Topology::kTorus), box(1, k, Topology::kClippedBox);
  const Eigen::MatrixXd m = Eigen::MatrixXd::Constant(1, 1, mean);
  const Eigen::MatrixXd kt = TransitionKernel(torus, m, sd);
  const Eigen::MatrixXd kb = TransitionKernel(box, m, sd);
  for (int b = 0; b < k; ++b) {
    const double lo = double(b) / k, hi = double(b + 1) / k;
    double wrapped = 0.0;
    for (int s = -3; s <= 3; ++s) wrapped += Quadrature(mean, sd, lo + s, hi + s);
    CHECK(kt(0, b) == doctest::Approx(wrapped).epsilon(1e-9));
    double clipped = Quadrature(mean, sd, lo, hi);
    if (b == 0) clipped += Quadrature(mean, sd, -12.0 * sd, 0.0);
    if (b == k - 1) clipped += Quadrature(mean, sd, 1.0, 1.0 + 12.0 * sd);
    CHECK(kb(0, b) == doctest::Approx(clipped).epsilon(1e-9));
  }
}

TEST_CASE("2D kernel factorises over the axes") {
  const GridSpec g2(2, 5, Topology::kClippedBox), g1(1, 5, Topology::kClippedBox);
  Eigen::MatrixXd m(1, 2);
  m << 0.31, 0.77;
  const Eigen::MatrixXd k2 = TransitionKernel(g2, m, 0.1);
  const Eigen::MatrixXd kx = TransitionKernel(g1, m.col(0), 0.1);
  const Eigen::MatrixXd ky = TransitionKernel(g1, m.col(1), 0.1);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) CHECK(k2(0, i * 5 + j) == doctest::Approx(kx(0, i) * ky(0, j)));
  }
}

TEST_CASE("kernel rows are distributions for wild means") {
  std::mt19937_64 rng(4);
  for (auto topo : {Topology::kTorus, Topology::kClippedBox}) {
    for (int dim : {1, 2}) {
      const GridSpec g(dim, 7, topo);
      const Eigen::MatrixXd means = RandomMatrix(g.num_cells(), dim, rng, -3, 4);
      for (double sd : {0.0, 1e-4, 0.03, 0.5, 5.0}) {
        const Eigen::MatrixXd k = TransitionKernel(g, means, sd);
        CHECK((k.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-9);
        CHECK(k.minCoeff() >= 0.0);
      }
    }
  }
  CHECK_THROWS_AS(TransitionKernel(GridSpec(1, 3, Topology::kTorus),
                                   Eigen::MatrixXd::Constant(3, 1, NAN), 0.1),
                  Error);
}

TEST_CASE("differentiable transition matches propagate and finite differences") {
  std::mt19937_64 rng(12);
  for (auto topo : {Topology::kTorus, Topology::kClippedBox}) {
    for (int dim : {1, 2}) {
      const GridSpec g(dim, dim == 1 ? 9 : 4, topo);
      const int n = g.num_cells();
      const Eigen::MatrixXd means = g.CellCenters() + RandomMatrix(n, dim, rng, -0.2, 0.2);
      const Eigen::MatrixXd mass = RandomSimplex(n, rng);
      const Eigen::MatrixXd w = RandomMatrix(n, 1, rng);
      const double sd = 0.09;
      {
        ad::Tape t;
        const ad::Var out = GridTransition(g, t.Constant(means), t.Constant(mass), sd);
        CHECK((out.value() - Propagate(g, means, mass.col(0), sd)).cwiseAbs().maxCoeff() < 1e-14);
      }
      const auto r = testing::CheckGradient(
          [&](ad::Tape& t, const std::vector<ad::Var>& v) {
            return ad::Sum(GridTransition(g, v[0], v[1], sd) * t.Constant(w));
          },
          {means, mass});
      INFO("dim " << dim << " max_rel " << r.max_rel);
      CHECK(r.failures == 0);
    }
  }
}

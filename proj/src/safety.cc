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

#include "meadow/safety.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "meadow/transport.h"

namespace meadow {
namespace {

// supergradient of W1(mu, nu) in mu's mass
Eigen::VectorXd Wasserstein1Gradient(const GridDistribution& mu,
                                     const GridDistribution& nu) {
  const GridSpec& g = mu.grid();
  if (g.dim() == 2) {
    return Wasserstein1GridPlan(mu, nu).supply_potential;
  }
  const int k = g.bins();
  Eigen::VectorXd diff(k);
  double c = 0.0;
  for (int i = 0; i < k; ++i) {
    c += mu[i] - nu[i];
    diff[i] = c;
  }
  double offset = 0.0;
  if (g.topology() == Topology::kTorus) {
    std::vector<double> sorted(diff.data(), diff.data() + k);
    std::nth_element(sorted.begin(), sorted.begin() + k / 2, sorted.end());
    offset = sorted[k / 2];
  }
  Eigen::VectorXd grad(k);
  double tail = 0.0;
  for (int i = k - 1; i >= 0; --i) {
    const double d = diff[i] - offset;
    tail += (d > 0.0) - (d < 0.0);
    grad[i] = tail / k;
  }
  return grad;
}

Eigen::VectorXd Dirichlet(int n, std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(1.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = gamma(rng);
  return v / v.sum();
}

}  // namespace

SafetySpec SafetySpec::Entropy(double threshold) {
  SafetySpec s;
  s.kind = ConstraintKind::kEntropy;
  s.threshold = threshold;
  return s;
}

SafetySpec SafetySpec::Similarity(double threshold, GridDistribution reference) {
  if (threshold < 0.0) {
    throw Error(ErrorCode::kConfig, "similarity threshold must be non-negative");
  }
  SafetySpec s;
  s.kind = ConstraintKind::kSimilarity;
  s.threshold = threshold;
  s.reference = std::move(reference);
  return s;
}

double LipschitzBundle::Lbar() const {
  return 1.0 + 2.0 * (1.0 + L_pi) * (L_f + 2.0 * beta * L_sigma);
}

double EvaluateConstraint(const SafetySpec& spec, const GridDistribution& mu) {
  switch (spec.kind) {
    case ConstraintKind::kNone:
      return std::numeric_limits<double>::infinity();
    case ConstraintKind::kEntropy:
      return (spec.differential ? SmoothedDifferentialEntropy(mu, spec.epsilon)
                                : ShannonEntropy(mu)) -
             spec.threshold;
    case ConstraintKind::kSimilarity:
      if (!spec.reference) {
        throw Error(ErrorCode::kConfig, "similarity constraint lacks a reference");
      }
      RequireSameGrid(mu.grid(), spec.reference->grid());
      return spec.threshold - Wasserstein1(mu, *spec.reference);
  }
  return 0.0;
}

double EvaluateConstraint(const SafetySpec& spec, const Eigen::VectorXd& mass,
                          const GridSpec& grid) {
  // tolerate round-off drift of propagated masses
  const Eigen::VectorXd m = mass.cwiseMax(0.0);
  return EvaluateConstraint(spec, GridDistribution(grid, m / m.sum()));
}

ad::Var EvaluateConstraint(const SafetySpec& spec, ad::Var mass,
                           const GridSpec& grid) {
  if (spec.kind != ConstraintKind::kEntropy) {
    throw Error(ErrorCode::kConfig,
                "only entropy constraints can be differentiated");
  }
  if (mass.rows() != grid.num_cells()) {
    throw Error(ErrorCode::kGridMismatch, "mass does not match the grid");
  }
  ad::Var h;
  if (spec.differential) {
    if (!(spec.epsilon > 0.0)) {
      throw Error(ErrorCode::kNonPositiveEpsilon, "epsilon must be positive");
    }
    h = -ad::Sum(mass * ad::Log((1.0 / grid.cell_volume()) * mass + spec.epsilon));
  } else {
    h = -ad::Sum(ad::XLogX(mass));
  }
  return h - spec.threshold;
}

std::vector<double> ComputeMargins(const LipschitzBundle& bundle,
                                   double max_sigma, int steps) {
  if (max_sigma < 0.0) throw Error(ErrorCode::kConfig, "max sigma is negative");
  const double lbar = bundle.Lbar();
  std::vector<double> margins(steps);
  double power = 1.0;
  for (int t = 1; t <= steps; ++t) {
    margins[t - 1] = t * 2.0 * bundle.beta * power * max_sigma;
    power *= lbar;
  }
  return margins;
}

double PessimisticSlack(double h_value, const LipschitzBundle& bundle,
                        double margin) {
  return h_value - bundle.L_h * margin;
}

double PessimisticSlack(const SafetySpec& spec, const GridDistribution& mu,
                        const LipschitzBundle& bundle, double margin) {
  return PessimisticSlack(EvaluateConstraint(spec, mu), bundle, margin);
}

double LogBarrier(double slack, double lambda, double delta_ext) {
  if (slack >= delta_ext) return lambda * std::log(slack);
  return lambda * (std::log(delta_ext) + (slack - delta_ext) / delta_ext);
}

ad::Var LogBarrier(ad::Var slack, double lambda, double delta_ext) {
  const double s = slack.scalar();
  const double d = s >= delta_ext ? lambda / s : lambda / delta_ext;
  const int is = slack.id();
  return slack.tape()->Record(
      Eigen::MatrixXd::Constant(1, 1, LogBarrier(s, lambda, delta_ext)), {slack},
      [is, d](ad::Tape& t, int self) { t.Accumulate(is, d * t.grad_ref(self)); });
}

GapCheck CheckLipschitzGap(const SafetySpec& spec, const GridSpec& grid,
                           double L_h, int pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GapCheck out;
  const int n = grid.num_cells();
  for (int p = 0; p < pairs; ++p) {
    const GridDistribution mu(grid, Dirichlet(n, rng));
    // alternate between independent pairs and nearby pairs
    Eigen::VectorXd other = Dirichlet(n, rng);
    if (p % 2 == 1) {
      const double t = std::pow(10.0, -3.0 * u(rng));
      other = (1.0 - t) * mu.mass() + t * other;
    }
    const GridDistribution nu(grid, other / other.sum());
    const double w = Wasserstein1(mu, nu);
    if (w <= 0.0) continue;
    const double gap =
        std::abs(EvaluateConstraint(spec, mu) - EvaluateConstraint(spec, nu));
    out.max_ratio = std::max(out.max_ratio, gap / w);
    if (gap > L_h * w) ++out.violations;
    ++out.pairs;
  }
  return out;
}

GridDistribution MaxEntropySafeInit(const SafetySpec& spec, const GridSpec& grid) {
  const GridDistribution uniform = GridDistribution::Uniform(grid);
  if (spec.kind == ConstraintKind::kNone) return uniform;
  if (EvaluateConstraint(spec, uniform) >= 0.0) return uniform;
  if (spec.kind == ConstraintKind::kEntropy) {
    throw Error(ErrorCode::kInfeasibleConstraint,
                "entropy threshold exceeds the maximum entropy of the grid");
  }
  if (!spec.reference) {
    throw Error(ErrorCode::kConfig, "similarity constraint lacks a reference");
  }
  RequireSameGrid(grid, spec.reference->grid());

  // mirror ascent on H(mu) - w max(0, W1(mu, nu0) - C)^2
  const int n = grid.num_cells();
  Eigen::VectorXd mu = 0.999 * spec.reference->mass() +
                       Eigen::VectorXd::Constant(n, 0.001 / n);
  std::optional<GridDistribution> best;
  double best_entropy = -std::numeric_limits<double>::infinity();
  double penalty = 1.0;
  constexpr double kStep = 0.1;
  for (int it = 0; it < 500; ++it) {
    const GridDistribution current(grid, mu / mu.sum());
    const double w1 = Wasserstein1(current, *spec.reference);
    const double violation = w1 - spec.threshold;
    if (violation <= 0.0) {
      const double h = ShannonEntropy(current);
      if (h > best_entropy) {
        best_entropy = h;
        best = current;
      }
    } else {
      penalty *= 2.0;
    }
    Eigen::VectorXd grad =
        -(current.mass().array().max(1e-300).log() + 1.0).matrix();
    if (violation > 0.0) {
      grad -= 2.0 * penalty * violation *
              Wasserstein1Gradient(current, *spec.reference);
    }
    grad.array() -= grad.mean();
    // keep the multiplicative step bounded
    const double scale = std::max(1.0, grad.cwiseAbs().maxCoeff());
    mu = current.mass().array() * (kStep * grad.array() / scale).exp();
    mu /= mu.sum();
  }
  if (!best) {
    throw Error(ErrorCode::kInfeasibleConstraint,
                "no distribution within the similarity threshold was found");
  }
  return *best;
}

}  // namespace meadow

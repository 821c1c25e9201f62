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

#ifndef MEADOW_ENVIRONMENT_H_
#define MEADOW_ENVIRONMENT_H_

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "meadow/autodiff.h"
#include "meadow/grid.h"

namespace meadow {

using Rng = std::mt19937_64;

// Common interface of the benchmark worlds. Masses are num_cells x 1 columns,
// states and actions are rows (one per agent or per source cell).
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const GridSpec& grid() const = 0;
  virtual int steps() const = 0;
  virtual double action_bound() const = 0;
  virtual double noise_std() const = 0;
  int state_dim() const { return grid().dim(); }

  // mass seen by the policy and the transition model (after any passenger
  // trips); identity unless overridden
  virtual ad::Var Prepare(ad::Var mass) const { return mass; }
  Eigen::VectorXd Prepare(const Eigen::VectorXd& mass) const;

  // true transition mean for states already prepared
  virtual ad::Var TrueMean(ad::Var states, ad::Var actions) const = 0;
  virtual Eigen::MatrixXd TrueMean(const Eigen::MatrixXd& states,
                                   const Eigen::MatrixXd& actions) const;

  // grid quadrature of the per-agent reward at step t; actions are the
  // policy outputs at the cell centers of the prepared mass
  virtual ad::Var ExpectedReward(ad::Var mass, ad::Var actions) const = 0;
  double ExpectedReward(const Eigen::VectorXd& mass,
                        const Eigen::MatrixXd& actions) const;

  // agent-level sampling
  virtual Eigen::VectorXd SamplePrepared(const Eigen::VectorXd& s,
                                         const Eigen::VectorXd& mass,
                                         Rng& rng) const {
    (void)mass;
    (void)rng;
    return s;
  }
  virtual Eigen::VectorXd AddNoise(const Eigen::VectorXd& mean, Rng& rng) const = 0;
  // uniform position inside a cell
  Eigen::VectorXd SampleInCell(int cell, Rng& rng) const;

  // regression target recorded for the statistical model
  virtual Eigen::VectorXd ModelTarget(const Eigen::VectorXd& s,
                                      const Eigen::VectorXd& next) const {
    (void)s;
    return next;
  }
};

enum class SwarmVariant { kPenalized, kSafe };

// positional reward 2 pi^2 (sin 2 pi s - cos^2 2 pi s) + 2 sin 2 pi s
double SwarmPositionalReward(double s);
double SwarmReward(double s, double a, double density, SwarmVariant variant);

struct SwarmParams {
  int bins = 100;
  int steps = 100;
  double action_bound = 7.0;
  SwarmVariant reward = SwarmVariant::kPenalized;
};

// One-dimensional torus; s' = s + a dt + N(0, dt) wrapped to [0, 1).
class SwarmEnv : public Environment {
 public:
  explicit SwarmEnv(SwarmParams params);

  const GridSpec& grid() const override { return grid_; }
  int steps() const override { return params_.steps; }
  double action_bound() const override { return params_.action_bound; }
  double noise_std() const override { return std::sqrt(dt()); }
  double dt() const { return 1.0 / params_.steps; }
  const SwarmParams& params() const { return params_; }

  using Environment::ExpectedReward;
  using Environment::TrueMean;
  ad::Var TrueMean(ad::Var states, ad::Var actions) const override;
  ad::Var ExpectedReward(ad::Var mass, ad::Var actions) const override;
  Eigen::VectorXd AddNoise(const Eigen::VectorXd& mean, Rng& rng) const override;
  // nearest periodic image of next relative to s
  Eigen::VectorXd ModelTarget(const Eigen::VectorXd& s,
                              const Eigen::VectorXd& next) const override;

  // wrapped mean (s + a dt) mod 1
  double TransitionMean(double s, double a) const;

 private:
  SwarmParams params_;
  GridSpec grid_;
  Eigen::VectorXd positional_;
};

// ergodic solution: action 2 pi cos 2 pi s, density proportional to
// exp(2 sin 2 pi s)
double SwarmAnalyticAction(double s);
GridDistribution SwarmAnalyticDistribution(const GridSpec& grid);
// grid normalizer sum_i exp(2 sin 2 pi c_i) / k
double SwarmAnalyticNormalizer(int bins);

struct RepositioningParams {
  int bins = 25;
  int steps = 12;
  double action_bound = 1.0;
  double noise_std = 0.0175;
};

// Two-dimensional unit box. Passenger trips move min(mu, rho0) through the
// origin-destination kernel, then vehicles reposition: s' = clip(s + a, 0, 1)
// plus Gaussian noise truncated to the box.
class RepositioningEnv : public Environment {
 public:
  RepositioningEnv(RepositioningParams params, GridDistribution demand,
                   Eigen::MatrixXd od_kernel);

  const GridSpec& grid() const override { return grid_; }
  int steps() const override { return params_.steps; }
  double action_bound() const override { return params_.action_bound; }
  double noise_std() const override { return params_.noise_std; }
  const GridDistribution& demand() const { return demand_; }
  const Eigen::MatrixXd& od_kernel() const { return od_kernel_; }

  using Environment::ExpectedReward;
  using Environment::Prepare;
  using Environment::TrueMean;
  ad::Var Prepare(ad::Var mass) const override;
  ad::Var TrueMean(ad::Var states, ad::Var actions) const override;
  ad::Var ExpectedReward(ad::Var mass, ad::Var actions) const override;
  Eigen::VectorXd SamplePrepared(const Eigen::VectorXd& s,
                                 const Eigen::VectorXd& mass,
                                 Rng& rng) const override;
  Eigen::VectorXd AddNoise(const Eigen::VectorXd& mean, Rng& rng) const override;

 private:
  RepositioningParams params_;
  GridSpec grid_;
  GridDistribution demand_;
  Eigen::MatrixXd od_kernel_;
  double demand_neg_entropy_;
};

// mu^Phi = (mu p) Phi + mu (1 - p) with p = min(1, rho0 / mu)
GridDistribution DemandShift(const GridDistribution& mu,
                             const GridDistribution& demand,
                             const Eigen::MatrixXd& od_kernel);

double RepositioningReward(const GridDistribution& mu,
                           const GridDistribution& demand);

struct DemandParams {
  double od_length_scale = 0.15;
  double attractor_weight = 0.3;
};

struct Demand {
  GridDistribution rho0;
  Eigen::MatrixXd od_kernel;
};

// seeded synthetic demand field and origin-destination kernel
Demand SyntheticDemand(std::uint64_t seed, const GridSpec& grid,
                       DemandParams params = {});

void WriteDemandCsv(std::ostream& out, const GridDistribution& rho0);
GridDistribution ReadDemandCsv(std::istream& in, const GridSpec& grid);
void WriteKernelCsv(std::ostream& out, const Eigen::MatrixXd& od_kernel);
Eigen::MatrixXd ReadKernelCsv(std::istream& in, int num_cells);

}  // namespace meadow

#endif  // MEADOW_ENVIRONMENT_H_

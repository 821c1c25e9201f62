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

#ifndef MEADOW_SAFETY_H_
#define MEADOW_SAFETY_H_

#include <cstdint>
#include <optional>
#include <vector>

#include "meadow/autodiff.h"
#include "meadow/grid.h"

namespace meadow {

enum class ConstraintKind { kNone, kEntropy, kSimilarity };

// h_C(mu) >= 0 defines the safe set.
//   entropy:    H(mu) - C   (Shannon, or eps-smoothed differential entropy)
//   similarity: C - W1(mu, reference)
//   none:       always safe (+inf)
struct SafetySpec {
  ConstraintKind kind = ConstraintKind::kNone;
  double threshold = 0.0;
  bool differential = false;
  double epsilon = 1e-6;
  std::optional<GridDistribution> reference;

  static SafetySpec None() { return {}; }
  static SafetySpec Entropy(double threshold);
  static SafetySpec Similarity(double threshold, GridDistribution reference);
};

struct LipschitzBundle {
  double L_f = 1.0;
  double L_pi = 1.0;
  double L_sigma = 1.0;
  double L_h = 0.1;
  double beta = 1.0;
  // calibration failure probability; documentation only
  double delta = 0.05;

  // 1 + 2 (1 + L_pi) (L_f + 2 beta L_sigma)
  double Lbar() const;
};

double EvaluateConstraint(const SafetySpec& spec, const GridDistribution& mu);
double EvaluateConstraint(const SafetySpec& spec, const Eigen::VectorXd& mass,
                          const GridSpec& grid);
// differentiable form (entropy kind only)
ad::Var EvaluateConstraint(const SafetySpec& spec, ad::Var mass,
                           const GridSpec& grid);

// element t-1 is C_{n,t} = t 2 beta Lbar^(t-1) max_sigma for t = 1..T
std::vector<double> ComputeMargins(const LipschitzBundle& bundle,
                                   double max_sigma, int steps);

double PessimisticSlack(double h_value, const LipschitzBundle& bundle,
                        double margin);
double PessimisticSlack(const SafetySpec& spec, const GridDistribution& mu,
                        const LipschitzBundle& bundle, double margin);

// lambda log(slack), continued linearly below delta_ext
double LogBarrier(double slack, double lambda, double delta_ext = 1e-3);
ad::Var LogBarrier(ad::Var slack, double lambda, double delta_ext = 1e-3);

struct GapCheck {
  double max_ratio = 0.0;  // max |h(mu) - h(nu)| / W1(mu, nu)
  int violations = 0;      // pairs with |h(mu) - h(nu)| > L_h W1
  int pairs = 0;
};

// tests |h_C(mu) - h_C(nu)| <= L_h W1(mu, nu) on random pairs
GapCheck CheckLipschitzGap(const SafetySpec& spec, const GridSpec& grid,
                           double L_h, int pairs, std::uint64_t seed);

// maximum-entropy distribution inside the safe set
GridDistribution MaxEntropySafeInit(const SafetySpec& spec, const GridSpec& grid);

}  // namespace meadow

#endif  // MEADOW_SAFETY_H_

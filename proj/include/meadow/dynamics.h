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

#ifndef MEADOW_DYNAMICS_H_
#define MEADOW_DYNAMICS_H_

#include <functional>

#include <Eigen/Dense>

#include "meadow/autodiff.h"
#include "meadow/environment.h"

namespace meadow {

// Policy outputs at a batch of states. eta may be left unbound, meaning zero.
struct Control {
  ad::Var actions;
  ad::Var eta;
};

// (states n x d, mass num_cells x 1, step t) -> control at those states
using Controller = std::function<Control(ad::Var states, ad::Var mass, int t)>;

// Mean of the next state for a batch of (already prepared) states.
class TransitionModel {
 public:
  virtual ~TransitionModel() = default;
  virtual ad::Var Mean(ad::Var states, ad::Var mass, ad::Var actions,
                       ad::Var eta) const = 0;
};

// the environment's own transition function
class TrueModel : public TransitionModel {
 public:
  explicit TrueModel(const Environment& env) : env_(env) {}
  ad::Var Mean(ad::Var states, ad::Var mass, ad::Var actions,
               ad::Var eta) const override;

 private:
  const Environment& env_;
};

struct StepTrace {
  ad::Var prepared;  // mass after any trips
  Control control;   // at the cell centers
  ad::Var means;     // transition means at the cell centers
  ad::Var next;      // propagated mass
};

// one application of the mean-field transition operator: trips, policy at
// the cell centers, model means, Gaussian kernel
StepTrace MeanFieldStep(const Environment& env, const TransitionModel& model,
                        const Controller& controller, ad::Var mass, int t);

// plain version returning the next mass
Eigen::VectorXd MeanFieldStep(const Environment& env,
                              const TransitionModel& model,
                              const Controller& controller,
                              const Eigen::VectorXd& mass, int t);

// controller that returns fixed per-cell actions regardless of the mass
Controller FixedController(const Eigen::MatrixXd& actions_at_centers);
// controller from a function of one state
Controller StateController(std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f);

}  // namespace meadow

#endif  // MEADOW_DYNAMICS_H_

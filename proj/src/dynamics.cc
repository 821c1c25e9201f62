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

#include "meadow/dynamics.h"

#include "meadow/kernel.h"

namespace meadow {

ad::Var TrueModel::Mean(ad::Var states, ad::Var mass, ad::Var actions,
                        ad::Var eta) const {
  (void)mass;
  (void)eta;
  return env_.TrueMean(states, actions);
}

StepTrace MeanFieldStep(const Environment& env, const TransitionModel& model,
                        const Controller& controller, ad::Var mass, int t) {
  ad::Tape& tape = *mass.tape();
  StepTrace s;
  s.prepared = env.Prepare(mass);
  ad::Var centers = tape.Constant(env.grid().CellCenters());
  s.control = controller(centers, s.prepared, t);
  s.means = model.Mean(centers, s.prepared, s.control.actions, s.control.eta);
  s.next = GridTransition(env.grid(), s.means, s.prepared, env.noise_std());
  return s;
}

Eigen::VectorXd MeanFieldStep(const Environment& env,
                              const TransitionModel& model,
                              const Controller& controller,
                              const Eigen::VectorXd& mass, int t) {
  ad::Tape tape;
  return MeanFieldStep(env, model, controller, tape.Constant(mass), t)
      .next.value()
      .col(0);
}

Controller FixedController(const Eigen::MatrixXd& actions_at_centers) {
  return [actions_at_centers](ad::Var states, ad::Var, int) {
    if (states.rows() != actions_at_centers.rows()) {
      throw Error(ErrorCode::kShapeMismatch, "fixed actions are per cell center");
    }
    return Control{states.tape()->Constant(actions_at_centers), {}};
  };
}

Controller StateController(
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f) {
  return [f](ad::Var states, ad::Var, int) {
    const Eigen::MatrixXd& s = states.value();
    Eigen::MatrixXd a(s.rows(), s.cols());
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      a.row(i) = f(s.row(i).transpose()).transpose();
    }
    return Control{states.tape()->Constant(a), {}};
  };
}

}  // namespace meadow
